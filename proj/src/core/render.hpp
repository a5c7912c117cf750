// Copyright (c) 2026 the wbcdetect authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "core/head.hpp"
#include "core/tensor.hpp"

namespace wbc {

// 2-px yellow rectangle per detection with its probability (one-decimal
// percent) drawn from the built-in 5x7 glyph set next to the box. Returns
// a new image; the input is untouched.
Tensor render_annotations(const Tensor& image, const std::vector<Detection>& detections);

// Label placement for one detection: just above the box top-left corner,
// dropped inside it when the box touches the image top.
struct LabelPlacement {
    int x = 0, y = 0;          // top-left of the text
    int width = 0, height = 7; // glyph rows are 7 px tall
};
LabelPlacement label_placement(const BBox& box, const std::string& text, int img_w, int img_h);

std::string probability_label(double probability);

}  // namespace wbc
