// Copyright (c) 2026 the wbcdetect authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

namespace wbc {

// Axis-aligned box in continuous pixel coordinates, origin top-left,
// x right, y down. Area is (x_max-x_min)*(y_max-y_min) with no pixel
// "+1" correction.
struct BBox {
    double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }
    double cx() const { return 0.5 * (x_min + x_max); }
    double cy() const { return 0.5 * (y_min + y_max); }

    bool valid() const { return x_min < x_max && y_min < y_max; }
    bool operator==(const BBox&) const = default;
};

struct ScoredBox {
    BBox box;
    double score = 0.0;
    int class_id = 0;  // 0 = background, 1 = WBC
};

// Anchor grid description: side lengths (scales) and width/height ratios;
// each feature cell carries k = |scales|*|ratios| anchors, centered on the
// cell's image-space center at `stride` pixels per cell.
struct AnchorSpec {
    std::vector<double> scales;
    std::vector<double> ratios;
    int stride = 16;

    int k() const { return static_cast<int>(scales.size() * ratios.size()); }
};

// (tx, ty, tw, th) in the center/log-size parameterization.
struct RegressionTarget {
    double tx = 0, ty = 0, tw = 0, th = 0;
};

double iou(const BBox& a, const BBox& b);

// Anchors for a feat_w x feat_h grid, ordered cell-major (y, then x), with
// the k anchors of a cell ordered scale-major then ratio. For scale s and
// ratio r the anchor is s*sqrt(r) wide and s/sqrt(r) tall (area s^2).
std::vector<BBox> generate_anchors(int feat_w, int feat_h, const AnchorSpec& spec);

RegressionTarget encode_box(const BBox& anchor, const BBox& gt);
BBox decode_box(const BBox& anchor, const RegressionTarget& t);

// Clamps to [0,img_w]x[0,img_h]; empty when the clamped box degenerates.
std::optional<BBox> clip_box(const BBox& b, int img_w, int img_h);

// Greedy NMS: repeatedly keep the best remaining box and drop everything
// with IoU > threshold against it. Ordering is score-descending with ties
// broken by ascending x_min then y_min, so output is deterministic.
std::vector<ScoredBox> nms(const std::vector<ScoredBox>& boxes, double iou_threshold,
                           int max_keep);

}  // namespace wbc
