// Copyright (c) 2026 the wbcdetect authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "core/boxgeom.hpp"
#include "core/model.hpp"
#include "core/tensor.hpp"

namespace wbc {

struct Detection {
    BBox box;
    int class_id = 1;  // 1 = WBC
    double probability = 0.0;
};

// Max-pools a proposal region of the feature map into a fixed pooled x
// pooled grid. Bin edges follow an even coordinate partition of the scaled
// proposal, rounded outward so every bin covers at least one cell. The
// argmax table routes gradients back to the winning cells.
struct RoiPoolResult {
    Tensor feature;                   // [C, pooled, pooled]
    std::vector<std::size_t> argmax;  // flat feature-map offsets per bin
};

RoiPoolResult roi_pool(const Tensor& feature_map, const BBox& proposal, double spatial_scale,
                       int pooled);

// Scatters the pooled-grid gradient back onto a feature-map-shaped tensor.
void roi_pool_backward(const Tensor& grad_pooled, const std::vector<std::size_t>& argmax,
                       Tensor& grad_feature_map);

// Runs the detector head on one pooled patch.
DetectorHead::Output classify_rois(DetectorHead& head, const Tensor& roi_feature);

struct DetectSettings {
    ProposalConfig proposals;
    double score_threshold = 0.5;
    double final_nms_iou = 0.3;
};

// Full inference path: backbone -> RPN proposals -> per-proposal ROI pool
// and classification -> class-delta decode -> threshold -> per-class NMS.
std::vector<Detection> detect(const Tensor& image, DetectorModel& model,
                              const DetectSettings& settings);

}  // namespace wbc
