// Copyright (c) 2026 the wbcdetect authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "core/boxgeom.hpp"

namespace wbc {

// Per-anchor training label. Positive anchors carry the index of the
// ground-truth box they are matched to (their IoU argmax).
struct AnchorLabel {
    enum class State { positive, negative, ignored };
    State state = State::negative;
    std::optional<int> matched_gt;
};

// Objectness is the per-anchor (background, object) probability pair,
// deltas the per-anchor regression output.
struct RpnOutput {
    std::vector<std::array<double, 2>> objectness;
    std::vector<RegressionTarget> deltas;
};

struct LossConfig {
    double lambda = 10.0;
    int n_cls = 256;
    int n_reg = 256;
};

struct ProposalConfig {
    int pre_nms_top = 6000;
    int post_nms_top = 300;
    double nms_iou = 0.7;
    double min_size = 4.0;
};

struct RpnLossTerms {
    double total = 0.0;
    double cls_term = 0.0;
    double reg_term = 0.0;
};

// Labeling rules: an anchor is positive when it holds the highest IoU with
// some ground-truth box (ties included) or overlaps any box above pos_iou;
// negative when its best IoU falls below neg_iou and no rule made it
// positive; everything in between is ignored and excluded from the loss.
std::vector<AnchorLabel> label_anchors(const std::vector<BBox>& anchors,
                                       const std::vector<BBox>& gt, double pos_iou = 0.7,
                                       double neg_iou = 0.3);

// Up to size*pos_fraction positives, the rest filled with negatives, drawn
// without replacement using the given seed. Throws when no negatives exist.
std::vector<int> sample_minibatch(const std::vector<AnchorLabel>& labels, int size,
                                  double pos_fraction, std::uint64_t seed);

// Regression targets for positive anchors (encode of their matched box).
std::vector<std::optional<RegressionTarget>> make_rpn_targets(
    const std::vector<BBox>& anchors, const std::vector<BBox>& gt,
    const std::vector<AnchorLabel>& labels);

// total = cls/N_cls + lambda * reg/N_reg, with 2-class cross-entropy for
// cls and smooth-L1 over the four delta coordinates for reg; the regression
// sum runs only over positive anchors.
RpnLossTerms rpn_loss(const RpnOutput& output, const std::vector<AnchorLabel>& labels,
                      const std::vector<std::optional<RegressionTarget>>& targets,
                      const LossConfig& cfg, const std::vector<int>& batch);

// Same loss evaluated from raw logits, returning gradients with respect to
// the per-anchor logits and deltas. Anchors outside the batch get zero
// gradient; negative anchors get zero delta gradient.
struct RpnLossGrad {
    RpnLossTerms terms;
    std::vector<std::array<double, 2>> d_logits;
    std::vector<std::array<double, 4>> d_deltas;
};

RpnLossGrad rpn_loss_from_logits(const std::vector<std::array<double, 2>>& logits,
                                 const std::vector<RegressionTarget>& deltas,
                                 const std::vector<AnchorLabel>& labels,
                                 const std::vector<std::optional<RegressionTarget>>& targets,
                                 const LossConfig& cfg, const std::vector<int>& batch);

// Decode every anchor's delta, clip to the image, drop boxes under
// min_size, keep the pre_nms_top best by objectness, run NMS and truncate
// to post_nms_top.
std::vector<ScoredBox> generate_proposals(const RpnOutput& output,
                                          const std::vector<BBox>& anchors, int img_w,
                                          int img_h, const ProposalConfig& cfg);

}  // namespace wbc
