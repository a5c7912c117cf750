// Copyright (c) 2026 the wbcdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "core/rpn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "core/layers.hpp"
#include "core/rng.hpp"

namespace wbc {

std::vector<AnchorLabel> label_anchors(const std::vector<BBox>& anchors,
                                       const std::vector<BBox>& gt, double pos_iou,
                                       double neg_iou) {
    if (pos_iou <= neg_iou)
        throw std::invalid_argument("label_anchors: pos_iou must exceed neg_iou");

    std::vector<AnchorLabel> labels(anchors.size());
    if (gt.empty()) return labels;  // all negative

    const std::size_t na = anchors.size(), ng = gt.size();
    std::vector<double> best_iou(na, 0.0);
    std::vector<int> best_gt(na, -1);
    std::vector<double> gt_best(ng, 0.0);

    std::vector<double> ious(na * ng);
    for (std::size_t i = 0; i < na; ++i) {
        for (std::size_t j = 0; j < ng; ++j) {
            const double v = iou(anchors[i], gt[j]);
            ious[i * ng + j] = v;
            if (v > best_iou[i]) {
                best_iou[i] = v;
                best_gt[i] = static_cast<int>(j);
            }
            if (v > gt_best[j]) gt_best[j] = v;
        }
    }

    for (std::size_t i = 0; i < na; ++i) {
        bool positive = best_iou[i] > pos_iou;
        if (!positive) {
            // highest-IoU rule, ties all positive; skipped when a box
            // overlaps nothing at all
            for (std::size_t j = 0; j < ng && !positive; ++j)
                positive = gt_best[j] > 0.0 && ious[i * ng + j] == gt_best[j];
        }
        if (positive) {
            labels[i].state = AnchorLabel::State::positive;
            labels[i].matched_gt = best_gt[i];
        } else if (best_iou[i] < neg_iou) {
            labels[i].state = AnchorLabel::State::negative;
        } else {
            labels[i].state = AnchorLabel::State::ignored;
        }
    }
    return labels;
}

std::vector<int> sample_minibatch(const std::vector<AnchorLabel>& labels, int size,
                                  double pos_fraction, std::uint64_t seed) {
    if (size < 1) throw std::invalid_argument("sample_minibatch: size must be >= 1");
    if (!(pos_fraction > 0.0 && pos_fraction < 1.0))
        throw std::invalid_argument("sample_minibatch: pos_fraction must lie in (0,1)");

    std::vector<int> positives, negatives;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i].state == AnchorLabel::State::positive)
            positives.push_back(static_cast<int>(i));
        else if (labels[i].state == AnchorLabel::State::negative)
            negatives.push_back(static_cast<int>(i));
    }
    if (negatives.empty())
        throw std::runtime_error("sample_minibatch: no negative anchors available");

    Rng rng(seed);
    rng.shuffle(positives);
    rng.shuffle(negatives);

    const int want_pos = static_cast<int>(std::floor(size * pos_fraction));
    const int n_pos = std::min<int>(want_pos, static_cast<int>(positives.size()));
    const int n_neg = std::min<int>(size - n_pos, static_cast<int>(negatives.size()));

    std::vector<int> batch(positives.begin(), positives.begin() + n_pos);
    batch.insert(batch.end(), negatives.begin(), negatives.begin() + n_neg);
    return batch;
}

std::vector<std::optional<RegressionTarget>> make_rpn_targets(
    const std::vector<BBox>& anchors, const std::vector<BBox>& gt,
    const std::vector<AnchorLabel>& labels) {
    std::vector<std::optional<RegressionTarget>> targets(anchors.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i].state == AnchorLabel::State::positive)
            targets[i] = encode_box(anchors[i], gt[static_cast<std::size_t>(*labels[i].matched_gt)]);
    return targets;
}

namespace {

double reg_loss_4(const RegressionTarget& t, const RegressionTarget& star) {
    return smooth_l1(t.tx - star.tx) + smooth_l1(t.ty - star.ty) + smooth_l1(t.tw - star.tw) +
           smooth_l1(t.th - star.th);
}

}  // namespace

RpnLossTerms rpn_loss(const RpnOutput& output, const std::vector<AnchorLabel>& labels,
                      const std::vector<std::optional<RegressionTarget>>& targets,
                      const LossConfig& cfg, const std::vector<int>& batch) {
    RpnLossTerms terms;
    for (int idx : batch) {
        const auto i = static_cast<std::size_t>(idx);
        if (i >= labels.size()) throw std::invalid_argument("rpn_loss: batch index out of range");
        if (labels[i].state == AnchorLabel::State::ignored) continue;
        const bool pos = labels[i].state == AnchorLabel::State::positive;
        terms.cls_term += -std::log(std::max(output.objectness[i][pos ? 1 : 0], 1e-300));
        if (pos) {
            if (!targets[i])
                throw std::invalid_argument("rpn_loss: positive anchor without regression target");
            terms.reg_term += reg_loss_4(output.deltas[i], *targets[i]);
        }
    }
    terms.cls_term /= cfg.n_cls;
    terms.reg_term *= cfg.lambda / cfg.n_reg;
    terms.total = terms.cls_term + terms.reg_term;
    return terms;
}

RpnLossGrad rpn_loss_from_logits(const std::vector<std::array<double, 2>>& logits,
                                 const std::vector<RegressionTarget>& deltas,
                                 const std::vector<AnchorLabel>& labels,
                                 const std::vector<std::optional<RegressionTarget>>& targets,
                                 const LossConfig& cfg, const std::vector<int>& batch) {
    RpnLossGrad out;
    out.d_logits.assign(logits.size(), {0.0, 0.0});
    out.d_deltas.assign(deltas.size(), {0.0, 0.0, 0.0, 0.0});

    for (int idx : batch) {
        const auto i = static_cast<std::size_t>(idx);
        if (labels[i].state == AnchorLabel::State::ignored) continue;
        const bool pos = labels[i].state == AnchorLabel::State::positive;
        const int y = pos ? 1 : 0;

        std::vector<double> grad;
        out.terms.cls_term +=
            softmax_cross_entropy({logits[i][0], logits[i][1]}, y, &grad);
        out.d_logits[i][0] += grad[0] / cfg.n_cls;
        out.d_logits[i][1] += grad[1] / cfg.n_cls;

        if (pos) {
            if (!targets[i])
                throw std::invalid_argument("rpn_loss: positive anchor without regression target");
            const RegressionTarget& star = *targets[i];
            const double w = cfg.lambda / cfg.n_reg;
            out.terms.reg_term += reg_loss_4(deltas[i], star);
            out.d_deltas[i][0] += w * smooth_l1_grad(deltas[i].tx - star.tx);
            out.d_deltas[i][1] += w * smooth_l1_grad(deltas[i].ty - star.ty);
            out.d_deltas[i][2] += w * smooth_l1_grad(deltas[i].tw - star.tw);
            out.d_deltas[i][3] += w * smooth_l1_grad(deltas[i].th - star.th);
        }
    }
    out.terms.cls_term /= cfg.n_cls;
    out.terms.reg_term *= cfg.lambda / cfg.n_reg;
    out.terms.total = out.terms.cls_term + out.terms.reg_term;
    return out;
}

std::vector<ScoredBox> generate_proposals(const RpnOutput& output,
                                          const std::vector<BBox>& anchors, int img_w,
                                          int img_h, const ProposalConfig& cfg) {
    if (output.objectness.size() != anchors.size() || output.deltas.size() != anchors.size())
        throw std::invalid_argument("generate_proposals: one output entry per anchor required");
    if (cfg.post_nms_top > cfg.pre_nms_top)
        throw std::invalid_argument("generate_proposals: post_nms_top exceeds pre_nms_top");

    std::vector<ScoredBox> candidates;
    candidates.reserve(anchors.size());
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        const auto clipped = clip_box(decode_box(anchors[i], output.deltas[i]), img_w, img_h);
        if (!clipped) continue;
        if (clipped->width() < cfg.min_size || clipped->height() < cfg.min_size) continue;
        candidates.push_back({*clipped, output.objectness[i][1], 1});
    }

    const auto by_score = [](const ScoredBox& a, const ScoredBox& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.box.x_min != b.box.x_min) return a.box.x_min < b.box.x_min;
        if (a.box.y_min != b.box.y_min) return a.box.y_min < b.box.y_min;
        if (a.box.x_max != b.box.x_max) return a.box.x_max < b.box.x_max;
        return a.box.y_max < b.box.y_max;
    };
    if (static_cast<int>(candidates.size()) > cfg.pre_nms_top) {
        std::nth_element(candidates.begin(), candidates.begin() + cfg.pre_nms_top,
                         candidates.end(), by_score);
        candidates.resize(static_cast<std::size_t>(cfg.pre_nms_top));
    }
    std::sort(candidates.begin(), candidates.end(), by_score);

    return nms(candidates, cfg.nms_iou, cfg.post_nms_top);
}

}  // namespace wbc
