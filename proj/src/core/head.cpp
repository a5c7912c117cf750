// Copyright (c) 2026 the wbcdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "core/head.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace wbc {

RoiPoolResult roi_pool(const Tensor& feature_map, const BBox& proposal, double spatial_scale,
                       int pooled) {
    if (pooled < 1) throw std::invalid_argument("roi_pool: pooled side must be >= 1");
    const int c = feature_map.dim(0), hf = feature_map.dim(1), wf = feature_map.dim(2);

    const double x0 = proposal.x_min * spatial_scale;
    const double x1 = proposal.x_max * spatial_scale;
    const double y0 = proposal.y_min * spatial_scale;
    const double y1 = proposal.y_max * spatial_scale;
    if (x1 <= 0.0 || y1 <= 0.0 || x0 >= wf || y0 >= hf)
        throw std::invalid_argument("roi_pool: proposal lies entirely outside the feature map");

    RoiPoolResult out;
    out.feature = Tensor({c, pooled, pooled});
    out.argmax.assign(static_cast<std::size_t>(c) * pooled * pooled, 0);

    const double bw = (x1 - x0) / pooled;
    const double bh = (y1 - y0) / pooled;
    const double* fm = feature_map.data();
    for (int by = 0; by < pooled; ++by) {
        int cy0 = static_cast<int>(std::floor(y0 + by * bh));
        int cy1 = static_cast<int>(std::ceil(y0 + (by + 1) * bh));
        if (cy1 <= cy0) cy1 = cy0 + 1;
        cy0 = std::clamp(cy0, 0, hf - 1);
        cy1 = std::clamp(cy1, cy0 + 1, hf);
        for (int bx = 0; bx < pooled; ++bx) {
            int cx0 = static_cast<int>(std::floor(x0 + bx * bw));
            int cx1 = static_cast<int>(std::ceil(x0 + (bx + 1) * bw));
            if (cx1 <= cx0) cx1 = cx0 + 1;
            cx0 = std::clamp(cx0, 0, wf - 1);
            cx1 = std::clamp(cx1, cx0 + 1, wf);
            for (int ch = 0; ch < c; ++ch) {
                const double* plane = fm + static_cast<std::size_t>(ch) * hf * wf;
                double best = -std::numeric_limits<double>::infinity();
                std::size_t best_i = 0;
                for (int y = cy0; y < cy1; ++y)
                    for (int x = cx0; x < cx1; ++x) {
                        const std::size_t i = static_cast<std::size_t>(y) * wf + x;
                        if (plane[i] > best) {
                            best = plane[i];
                            best_i = i;
                        }
                    }
                const std::size_t oi = (static_cast<std::size_t>(ch) * pooled + by) * pooled + bx;
                out.feature[oi] = best;
                out.argmax[oi] = static_cast<std::size_t>(ch) * hf * wf + best_i;
            }
        }
    }
    return out;
}

void roi_pool_backward(const Tensor& grad_pooled, const std::vector<std::size_t>& argmax,
                       Tensor& grad_feature_map) {
    for (std::size_t i = 0; i < grad_pooled.size(); ++i)
        grad_feature_map[argmax[i]] += grad_pooled[i];
}

DetectorHead::Output classify_rois(DetectorHead& head, const Tensor& roi_feature) {
    return head.forward(roi_feature);
}

std::vector<Detection> detect(const Tensor& image, DetectorModel& model,
                              const DetectSettings& settings) {
    const int img_h = image.dim(1), img_w = image.dim(2);
    const Tensor feature = model.backbone().forward(image);
    const auto rpn_out = model.rpn_head().forward(feature);
    const auto anchors =
        generate_anchors(rpn_out.feat_w, rpn_out.feat_h, model.config().anchor_spec);
    const auto proposals =
        generate_proposals(rpn_out.to_rpn_output(), anchors, img_w, img_h, settings.proposals);

    const double scale = 1.0 / model.config().anchor_spec.stride;
    std::vector<ScoredBox> scored;
    for (const auto& proposal : proposals) {
        const auto pooled = roi_pool(feature, proposal.box, scale, kPooledSide);
        const auto head_out = model.det_head().forward(pooled.feature);
        const double p_wbc = head_out.class_probs[1];
        if (p_wbc < 0.5) continue;  // background by argmax
        if (p_wbc < settings.score_threshold) continue;
        const auto box = clip_box(decode_box(proposal.box, head_out.deltas[0]), img_w, img_h);
        if (!box) continue;
        scored.push_back({*box, p_wbc, 1});
    }

    const auto kept = nms(scored, settings.final_nms_iou,
                          static_cast<int>(scored.size()));
    std::vector<Detection> detections;
    detections.reserve(kept.size());
    for (const auto& sb : kept) detections.push_back({sb.box, sb.class_id, sb.score});
    return detections;
}

}  // namespace wbc
