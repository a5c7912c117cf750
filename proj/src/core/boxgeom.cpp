// Copyright (c) 2026 the wbcdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "core/boxgeom.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace wbc {

double iou(const BBox& a, const BBox& b) {
    const double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    const double inter = ix * iy;
    return inter / (a.area() + b.area() - inter);
}

std::vector<BBox> generate_anchors(int feat_w, int feat_h, const AnchorSpec& spec) {
    if (feat_w < 1 || feat_h < 1)
        throw std::invalid_argument("generate_anchors: grid dimensions must be >= 1");
    if (spec.scales.empty() || spec.ratios.empty())
        throw std::invalid_argument("generate_anchors: scales and ratios must be non-empty");

    std::vector<BBox> anchors;
    anchors.reserve(static_cast<std::size_t>(feat_w) * feat_h * spec.k());
    for (int iy = 0; iy < feat_h; ++iy) {
        const double cy = (iy + 0.5) * spec.stride;
        for (int ix = 0; ix < feat_w; ++ix) {
            const double cx = (ix + 0.5) * spec.stride;
            for (double s : spec.scales) {
                for (double r : spec.ratios) {
                    const double half_w = 0.5 * s * std::sqrt(r);
                    const double half_h = 0.5 * s / std::sqrt(r);
                    anchors.push_back({cx - half_w, cy - half_h, cx + half_w, cy + half_h});
                }
            }
        }
    }
    return anchors;
}

RegressionTarget encode_box(const BBox& anchor, const BBox& gt) {
    return {(gt.cx() - anchor.cx()) / anchor.width(),
            (gt.cy() - anchor.cy()) / anchor.height(),
            std::log(gt.width() / anchor.width()),
            std::log(gt.height() / anchor.height())};
}

BBox decode_box(const BBox& anchor, const RegressionTarget& t) {
    const double cx = anchor.cx() + t.tx * anchor.width();
    const double cy = anchor.cy() + t.ty * anchor.height();
    const double half_w = 0.5 * std::exp(t.tw) * anchor.width();
    const double half_h = 0.5 * std::exp(t.th) * anchor.height();
    return {cx - half_w, cy - half_h, cx + half_w, cy + half_h};
}

std::optional<BBox> clip_box(const BBox& b, int img_w, int img_h) {
    BBox c{std::clamp(b.x_min, 0.0, static_cast<double>(img_w)),
           std::clamp(b.y_min, 0.0, static_cast<double>(img_h)),
           std::clamp(b.x_max, 0.0, static_cast<double>(img_w)),
           std::clamp(b.y_max, 0.0, static_cast<double>(img_h))};
    if (!c.valid()) return std::nullopt;
    return c;
}

std::vector<ScoredBox> nms(const std::vector<ScoredBox>& boxes, double iou_threshold,
                           int max_keep) {
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0))
        throw std::invalid_argument("nms: iou_threshold must lie in (0,1]");
    if (max_keep < 0) throw std::invalid_argument("nms: max_keep must be >= 0");

    std::vector<std::size_t> order(boxes.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (boxes[a].score != boxes[b].score) return boxes[a].score > boxes[b].score;
        if (boxes[a].box.x_min != boxes[b].box.x_min) return boxes[a].box.x_min < boxes[b].box.x_min;
        if (boxes[a].box.y_min != boxes[b].box.y_min) return boxes[a].box.y_min < boxes[b].box.y_min;
        return a < b;
    });

    std::vector<ScoredBox> kept;
    std::vector<bool> suppressed(boxes.size(), false);
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
        if (static_cast<int>(kept.size()) >= max_keep) break;
        const std::size_t i = order[oi];
        if (suppressed[i]) continue;
        kept.push_back(boxes[i]);
        for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
            const std::size_t j = order[oj];
            if (!suppressed[j] && iou(boxes[i].box, boxes[j].box) > iou_threshold)
                suppressed[j] = true;
        }
    }
    return kept;
}

}  // namespace wbc
