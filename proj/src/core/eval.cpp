// Copyright (c) 2026 the wbcdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "core/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace wbc {

MatchResult match_detections(const std::vector<Detection>& detections,
                             const std::vector<BBox>& ground_truth, double iou_threshold) {
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0))
        throw std::invalid_argument("match_detections: iou_threshold must lie in (0,1]");

    std::vector<std::size_t> order(detections.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const Detection& da = detections[a];
        const Detection& db = detections[b];
        if (da.probability != db.probability) return da.probability > db.probability;
        if (da.box.x_min != db.box.x_min) return da.box.x_min < db.box.x_min;
        if (da.box.y_min != db.box.y_min) return da.box.y_min < db.box.y_min;
        return a < b;
    });

    MatchResult result;
    std::vector<bool> claimed(ground_truth.size(), false);
    for (std::size_t det : order) {
        double best = 0.0;
        int best_gt = -1;
        for (std::size_t g = 0; g < ground_truth.size(); ++g) {
            if (claimed[g]) continue;
            const double v = iou(detections[det].box, ground_truth[g]);
            if (v > best) {
                best = v;
                best_gt = static_cast<int>(g);
            }
        }
        if (best_gt >= 0 && best >= iou_threshold) {
            claimed[static_cast<std::size_t>(best_gt)] = true;
            ++result.tp;
            result.matches.push_back({static_cast<int>(det), best_gt, best});
        } else {
            ++result.fp;
        }
    }
    result.fn = static_cast<int>(ground_truth.size()) - result.tp;
    return result;
}

std::string format_percent(double fraction) {
    const double tenths = std::floor(fraction * 1000.0 + 0.5);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f%%", tenths / 10.0);
    return buf;
}

MetricsReport compute_metrics(const std::vector<MatchResult>& results) {
    MetricsReport report;
    report.images = static_cast<long long>(results.size());
    for (const auto& r : results) {
        report.fp += r.fp;
        report.fn += r.fn;
        report.gt += r.tp + r.fn;
    }
    if (report.gt == 0)
        throw std::invalid_argument("compute_metrics: no ground-truth boxes; metrics undefined");

    report.miss_rate = static_cast<double>(report.fn) / static_cast<double>(report.gt);
    report.accuracy =
        std::max(0.0, static_cast<double>(report.gt - report.fn - report.fp) /
                          static_cast<double>(report.gt));
    report.miss_rate_pct = format_percent(report.miss_rate);
    report.accuracy_pct = format_percent(report.accuracy);
    return report;
}

int count_cells(const std::vector<Detection>& detections) {
    int n = 0;
    for (const auto& d : detections)
        if (d.class_id == 1) ++n;
    return n;
}

}  // namespace wbc
