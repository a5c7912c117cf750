// Copyright (c) 2026 the wbcdetect authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "core/boxgeom.hpp"
#include "core/head.hpp"

namespace wbc {

// Per-image bookkeeping: TP + FN == |ground truth|, TP + FP == |detections|.
struct MatchResult {
    int tp = 0;
    int fp = 0;
    int fn = 0;
    struct Pair {
        int detection = 0;
        int ground_truth = 0;
        double iou = 0.0;
    };
    std::vector<Pair> matches;
};

// Greedy matching: detections in descending probability claim the unclaimed
// ground-truth box of highest IoU when that IoU reaches the threshold.
// Detection ties break by ascending x_min then y_min.
MatchResult match_detections(const std::vector<Detection>& detections,
                             const std::vector<BBox>& ground_truth, double iou_threshold);

struct MetricsReport {
    long long images = 0;
    long long fp = 0;
    long long fn = 0;
    long long gt = 0;
    double miss_rate = 0.0;   // fn / gt
    double accuracy = 0.0;    // (gt - fn - fp) / gt, floored at 0
    std::string miss_rate_pct;  // half-up, one decimal, e.g. "1.3%"
    std::string accuracy_pct;
};

MetricsReport compute_metrics(const std::vector<MatchResult>& results);

// half-up rounding to one decimal in percent
std::string format_percent(double fraction);

int count_cells(const std::vector<Detection>& detections);

}  // namespace wbc
