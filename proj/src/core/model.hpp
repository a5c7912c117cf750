// Copyright (c) 2026 the wbcdetect authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/boxgeom.hpp"
#include "core/checkpoint.hpp"
#include "core/layers.hpp"
#include "core/rpn.hpp"
#include "core/tensor.hpp"

namespace wbc {

// Desk-scale detector dimensions. The backbone downsamples by 4 and emits
// FEAT_CHANNELS channels, so ROI pooling hands the classifier head a
// 32x32x3 patch.
inline constexpr int kFeatChannels = 3;
inline constexpr int kFeatStride = 4;
inline constexpr int kPooledSide = 32;
inline constexpr int kNumClasses = 2;  // background, WBC

// Shared convolutional feature extractor: three 3x3 conv layers
// (3->8->16->3 channels) with a 2x max-pool after each of the first two.
Sequential make_backbone(Rng& rng);

// Copies values/frozen flags between two structurally identical networks.
void copy_params(const Sequential& src_owner, std::vector<Parameter*> src,
                 std::vector<Parameter*> dst);

// RPN head: 3x3 conv trunk over the feature map, then 1x1 convs producing
// 2k objectness logits and 4k box deltas per cell.
class RpnHead {
public:
    RpnHead(int in_channels, int mid_channels, int k, Rng& rng);

    struct Output {
        Tensor logits;  // [2k, Hf, Wf]
        Tensor deltas;  // [4k, Hf, Wf]
        int feat_w = 0, feat_h = 0, k = 0;

        // anchor index ((y*W + x)*k + a), matching generate_anchors order
        std::vector<std::array<double, 2>> per_anchor_logits() const;
        std::vector<RegressionTarget> per_anchor_deltas() const;
        RpnOutput to_rpn_output() const;
    };

    Output forward(const Tensor& feature);
    // Gradients arrive per anchor; returns the feature-map gradient.
    Tensor backward(const std::vector<std::array<double, 2>>& d_logits,
                    const std::vector<std::array<double, 4>>& d_deltas);

    std::vector<Parameter*> params();
    int k() const { return k_; }

private:
    int k_;
    Sequential trunk_;   // conv3x3 + relu
    Conv2d cls_;
    Conv2d reg_;
    int feat_w_ = 0, feat_h_ = 0;
};

// Detector head: FC trunk over the pooled 3x32x32 patch, with a class
// softmax branch and a per-foreground-class box-delta branch.
class DetectorHead {
public:
    DetectorHead(int in_features, int hidden, int num_classes, Rng& rng);

    struct Output {
        std::vector<double> class_probs;           // size num_classes
        std::vector<RegressionTarget> deltas;      // one per foreground class
        std::vector<double> logits;
    };

    Output forward(const Tensor& roi_feature);
    // d_logits: gradient wrt class logits; d_deltas: per-fg-class deltas.
    Tensor backward(const std::vector<double>& d_logits,
                    const std::vector<RegressionTarget>& d_deltas);

    std::vector<Parameter*> params();
    int num_classes() const { return num_classes_; }

private:
    int num_classes_;
    Sequential trunk_;   // fc + relu
    FullyConnected cls_;
    FullyConnected reg_;
};

struct ModelConfig {
    AnchorSpec anchor_spec{{16.0, 24.0, 32.0}, {0.5, 1.0, 2.0}, kFeatStride};
    int rpn_mid_channels = 16;
    int head_hidden = 64;

    std::map<std::string, std::string> to_kv() const;
    static ModelConfig from_kv(const std::map<std::string, std::string>& kv);
};

// The full detector: shared backbone plus both heads, with deterministic
// seeded initialization and bit-exact checkpoint round-trips.
class DetectorModel {
public:
    DetectorModel(const ModelConfig& cfg, std::uint64_t seed);

    Checkpoint to_checkpoint(const std::string& stage) const;
    static DetectorModel from_checkpoint(const Checkpoint& ckpt);

    const ModelConfig& config() const { return cfg_; }
    Sequential& backbone() { return backbone_; }
    RpnHead& rpn_head() { return rpn_; }
    DetectorHead& det_head() { return head_; }

    std::vector<Parameter*> backbone_params() { return backbone_.params(); }
    std::vector<Parameter*> rpn_params() { return rpn_.params(); }
    std::vector<Parameter*> head_params() { return head_.params(); }
    std::vector<Parameter*> all_params();

private:
    ModelConfig cfg_;
    Sequential backbone_;
    RpnHead rpn_;
    DetectorHead head_;
};

}  // namespace wbc
