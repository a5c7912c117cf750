// Copyright (c) 2026 the wbcdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "core/model.hpp"

#include <sstream>
#include <stdexcept>

namespace wbc {

Sequential make_backbone(Rng& rng) {
    Sequential net;
    net.emplace<Conv2d>(3, 8, 3, 1, 1, "backbone.conv1").init_xavier(rng);
    net.emplace<Relu>();
    net.emplace<MaxPool2d>(2, 2);
    net.emplace<Conv2d>(8, 16, 3, 1, 1, "backbone.conv2").init_xavier(rng);
    net.emplace<Relu>();
    net.emplace<MaxPool2d>(2, 2);
    net.emplace<Conv2d>(16, kFeatChannels, 3, 1, 1, "backbone.conv3").init_xavier(rng);
    net.emplace<Relu>();
    return net;
}

void copy_params(const Sequential&, std::vector<Parameter*> src, std::vector<Parameter*> dst) {
    if (src.size() != dst.size())
        throw std::invalid_argument("copy_params: parameter lists differ in size");
    for (std::size_t i = 0; i < src.size(); ++i) {
        if (!src[i]->value.same_shape(dst[i]->value))
            throw std::invalid_argument("copy_params: shape mismatch at " + src[i]->name);
        dst[i]->value = src[i]->value;
        dst[i]->frozen = src[i]->frozen;
    }
}

// ---------------------------------------------------------------------------
// RpnHead

RpnHead::RpnHead(int in_channels, int mid_channels, int k, Rng& rng)
    : k_(k),
      cls_(mid_channels, 2 * k, 1, 1, 0, "rpn.cls"),
      reg_(mid_channels, 4 * k, 1, 1, 0, "rpn.reg") {
    trunk_.emplace<Conv2d>(in_channels, mid_channels, 3, 1, 1, "rpn.trunk").init_xavier(rng);
    trunk_.emplace<Relu>();
    cls_.init_xavier(rng);
    reg_.init_xavier(rng);
}

RpnHead::Output RpnHead::forward(const Tensor& feature) {
    const Tensor t = trunk_.forward(feature);
    Output out;
    out.logits = cls_.forward(t);
    out.deltas = reg_.forward(t);
    out.feat_h = feature.dim(1);
    out.feat_w = feature.dim(2);
    out.k = k_;
    feat_h_ = out.feat_h;
    feat_w_ = out.feat_w;
    return out;
}

std::vector<std::array<double, 2>> RpnHead::Output::per_anchor_logits() const {
    std::vector<std::array<double, 2>> out(static_cast<std::size_t>(feat_w) * feat_h * k);
    for (int y = 0; y < feat_h; ++y)
        for (int x = 0; x < feat_w; ++x)
            for (int a = 0; a < k; ++a) {
                const std::size_t i = (static_cast<std::size_t>(y) * feat_w + x) * k + a;
                out[i] = {logits.at(2 * a, y, x), logits.at(2 * a + 1, y, x)};
            }
    return out;
}

std::vector<RegressionTarget> RpnHead::Output::per_anchor_deltas() const {
    std::vector<RegressionTarget> out(static_cast<std::size_t>(feat_w) * feat_h * k);
    for (int y = 0; y < feat_h; ++y)
        for (int x = 0; x < feat_w; ++x)
            for (int a = 0; a < k; ++a) {
                const std::size_t i = (static_cast<std::size_t>(y) * feat_w + x) * k + a;
                out[i] = {deltas.at(4 * a, y, x), deltas.at(4 * a + 1, y, x),
                          deltas.at(4 * a + 2, y, x), deltas.at(4 * a + 3, y, x)};
            }
    return out;
}

RpnOutput RpnHead::Output::to_rpn_output() const {
    RpnOutput out;
    out.deltas = per_anchor_deltas();
    const auto logit_pairs = per_anchor_logits();
    out.objectness.resize(logit_pairs.size());
    for (std::size_t i = 0; i < logit_pairs.size(); ++i) {
        const auto p = softmax_stable({logit_pairs[i][0], logit_pairs[i][1]});
        out.objectness[i] = {p[0], p[1]};
    }
    return out;
}

Tensor RpnHead::backward(const std::vector<std::array<double, 2>>& d_logits,
                         const std::vector<std::array<double, 4>>& d_deltas) {
    Tensor g_logits({2 * k_, feat_h_, feat_w_});
    Tensor g_deltas({4 * k_, feat_h_, feat_w_});
    for (int y = 0; y < feat_h_; ++y)
        for (int x = 0; x < feat_w_; ++x)
            for (int a = 0; a < k_; ++a) {
                const std::size_t i = (static_cast<std::size_t>(y) * feat_w_ + x) * k_ + a;
                g_logits.at(2 * a, y, x) = d_logits[i][0];
                g_logits.at(2 * a + 1, y, x) = d_logits[i][1];
                for (int c = 0; c < 4; ++c) g_deltas.at(4 * a + c, y, x) = d_deltas[i][c];
            }
    Tensor d_trunk = cls_.backward(g_logits);
    const Tensor d_trunk_reg = reg_.backward(g_deltas);
    for (std::size_t i = 0; i < d_trunk.size(); ++i) d_trunk[i] += d_trunk_reg[i];
    return trunk_.backward(d_trunk);
}

std::vector<Parameter*> RpnHead::params() {
    std::vector<Parameter*> out = trunk_.params();
    for (Parameter* p : cls_.params()) out.push_back(p);
    for (Parameter* p : reg_.params()) out.push_back(p);
    return out;
}

// ---------------------------------------------------------------------------
// DetectorHead

DetectorHead::DetectorHead(int in_features, int hidden, int num_classes, Rng& rng)
    : num_classes_(num_classes),
      cls_(hidden, num_classes, "head.cls"),
      reg_(hidden, 4 * (num_classes - 1), "head.reg") {
    trunk_.emplace<FullyConnected>(in_features, hidden, "head.fc1").init_xavier(rng);
    trunk_.emplace<Relu>();
    cls_.init_xavier(rng);
    reg_.init_xavier(rng);
}

DetectorHead::Output DetectorHead::forward(const Tensor& roi_feature) {
    const Tensor t = trunk_.forward(roi_feature);
    const Tensor logits = cls_.forward(t);
    const Tensor deltas = reg_.forward(t);

    Output out;
    out.logits = logits.values();
    out.class_probs = softmax_stable(out.logits);
    out.deltas.resize(static_cast<std::size_t>(num_classes_ - 1));
    for (int c = 0; c + 1 < num_classes_; ++c)
        out.deltas[static_cast<std::size_t>(c)] = {deltas[4 * c + 0], deltas[4 * c + 1],
                                                   deltas[4 * c + 2], deltas[4 * c + 3]};
    return out;
}

Tensor DetectorHead::backward(const std::vector<double>& d_logits,
                              const std::vector<RegressionTarget>& d_deltas) {
    Tensor g_logits({num_classes_}, d_logits);
    Tensor g_deltas({4 * (num_classes_ - 1)});
    for (int c = 0; c + 1 < num_classes_; ++c) {
        g_deltas[4 * c + 0] = d_deltas[static_cast<std::size_t>(c)].tx;
        g_deltas[4 * c + 1] = d_deltas[static_cast<std::size_t>(c)].ty;
        g_deltas[4 * c + 2] = d_deltas[static_cast<std::size_t>(c)].tw;
        g_deltas[4 * c + 3] = d_deltas[static_cast<std::size_t>(c)].th;
    }
    Tensor d_trunk = cls_.backward(g_logits);
    const Tensor d_trunk_reg = reg_.backward(g_deltas);
    for (std::size_t i = 0; i < d_trunk.size(); ++i) d_trunk[i] += d_trunk_reg[i];
    return trunk_.backward(d_trunk);
}

std::vector<Parameter*> DetectorHead::params() {
    std::vector<Parameter*> out = trunk_.params();
    for (Parameter* p : cls_.params()) out.push_back(p);
    for (Parameter* p : reg_.params()) out.push_back(p);
    return out;
}

// ---------------------------------------------------------------------------
// ModelConfig

namespace {

std::string join_doubles(const std::vector<double>& v) {
    std::ostringstream out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out << ",";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
        out << buf;
    }
    return out.str();
}

std::vector<double> split_doubles(const std::string& s) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        out.push_back(std::stod(s.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    return out;
}

}  // namespace

std::map<std::string, std::string> ModelConfig::to_kv() const {
    return {{"arch", "wbc-desk-1"},
            {"anchors.scales", join_doubles(anchor_spec.scales)},
            {"anchors.ratios", join_doubles(anchor_spec.ratios)},
            {"anchors.stride", std::to_string(anchor_spec.stride)},
            {"rpn.mid_channels", std::to_string(rpn_mid_channels)},
            {"head.hidden", std::to_string(head_hidden)}};
}

ModelConfig ModelConfig::from_kv(const std::map<std::string, std::string>& kv) {
    const auto get = [&](const std::string& key) {
        const auto it = kv.find(key);
        if (it == kv.end())
            throw std::runtime_error("checkpoint: missing config key " + key);
        return it->second;
    };
    if (get("arch") != "wbc-desk-1")
        throw std::runtime_error("checkpoint: incompatible architecture " + get("arch"));
    ModelConfig cfg;
    cfg.anchor_spec.scales = split_doubles(get("anchors.scales"));
    cfg.anchor_spec.ratios = split_doubles(get("anchors.ratios"));
    cfg.anchor_spec.stride = std::stoi(get("anchors.stride"));
    cfg.rpn_mid_channels = std::stoi(get("rpn.mid_channels"));
    cfg.head_hidden = std::stoi(get("head.hidden"));
    return cfg;
}

// ---------------------------------------------------------------------------
// DetectorModel

DetectorModel::DetectorModel(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      backbone_([&] {
          Rng rng(Rng::mix(seed, 1));
          return make_backbone(rng);
      }()),
      rpn_([&] {
          Rng rng(Rng::mix(seed, 2));
          return RpnHead(kFeatChannels, cfg.rpn_mid_channels, cfg.anchor_spec.k(), rng);
      }()),
      head_([&] {
          Rng rng(Rng::mix(seed, 3));
          return DetectorHead(kFeatChannels * kPooledSide * kPooledSide, cfg.head_hidden,
                              kNumClasses, rng);
      }()) {}

std::vector<Parameter*> DetectorModel::all_params() {
    std::vector<Parameter*> out = backbone_.params();
    for (Parameter* p : rpn_.params()) out.push_back(p);
    for (Parameter* p : head_.params()) out.push_back(p);
    return out;
}

Checkpoint DetectorModel::to_checkpoint(const std::string& stage) const {
    Checkpoint ckpt;
    ckpt.stage = stage;
    ckpt.config = cfg_.to_kv();
    auto& self = const_cast<DetectorModel&>(*this);
    for (const Parameter* p : self.all_params()) ckpt.params.push_back(*p);
    return ckpt;
}

DetectorModel DetectorModel::from_checkpoint(const Checkpoint& ckpt) {
    DetectorModel model(ModelConfig::from_kv(ckpt.config), 0);
    for (Parameter* p : model.all_params()) {
        const Parameter* src = ckpt.find(p->name);
        if (!src) throw std::runtime_error("checkpoint: missing parameter " + p->name);
        if (!src->value.same_shape(p->value))
            throw std::runtime_error("checkpoint: shape mismatch for " + p->name + " (" +
                                     src->value.shape_str() + " vs " + p->value.shape_str() + ")");
        p->value = src->value;
        p->frozen = src->frozen;
    }
    return model;
}

}  // namespace wbc
