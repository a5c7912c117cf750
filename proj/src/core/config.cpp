// Copyright (c) 2026 the wbcdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "core/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace wbc {

namespace {

const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> kDefaults = {
        {"synth.image_size", "128"},
        {"synth.cells_min", "1"},
        {"synth.cells_max", "3"},
        {"synth.radius_min", "6"},
        {"synth.radius_max", "14"},
        {"synth.noise", "0.02"},
        {"train.lr_rpn", "1e-4"},
        {"train.lr_cnn", "1e-5"},
        {"train.lr_head", "1e-2"},
        {"train.lr_pretrain", "5e-2"},
        {"train.max_epochs", "15"},
        {"train.minibatch", "256"},
        {"train.pos_fraction", "0.5"},
        {"train.pos_iou", "0.7"},
        {"train.neg_iou", "0.3"},
        {"train.roi_batch", "32"},
        {"train.roi_fg_fraction", "0.25"},
        {"train.roi_fg_iou", "0.5"},
        {"loss.lambda", "10"},
        {"loss.n_cls", "0"},
        {"loss.n_reg", "0"},
        {"anchors.scales", "16,24,32"},
        {"anchors.ratios", "0.5,1,2"},
        {"anchors.stride", "4"},
        {"proposals.pre_nms_top", "6000"},
        {"proposals.post_nms_top", "300"},
        {"proposals.nms_iou", "0.7"},
        {"proposals.min_size", "4"},
        {"detect.score_threshold", "0.5"},
        {"detect.final_nms_iou", "0.3"},
        {"eval.match_iou", "0.5"},
    };
    return kDefaults;
}

double to_double(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0')
        throw std::invalid_argument("config: " + key + " expects a number, got '" + value + "'");
    return v;
}

int to_int(const std::string& key, const std::string& value) {
    const double v = to_double(key, value);
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v)
        throw std::invalid_argument("config: " + key + " expects an integer, got '" + value + "'");
    return i;
}

std::vector<double> to_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= value.size()) {
        std::size_t comma = value.find(',', pos);
        if (comma == std::string::npos) comma = value.size();
        out.push_back(to_double(key, value.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    if (out.empty()) throw std::invalid_argument("config: " + key + " expects a list");
    return out;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig::RunConfig() : values_(defaults()) {}

void RunConfig::validate(const std::string& key, const std::string& value) const {
    if (defaults().find(key) == defaults().end())
        throw std::invalid_argument("config: unknown key '" + key + "'");
    // type check by parsing through the matching reader
    if (key == "anchors.scales" || key == "anchors.ratios") {
        to_list(key, value);
    } else {
        to_double(key, value);
    }
}

void RunConfig::set(const std::string& key, const std::string& value) {
    validate(key, value);
    values_[key] = value;
}

std::string RunConfig::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw std::invalid_argument("config: unknown key '" + key + "'");
    return it->second;
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) != 0; }

void RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: " + path + " line " + std::to_string(line_no) +
                                     ": expected 'key = value'");
        try {
            set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error("config: " + path + " line " + std::to_string(line_no) +
                                     ": " + e.what());
        }
    }
}

SyntheticConfig RunConfig::synthetic(std::uint64_t seed) const {
    SyntheticConfig cfg;
    cfg.image_size = to_int("synth.image_size", get("synth.image_size"));
    cfg.cells_min = to_int("synth.cells_min", get("synth.cells_min"));
    cfg.cells_max = to_int("synth.cells_max", get("synth.cells_max"));
    cfg.radius_min = to_double("synth.radius_min", get("synth.radius_min"));
    cfg.radius_max = to_double("synth.radius_max", get("synth.radius_max"));
    cfg.noise = to_double("synth.noise", get("synth.noise"));
    cfg.seed = seed;
    return cfg;
}

TrainingConfig RunConfig::training(std::uint64_t seed) const {
    TrainingConfig cfg;
    cfg.lr_rpn = to_double("train.lr_rpn", get("train.lr_rpn"));
    cfg.lr_cnn = to_double("train.lr_cnn", get("train.lr_cnn"));
    cfg.lr_head = to_double("train.lr_head", get("train.lr_head"));
    cfg.lr_pretrain = to_double("train.lr_pretrain", get("train.lr_pretrain"));
    cfg.max_epochs = to_int("train.max_epochs", get("train.max_epochs"));
    cfg.minibatch = to_int("train.minibatch", get("train.minibatch"));
    cfg.pos_fraction = to_double("train.pos_fraction", get("train.pos_fraction"));
    cfg.pos_iou = to_double("train.pos_iou", get("train.pos_iou"));
    cfg.neg_iou = to_double("train.neg_iou", get("train.neg_iou"));
    cfg.roi_batch = to_int("train.roi_batch", get("train.roi_batch"));
    cfg.roi_fg_fraction = to_double("train.roi_fg_fraction", get("train.roi_fg_fraction"));
    cfg.roi_fg_iou = to_double("train.roi_fg_iou", get("train.roi_fg_iou"));
    cfg.loss.lambda = to_double("loss.lambda", get("loss.lambda"));
    cfg.loss.n_cls = to_int("loss.n_cls", get("loss.n_cls"));
    cfg.loss.n_reg = to_int("loss.n_reg", get("loss.n_reg"));
    cfg.model.anchor_spec.scales = to_list("anchors.scales", get("anchors.scales"));
    cfg.model.anchor_spec.ratios = to_list("anchors.ratios", get("anchors.ratios"));
    cfg.model.anchor_spec.stride = to_int("anchors.stride", get("anchors.stride"));
    cfg.proposals.pre_nms_top = to_int("proposals.pre_nms_top", get("proposals.pre_nms_top"));
    cfg.proposals.post_nms_top = to_int("proposals.post_nms_top", get("proposals.post_nms_top"));
    cfg.proposals.nms_iou = to_double("proposals.nms_iou", get("proposals.nms_iou"));
    cfg.proposals.min_size = to_double("proposals.min_size", get("proposals.min_size"));
    cfg.seed = seed;
    return cfg;
}

DetectSettings RunConfig::detect_settings() const {
    DetectSettings s;
    s.score_threshold = to_double("detect.score_threshold", get("detect.score_threshold"));
    s.final_nms_iou = to_double("detect.final_nms_iou", get("detect.final_nms_iou"));
    s.proposals.pre_nms_top = to_int("proposals.pre_nms_top", get("proposals.pre_nms_top"));
    s.proposals.post_nms_top = to_int("proposals.post_nms_top", get("proposals.post_nms_top"));
    s.proposals.nms_iou = to_double("proposals.nms_iou", get("proposals.nms_iou"));
    s.proposals.min_size = to_double("proposals.min_size", get("proposals.min_size"));
    return s;
}

double RunConfig::eval_match_iou() const {
    return to_double("eval.match_iou", get("eval.match_iou"));
}

}  // namespace wbc
