// Copyright (c) 2026 the wbcdetect authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>

#include "core/data.hpp"
#include "core/head.hpp"
#include "core/train.hpp"

namespace wbc {

// Flat key/value run configuration. Every knob has a built-in default; a
// config file overrides defaults and explicit set() calls override the
// file, giving flag > file > default precedence. The effective values are
// echoed into run reports.
class RunConfig {
public:
    RunConfig();

    // "key = value" lines, '#' comments, blank lines ignored
    void load_file(const std::string& path);
    void set(const std::string& key, const std::string& value);  // throws on unknown key
    std::string get(const std::string& key) const;
    bool has(const std::string& key) const;

    const std::map<std::string, std::string>& values() const { return values_; }

    SyntheticConfig synthetic(std::uint64_t seed) const;
    TrainingConfig training(std::uint64_t seed) const;
    DetectSettings detect_settings() const;
    double eval_match_iou() const;

private:
    void validate(const std::string& key, const std::string& value) const;
    std::map<std::string, std::string> values_;
};

}  // namespace wbc
