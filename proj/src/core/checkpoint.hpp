// Copyright (c) 2026 the wbcdetect authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace wbc {

// Self-describing textual checkpoint. Per parameter: name, shape, frozen
// flag and row-major values as IEEE-754 bit patterns (16 hex digits each),
// so save/load round-trips are bit-exact. The config section is a flat
// key/value snapshot of whatever produced the parameters.
struct Checkpoint {
    std::string stage;                          // pretrain | stage1..stage4 | final | transfer
    std::map<std::string, std::string> config;  // sorted, deterministic output
    std::vector<Parameter> params;

    const Parameter* find(const std::string& name) const;
};

std::string checkpoint_to_string(const Checkpoint& ckpt);
Checkpoint checkpoint_from_string(const std::string& text);

// Atomic write: the file appears only after a fully written temp file is
// renamed into place, so failed runs leave no partial checkpoint.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

std::string double_to_hex(double v);
double double_from_hex(const std::string& s);

}  // namespace wbc
