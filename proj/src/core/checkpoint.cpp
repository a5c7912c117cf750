// Copyright (c) 2026 the wbcdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "core/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace wbc {

std::string double_to_hex(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(bits));
    return buf;
}

double double_from_hex(const std::string& s) {
    if (s.size() != 16) throw std::invalid_argument("checkpoint: bad hex double '" + s + "'");
    std::uint64_t bits = 0;
    for (char c : s) {
        int d;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
        else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
        else throw std::invalid_argument("checkpoint: bad hex double '" + s + "'");
        bits = (bits << 4) | static_cast<std::uint64_t>(d);
    }
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

const Parameter* Checkpoint::find(const std::string& name) const {
    for (const auto& p : params)
        if (p.name == name) return &p;
    return nullptr;
}

std::string checkpoint_to_string(const Checkpoint& ckpt) {
    std::ostringstream out;
    out << "WBC-CHECKPOINT v1\n";
    out << "stage " << ckpt.stage << "\n";
    for (const auto& [k, v] : ckpt.config) out << "config " << k << " " << v << "\n";
    for (const auto& p : ckpt.params) {
        out << "param " << p.name << " frozen=" << (p.frozen ? 1 : 0) << " shape=";
        const auto& shape = p.value.shape();
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) out << ",";
            out << shape[i];
        }
        out << "\n";
        const auto& vals = p.value.values();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            out << double_to_hex(vals[i]);
            out << (((i + 1) % 16 == 0 || i + 1 == vals.size()) ? '\n' : ' ');
        }
    }
    out << "end\n";
    return out.str();
}

namespace {

std::vector<int> parse_shape(const std::string& s) {
    std::vector<int> shape;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        shape.push_back(std::stoi(s.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    return shape;
}

}  // namespace

Checkpoint checkpoint_from_string(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "WBC-CHECKPOINT v1")
        throw std::runtime_error("checkpoint: unrecognized header");

    Checkpoint ckpt;
    bool saw_end = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "stage") {
            ls >> ckpt.stage;
        } else if (tag == "config") {
            std::string key, value;
            ls >> key;
            std::getline(ls, value);
            if (!value.empty() && value[0] == ' ') value.erase(0, 1);
            ckpt.config[key] = value;
        } else if (tag == "param") {
            std::string name, frozen_field, shape_field;
            ls >> name >> frozen_field >> shape_field;
            if (frozen_field.rfind("frozen=", 0) != 0 || shape_field.rfind("shape=", 0) != 0)
                throw std::runtime_error("checkpoint: malformed param line '" + line + "'");
            Parameter p(name, Tensor(parse_shape(shape_field.substr(6))));
            p.frozen = frozen_field.substr(7) == "1";
            std::string hex;
            for (auto& v : p.value.values()) {
                if (!(in >> hex))
                    throw std::runtime_error("checkpoint: truncated values for " + name);
                v = double_from_hex(hex);
            }
            ckpt.params.push_back(std::move(p));
        } else if (tag == "end") {
            saw_end = true;
            break;
        } else {
            throw std::runtime_error("checkpoint: unknown record '" + tag + "'");
        }
    }
    if (!saw_end) throw std::runtime_error("checkpoint: missing end marker (truncated file?)");
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("checkpoint: cannot write " + tmp);
        out << checkpoint_to_string(ckpt);
        if (!out) {
            out.close();
            std::filesystem::remove(tmp);
            throw std::runtime_error("checkpoint: write failed for " + tmp);
        }
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return checkpoint_from_string(buf.str());
}

}  // namespace wbc
