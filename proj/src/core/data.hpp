// Copyright (c) 2026 the wbcdetect authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "core/boxgeom.hpp"
#include "core/tensor.hpp"

namespace wbc {

struct VocObject {
    std::string name;
    BBox box;
    bool difficult = false;

    bool operator==(const VocObject&) const = default;
};

// VOC-style annotation: image identity plus its labeled boxes.
struct Annotation {
    std::string filename;
    int width = 0, height = 0, depth = 3;
    std::vector<VocObject> objects;

    bool operator==(const Annotation&) const = default;

    // boxes of the single foreground class ("WBC", case-insensitive)
    std::vector<BBox> wbc_boxes() const;
};

Annotation parse_voc_xml(const std::string& text);
std::string serialize_voc_xml(const Annotation& annotation);

// Binary PPM (P6) and PGM (P5), 8-bit. Values scale to [0,1]; grayscale is
// promoted to three channels.
Tensor load_image(const std::string& path);
Tensor decode_ppm(const std::string& bytes, const std::string& origin);
void save_image_ppm(const Tensor& image, const std::string& path);
std::string encode_ppm(const Tensor& image);

struct Sample {
    Tensor image;  // [3,H,W] in [0,1]
    Annotation annotation;
};

struct SyntheticConfig {
    int image_size = 128;
    int cells_min = 1;
    int cells_max = 3;
    double radius_min = 6.0;
    double radius_max = 14.0;
    double noise = 0.02;
    std::uint64_t seed = 0;
};

// Renders a noisy pale field with elliptical cells (dark nucleus inside a
// lighter cytoplasm halo). Ground truth is the exact ellipse bounding box
// rounded outward to integer pixels; cells keep pairwise box IoU <= 0.3.
// Fully determined by (cfg.seed, index).
Sample generate_synthetic(const SyntheticConfig& cfg, int index);

// Seeded shuffle-split into disjoint, exhaustive train/test index sets.
std::pair<std::vector<int>, std::vector<int>> split_dataset(int sample_count, int train_count,
                                                            std::uint64_t seed);

// One image/annotation path pair per line, tab separated, relative to the
// manifest's directory.
struct ManifestEntry {
    std::string image_path;       // as written in the manifest
    std::string annotation_path;  // as written in the manifest
    std::string image_file;       // resolved against the manifest directory
    std::string annotation_file;
};

std::vector<ManifestEntry> load_manifest(const std::string& path);
void save_manifest(const std::vector<std::pair<std::string, std::string>>& pairs,
                   const std::string& path);

Annotation load_annotation(const std::string& path);

}  // namespace wbc
