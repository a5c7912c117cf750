// Copyright (c) 2026 the wbcdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "core/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "core/rng.hpp"
#include "core/xml.hpp"

namespace wbc {

namespace {

bool iequals(const std::string& a, const char* b) {
    std::size_t i = 0;
    for (; i < a.size() && b[i]; ++i)
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    return i == a.size() && b[i] == '\0';
}

// shortest exact decimal; integers print without a decimal point
std::string format_coord(double v) {
    if (v == std::floor(v) && std::fabs(v) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
        return buf;
    }
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_number(const XmlElement& el) {
    const char* s = el.text.c_str();
    char* end = nullptr;
    const double v = std::strtod(s, &end);
    if (end == s) throw XmlError("element <" + el.name + "> does not hold a number", el.line);
    while (*end) {
        if (!std::isspace(static_cast<unsigned char>(*end)))
            throw XmlError("element <" + el.name + "> does not hold a number", el.line);
        ++end;
    }
    return v;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

std::vector<BBox> Annotation::wbc_boxes() const {
    std::vector<BBox> out;
    for (const auto& obj : objects)
        if (iequals(obj.name, "wbc")) out.push_back(obj.box);
    return out;
}

Annotation parse_voc_xml(const std::string& text) {
    const XmlElement root = xml_parse(text);
    if (root.name != "annotation")
        throw XmlError("expected <annotation> document element, found <" + root.name + ">",
                       root.line);

    Annotation ann;
    ann.filename = root.require("filename").text;
    const XmlElement& size = root.require("size");
    ann.width = static_cast<int>(parse_number(size.require("width")));
    ann.height = static_cast<int>(parse_number(size.require("height")));
    ann.depth = static_cast<int>(parse_number(size.require("depth")));
    if (ann.width <= 0 || ann.height <= 0)
        throw XmlError("<size> must describe a positive image extent", size.line);

    for (const XmlElement* obj : root.children_named("object")) {
        VocObject vo;
        vo.name = obj->require("name").text;
        if (const XmlElement* difficult = obj->child("difficult"))
            vo.difficult = parse_number(*difficult) != 0.0;
        const XmlElement& bb = obj->require("bndbox");
        vo.box.x_min = parse_number(bb.require("xmin"));
        vo.box.y_min = parse_number(bb.require("ymin"));
        vo.box.x_max = parse_number(bb.require("xmax"));
        vo.box.y_max = parse_number(bb.require("ymax"));
        if (!vo.box.valid())
            throw XmlError("<bndbox> is degenerate (xmin >= xmax or ymin >= ymax)", bb.line);

        const auto clipped = clip_box(vo.box, ann.width, ann.height);
        if (!clipped)
            throw XmlError("<bndbox> lies entirely outside the image", bb.line);
        if (!(*clipped == vo.box)) {
            std::cerr << "warning: clipping <bndbox> of '" << vo.name
                      << "' to the image bounds in " << ann.filename << "\n";
            vo.box = *clipped;
        }
        ann.objects.push_back(std::move(vo));
    }
    return ann;
}

std::string serialize_voc_xml(const Annotation& annotation) {
    XmlElement root;
    root.name = "annotation";
    const auto leaf = [](const std::string& name, const std::string& text) {
        XmlElement el;
        el.name = name;
        el.text = text;
        return el;
    };
    root.children.push_back(leaf("filename", annotation.filename));

    XmlElement size;
    size.name = "size";
    size.children.push_back(leaf("width", std::to_string(annotation.width)));
    size.children.push_back(leaf("height", std::to_string(annotation.height)));
    size.children.push_back(leaf("depth", std::to_string(annotation.depth)));
    root.children.push_back(std::move(size));

    for (const auto& obj : annotation.objects) {
        XmlElement el;
        el.name = "object";
        el.children.push_back(leaf("name", obj.name));
        el.children.push_back(leaf("difficult", obj.difficult ? "1" : "0"));
        XmlElement bb;
        bb.name = "bndbox";
        bb.children.push_back(leaf("xmin", format_coord(obj.box.x_min)));
        bb.children.push_back(leaf("ymin", format_coord(obj.box.y_min)));
        bb.children.push_back(leaf("xmax", format_coord(obj.box.x_max)));
        bb.children.push_back(leaf("ymax", format_coord(obj.box.y_max)));
        el.children.push_back(std::move(bb));
        root.children.push_back(std::move(el));
    }
    return xml_serialize(root);
}

// ---------------------------------------------------------------------------
// PPM

namespace {

struct PpmCursor {
    const std::string& bytes;
    std::size_t pos = 0;
    const std::string& origin;

    [[noreturn]] void fail(const std::string& message) const {
        throw std::runtime_error(origin + ": " + message);
    }

    void skip_space_and_comments() {
        while (pos < bytes.size()) {
            const char c = bytes[pos];
            if (c == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos;
            } else {
                break;
            }
        }
    }

    int read_int() {
        skip_space_and_comments();
        if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos])))
            fail("malformed header (expected an integer)");
        long v = 0;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
            v = v * 10 + (bytes[pos] - '0');
            if (v > 1000000000L) fail("header value out of range");
            ++pos;
        }
        return static_cast<int>(v);
    }
};

}  // namespace

Tensor decode_ppm(const std::string& bytes, const std::string& origin) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '6' && bytes[1] != '5'))
        throw std::runtime_error(origin + ": not a binary PPM/PGM file (P6/P5)");
    const bool gray = bytes[1] == '5';

    PpmCursor cur{bytes, 2, origin};
    const int w = cur.read_int();
    const int h = cur.read_int();
    const int maxval = cur.read_int();
    if (w <= 0 || h <= 0) cur.fail("non-positive image dimensions");
    if (maxval <= 0 || maxval > 255) cur.fail("only 8-bit images are supported (maxval <= 255)");
    if (cur.pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[cur.pos])))
        cur.fail("missing whitespace after header");
    ++cur.pos;  // exactly one whitespace byte before the raster

    const std::size_t pixels = static_cast<std::size_t>(w) * h;
    const std::size_t need = pixels * (gray ? 1 : 3);
    if (bytes.size() - cur.pos < need) cur.fail("truncated pixel data");

    Tensor out({3, h, w});
    const unsigned char* raster =
        reinterpret_cast<const unsigned char*>(bytes.data()) + cur.pos;
    const double inv = 1.0 / maxval;
    for (std::size_t p = 0; p < pixels; ++p) {
        if (gray) {
            const double v = raster[p] * inv;
            out[p] = v;
            out[pixels + p] = v;
            out[2 * pixels + p] = v;
        } else {
            out[p] = raster[3 * p] * inv;
            out[pixels + p] = raster[3 * p + 1] * inv;
            out[2 * pixels + p] = raster[3 * p + 2] * inv;
        }
    }
    return out;
}

Tensor load_image(const std::string& path) { return decode_ppm(read_file(path), path); }

std::string encode_ppm(const Tensor& image) {
    const int h = image.dim(1), w = image.dim(2);
    std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    const std::size_t pixels = static_cast<std::size_t>(w) * h;
    out.reserve(out.size() + pixels * 3);
    for (std::size_t p = 0; p < pixels; ++p)
        for (int c = 0; c < 3; ++c) {
            const double v = std::clamp(image[static_cast<std::size_t>(c) * pixels + p], 0.0, 1.0);
            out += static_cast<char>(std::lround(v * 255.0));
        }
    return out;
}

void save_image_ppm(const Tensor& image, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << encode_ppm(image);
    if (!out) throw std::runtime_error("write failed for " + path);
}

// ---------------------------------------------------------------------------
// synthetic generator

namespace {

struct Ellipse {
    double cx, cy, rx, ry;
};

constexpr double kBackground[3] = {0.86, 0.83, 0.89};
constexpr double kCytoplasm[3] = {0.70, 0.62, 0.82};
constexpr double kNucleus[3] = {0.36, 0.22, 0.55};

}  // namespace

Sample generate_synthetic(const SyntheticConfig& cfg, int index) {
    if (cfg.cells_min < 0 || cfg.cells_max < cfg.cells_min)
        throw std::invalid_argument("generate_synthetic: bad cell count range");
    if (cfg.radius_min <= 0 || cfg.radius_max < cfg.radius_min)
        throw std::invalid_argument("generate_synthetic: bad radius range");
    const int size = cfg.image_size;
    if (size < static_cast<int>(2 * cfg.radius_max) + 4)
        throw std::invalid_argument("generate_synthetic: image too small for the radius range");

    Rng rng(Rng::mix(cfg.seed, static_cast<std::uint64_t>(index) + 0x5e11));

    const int n_cells = cfg.cells_min + static_cast<int>(rng.uniform_int(
                            static_cast<std::uint64_t>(cfg.cells_max - cfg.cells_min + 1)));

    std::vector<Ellipse> cells;
    std::vector<BBox> boxes;
    for (int i = 0; i < n_cells; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
            Ellipse e;
            e.rx = rng.uniform(cfg.radius_min, cfg.radius_max);
            e.ry = rng.uniform(cfg.radius_min, cfg.radius_max);
            e.cx = rng.uniform(e.rx + 1.0, size - e.rx - 1.0);
            e.cy = rng.uniform(e.ry + 1.0, size - e.ry - 1.0);
            BBox box{std::floor(e.cx - e.rx), std::floor(e.cy - e.ry), std::ceil(e.cx + e.rx),
                     std::ceil(e.cy + e.ry)};
            bool ok = true;
            for (const auto& other : boxes)
                if (iou(box, other) > 0.3) {
                    ok = false;
                    break;
                }
            if (ok) {
                cells.push_back(e);
                boxes.push_back(box);
                placed = true;
            }
        }
        if (!placed)
            throw std::runtime_error(
                "generate_synthetic: could not place the requested cell count without "
                "exceeding the overlap cap");
    }

    Tensor image({3, size, size});
    const std::size_t pixels = static_cast<std::size_t>(size) * size;
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * size + x;
            const double px = x + 0.5, py = y + 0.5;
            const double* color = kBackground;
            for (const auto& e : cells) {
                const double nx = (px - e.cx) / e.rx, ny = (py - e.cy) / e.ry;
                const double d = nx * nx + ny * ny;
                if (d <= 1.0) {
                    const double inx = (px - e.cx) / (0.55 * e.rx);
                    const double iny = (py - e.cy) / (0.55 * e.ry);
                    color = (inx * inx + iny * iny <= 1.0) ? kNucleus : kCytoplasm;
                    break;
                }
            }
            for (int c = 0; c < 3; ++c) {
                const double v = color[c] + cfg.noise * (2.0 * rng.uniform() - 1.0);
                image[static_cast<std::size_t>(c) * pixels + p] = std::clamp(v, 0.0, 1.0);
            }
        }
    }

    Sample sample;
    sample.image = std::move(image);
    char name[32];
    std::snprintf(name, sizeof(name), "synth_%04d.ppm", index);
    sample.annotation.filename = name;
    sample.annotation.width = size;
    sample.annotation.height = size;
    sample.annotation.depth = 3;
    for (const auto& box : boxes) sample.annotation.objects.push_back({"WBC", box, false});
    return sample;
}

// ---------------------------------------------------------------------------
// split + manifest

std::pair<std::vector<int>, std::vector<int>> split_dataset(int sample_count, int train_count,
                                                            std::uint64_t seed) {
    if (train_count < 0 || train_count > sample_count)
        throw std::invalid_argument("split_dataset: train_count exceeds the sample count");
    std::vector<int> order(static_cast<std::size_t>(sample_count));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(Rng::mix(seed, 0x5b117));
    rng.shuffle(order);
    std::vector<int> train(order.begin(), order.begin() + train_count);
    std::vector<int> test(order.begin() + train_count, order.end());
    return {std::move(train), std::move(test)};
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest " + path);
    const std::filesystem::path base = std::filesystem::path(path).parent_path();

    std::vector<ManifestEntry> entries;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error("manifest " + path + " line " + std::to_string(line_no) +
                                     ": expected <image>\\t<annotation>");
        ManifestEntry e;
        e.image_path = line.substr(0, tab);
        e.annotation_path = line.substr(tab + 1);
        if (e.image_path.empty() || e.annotation_path.empty())
            throw std::runtime_error("manifest " + path + " line " + std::to_string(line_no) +
                                     ": empty path");
        e.image_file = (base / e.image_path).string();
        e.annotation_file = (base / e.annotation_path).string();
        entries.push_back(std::move(e));
    }
    return entries;
}

void save_manifest(const std::vector<std::pair<std::string, std::string>>& pairs,
                   const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest " + path);
    for (const auto& [image, annotation] : pairs) out << image << "\t" << annotation << "\n";
    if (!out) throw std::runtime_error("write failed for " + path);
}

Annotation load_annotation(const std::string& path) {
    try {
        return parse_voc_xml(read_file(path));
    } catch (const XmlError& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

}  // namespace wbc
