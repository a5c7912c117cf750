// Copyright (c) 2026 the wbcdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "core/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace wbc {

namespace {

constexpr double kYellow[3] = {1.0, 1.0, 0.0};  // exactly (255,255,0) in 8-bit
constexpr int kGlyphW = 5, kGlyphH = 7, kAdvance = 6;

// 5x7 glyphs for "0123456789.%", one row per byte, bit 4 = leftmost column
const unsigned char* glyph_rows(char c) {
    static const unsigned char digits[10][7] = {
        {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E},  // 0
        {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},  // 1
        {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F},  // 2
        {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},  // 3
        {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02},  // 4
        {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},  // 5
        {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E},  // 6
        {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},  // 7
        {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E},  // 8
        {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},  // 9
    };
    static const unsigned char dot[7] = {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C};
    static const unsigned char percent[7] = {0x19, 0x1A, 0x02, 0x04, 0x08, 0x0B, 0x13};
    if (c >= '0' && c <= '9') return digits[c - '0'];
    if (c == '.') return dot;
    return percent;  // '%'
}

void put_pixel(Tensor& image, int x, int y) {
    const int h = image.dim(1), w = image.dim(2);
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    for (int c = 0; c < 3; ++c) image.at(c, y, x) = kYellow[c];
}

void draw_text(Tensor& image, int x0, int y0, const std::string& text) {
    int x = x0;
    for (char c : text) {
        const unsigned char* rows = glyph_rows(c);
        for (int gy = 0; gy < kGlyphH; ++gy)
            for (int gx = 0; gx < kGlyphW; ++gx)
                if (rows[gy] & (1 << (kGlyphW - 1 - gx))) put_pixel(image, x + gx, y0 + gy);
        x += kAdvance;
    }
}

}  // namespace

std::string probability_label(double probability) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.1f%%", probability * 100.0);
    return buf;
}

LabelPlacement label_placement(const BBox& box, const std::string& text, int img_w, int img_h) {
    LabelPlacement p;
    p.width = static_cast<int>(text.size()) * kAdvance - (kAdvance - kGlyphW);
    p.x = static_cast<int>(std::lround(box.x_min));
    p.y = static_cast<int>(std::lround(box.y_min)) - kGlyphH - 2;
    if (p.y < 0) p.y = static_cast<int>(std::lround(box.y_min)) + 3;
    p.x = std::clamp(p.x, 0, std::max(0, img_w - p.width));
    p.y = std::clamp(p.y, 0, std::max(0, img_h - p.height));
    return p;
}

Tensor render_annotations(const Tensor& image, const std::vector<Detection>& detections) {
    Tensor out = image;
    const int h = image.dim(1), w = image.dim(2);
    for (const auto& det : detections) {
        const int x0 = static_cast<int>(std::lround(det.box.x_min));
        const int y0 = static_cast<int>(std::lround(det.box.y_min));
        const int x1 = static_cast<int>(std::lround(det.box.x_max));
        const int y1 = static_cast<int>(std::lround(det.box.y_max));

        // 2-px border drawn inside the box
        for (int t = 0; t < 2; ++t) {
            for (int x = x0; x < x1; ++x) {
                put_pixel(out, x, y0 + t);
                put_pixel(out, x, y1 - 1 - t);
            }
            for (int y = y0; y < y1; ++y) {
                put_pixel(out, x0 + t, y);
                put_pixel(out, x1 - 1 - t, y);
            }
        }

        const std::string text = probability_label(det.probability);
        const LabelPlacement p = label_placement(det.box, text, w, h);
        draw_text(out, p.x, p.y, text);
    }
    return out;
}

}  // namespace wbc
