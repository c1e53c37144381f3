#pragma once

#include <string>

#include "gcamat/data/color.hpp"
#include "gcamat/gca/attention.hpp"

namespace gcamat::gca {

// Neutral gray used for positions with no information flow (known region).
inline constexpr double kNeutralGray = 128.0 / 255.0;

// Render the argmax attention map as RGB: hue encodes the angle of the
// attended position (x',y') from the feature-map center, saturation its
// radius. Known positions stay neutral gray. The map is nearest-upscaled by
// `upscale`.
template <typename T>
Tensor<float> extract_attention_map(const AttentionResult<T>& attn, int upscale = 1) {
    const int fh = attn.feat_h, fw = attn.feat_w;
    if (fh < 1 || fw < 1) throw ContractError("extract_attention_map: empty feature grid");
    Tensor<float> base(1, 3, fh, fw, static_cast<float>(kNeutralGray));

    const double cy = (fh - 1) / 2.0, cx = (fw - 1) / 2.0;
    const double rmax = std::max(1e-9, std::hypot(std::max(cx, fw - 1 - cx),
                                                  std::max(cy, fh - 1 - cy)));
    for (std::size_t i = 0; i < attn.query_idx.size(); ++i) {
        const int q = attn.query_idx[i];
        const auto [ax, ay] = attn.argmax_xy[i];
        double dx = ax - cx, dy = ay - cy;
        data::Hsv hsv{std::atan2(dy, dx) / (2.0 * 3.14159265358979323846) + 0.5,
                      std::hypot(dx, dy) / rmax, 1.0};
        double r, g, b;
        data::hsv_to_rgb(hsv, r, g, b);
        base.at(0, 0, q / fw, q % fw) = static_cast<float>(r);
        base.at(0, 1, q / fw, q % fw) = static_cast<float>(g);
        base.at(0, 2, q / fw, q % fw) = static_cast<float>(b);
    }
    if (upscale <= 1) return base;

    Tensor<float> up(1, 3, fh * upscale, fw * upscale);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < fh * upscale; ++y)
            for (int x = 0; x < fw * upscale; ++x)
                up.at(0, c, y, x) = base.at(0, c, y / upscale, x / upscale);
    return up;
}

// 3x5 bitmap glyphs for the weight annotation, row-major bits (msb left).
namespace font {
struct Glyph {
    char ch;
    std::uint16_t rows;  // 5 rows x 3 bits
};
inline constexpr Glyph kGlyphs[] = {
    {'0', 0b111101101101111}, {'1', 0b010110010010111}, {'2', 0b111001111100111},
    {'3', 0b111001111001111}, {'4', 0b101101111001001}, {'5', 0b111100111001111},
    {'6', 0b111100111101111}, {'7', 0b111001001001001}, {'8', 0b111101111101111},
    {'9', 0b111101111001111}, {'.', 0b000000000000010}, {':', 0b000010000010000},
    {'-', 0b000000111000000}, {'U', 0b101101101101111}, {'K', 0b101110100110101},
    {' ', 0b000000000000000},
};
inline const Glyph* find(char c) {
    for (const auto& g : kGlyphs)
        if (g.ch == c) return &g;
    return nullptr;
}
}  // namespace font

// Draw small white-on-black text starting at (x0,y0); scale expands pixels.
inline void draw_label(Tensor<float>& img, const std::string& text, int x0, int y0, int scale) {
    const Shape s = img.shape();
    int x = x0;
    for (char ch : text) {
        const font::Glyph* g = font::find(ch);
        if (!g) {
            x += 4 * scale;
            continue;
        }
        for (int ry = 0; ry < 5; ++ry)
            for (int rx = 0; rx < 3; ++rx) {
                bool on = (g->rows >> ((4 - ry) * 3 + (2 - rx))) & 1;
                for (int sy = 0; sy < scale; ++sy)
                    for (int sx = 0; sx < scale; ++sx) {
                        int py = y0 + ry * scale + sy, px = x + rx * scale + sx;
                        if (py < 0 || py >= s.h || px < 0 || px >= s.w) continue;
                        for (int c = 0; c < s.c; ++c)
                            img.at(0, c, py, px) = on ? 1.0f : 0.0f;
                    }
            }
        x += 4 * scale;
    }
}

// Annotate the known/unknown weights in the top-left corner, as shown on the
// attention maps.
template <typename T>
void annotate_weights(Tensor<float>& img, const AttentionResult<T>& attn) {
    if (attn.empty()) return;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "U:%.2f K:%.2f", static_cast<double>(attn.w_unknown),
                  static_cast<double>(attn.w_known));
    draw_label(img, buf, 2, 2, 2);
}

}  // namespace gcamat::gca
