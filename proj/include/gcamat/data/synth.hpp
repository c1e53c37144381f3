#pragma once

#include "gcamat/core/rng.hpp"
#include "gcamat/core/tensor.hpp"
#include "gcamat/data/color.hpp"

// Procedural foregrounds and backgrounds: the synthetic stand-in for a real
// matting dataset at desk scale. Everything is a pure function of its seed.

namespace gcamat::data {

// Multi-octave value noise in [0,1].
inline Tensor<float> value_noise(int h, int w, int octaves, Pcg32& rng) {
    Tensor<float> out(1, 1, h, w);
    float total_weight = 0;
    int cell = std::max(h, w) / 2;
    for (int o = 0; o < octaves; ++o) {
        cell = std::max(2, cell);
        int gh = h / cell + 2, gw = w / cell + 2;
        std::vector<float> lattice(static_cast<std::size_t>(gh) * gw);
        for (auto& v : lattice) v = static_cast<float>(rng.uniform());
        float weight = 1.0f / (1 << o);
        total_weight += weight;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                float fy = static_cast<float>(y) / cell, fx = static_cast<float>(x) / cell;
                int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
                float ty = fy - y0, tx = fx - x0;
                const auto at = [&](int yy, int xx) {
                    return lattice[static_cast<std::size_t>(yy) * gw + xx];
                };
                float v = (1 - ty) * ((1 - tx) * at(y0, x0) + tx * at(y0, x0 + 1)) +
                          ty * ((1 - tx) * at(y0 + 1, x0) + tx * at(y0 + 1, x0 + 1));
                out.at(0, 0, y, x) += weight * v;
            }
        cell /= 2;
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] /= total_weight;
    return out;
}

namespace detail {

inline void screen(Tensor<float>& a, int y, int x, float v) {
    float& p = a.at(0, 0, y, x);
    p = p + v - p * v;
}

// Soft-edged disk: 1 inside the core, linear falloff across the feather.
inline void stamp_disk(Tensor<float>& alpha, double cy, double cx, double r, double feather,
                       float peak) {
    const Shape s = alpha.shape();
    int y0 = std::max(0, static_cast<int>(cy - r - feather - 1));
    int y1 = std::min(s.h - 1, static_cast<int>(cy + r + feather + 1));
    int x0 = std::max(0, static_cast<int>(cx - r - feather - 1));
    int x1 = std::min(s.w - 1, static_cast<int>(cx + r + feather + 1));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            double d = std::hypot(y - cy, x - cx);
            float v;
            if (d <= r)
                v = peak;
            else if (d <= r + feather)
                v = peak * static_cast<float>(1.0 - (d - r) / feather);
            else
                continue;
            screen(alpha, y, x, v);
        }
}

// Linear opacity ramp inside a soft disk support.
inline void stamp_ramp(Tensor<float>& alpha, Pcg32& rng) {
    const Shape s = alpha.shape();
    double cy = rng.uniform(0.35, 0.65) * s.h;
    double cx = rng.uniform(0.35, 0.65) * s.w;
    double r = rng.uniform(0.12, 0.3) * std::min(s.h, s.w);
    double theta = rng.uniform(0.0, 6.283185307179586);
    double dy = std::sin(theta), dx = std::cos(theta);
    float peak = static_cast<float>(rng.uniform(0.4, 0.9));
    for (int y = std::max(0, (int)(cy - r - 1)); y <= std::min(s.h - 1, (int)(cy + r + 1)); ++y)
        for (int x = std::max(0, (int)(cx - r - 1)); x <= std::min(s.w - 1, (int)(cx + r + 1));
             ++x) {
            double d = std::hypot(y - cy, x - cx);
            if (d > r) continue;
            double proj = ((y - cy) * dy + (x - cx) * dx) / r;  // [-1,1]
            double ramp = std::min(std::max((proj + 1.0) / 2.0, 0.0), 1.0);
            double support = std::min(1.0, (r - d) / (0.25 * r));
            screen(alpha, y, x, peak * static_cast<float>(ramp * support));
        }
}

// Hair-like strokes: random polyline skeletons stamped with a Gaussian
// transverse falloff (max-blended per stroke, screened onto alpha).
inline void stamp_hair_cluster(Tensor<float>& alpha, Pcg32& rng) {
    const Shape s = alpha.shape();
    Tensor<float> layer(1, 1, s.h, s.w);
    double ry = rng.uniform(0.25, 0.75) * s.h;
    double rx = rng.uniform(0.25, 0.75) * s.w;
    int strokes = rng.uniform_int(6, 18);
    for (int k = 0; k < strokes; ++k) {
        double y = ry, x = rx;
        double dir = rng.uniform(0.0, 6.283185307179586);
        double sigma = rng.uniform(0.6, 1.6);
        float peak = static_cast<float>(rng.uniform(0.4, 1.0));
        int steps = rng.uniform_int(20, 60);
        for (int t = 0; t < steps; ++t) {
            dir += rng.uniform(-0.35, 0.35);
            y += 1.6 * std::sin(dir);
            x += 1.6 * std::cos(dir);
            if (y < 1 || y >= s.h - 1 || x < 1 || x >= s.w - 1) break;
            int iy0 = std::max(0, (int)(y - 3 * sigma)), iy1 = std::min(s.h - 1, (int)(y + 3 * sigma));
            int ix0 = std::max(0, (int)(x - 3 * sigma)), ix1 = std::min(s.w - 1, (int)(x + 3 * sigma));
            for (int yy = iy0; yy <= iy1; ++yy)
                for (int xx = ix0; xx <= ix1; ++xx) {
                    double d2 = (yy - y) * (yy - y) + (xx - x) * (xx - x);
                    float v = peak * static_cast<float>(std::exp(-d2 / (2 * sigma * sigma)));
                    layer.at(0, 0, yy, xx) = std::max(layer.at(0, 0, yy, xx), v);
                }
        }
    }
    for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) screen(alpha, y, x, layer.at(0, 0, y, x));
}

}  // namespace detail

// Procedural foreground: soft disks, an optional opacity ramp and hair-like
// strokes over a value-noise texture. Alpha covers the full range (hard 0
// outside a border frame, a solid 1 core) with a substantial semitransparent
// area.
inline std::pair<Tensor<float>, Tensor<float>> synthesize_foreground(uint64_t seed, int size) {
    Pcg32 rng(mix_seed(seed, 0xF06));
    Tensor<float> alpha(1, 1, size, size);

    // primary body: solid core plus a wide feather
    double r1 = rng.uniform(0.14, 0.26) * size;
    detail::stamp_disk(alpha, rng.uniform(0.38, 0.62) * size, rng.uniform(0.38, 0.62) * size, r1,
                       rng.uniform(0.35, 0.9) * r1, 1.0f);
    int extra = rng.uniform_int(1, 3);
    for (int i = 0; i < extra; ++i) {
        double r = rng.uniform(0.06, 0.16) * size;
        detail::stamp_disk(alpha, rng.uniform(0.3, 0.7) * size, rng.uniform(0.3, 0.7) * size, r,
                           rng.uniform(0.5, 1.2) * r,
                           static_cast<float>(rng.uniform(0.45, 1.0)));
    }
    if (rng.bernoulli(0.5)) detail::stamp_ramp(alpha, rng);
    int clusters = rng.uniform_int(1, 3);
    for (int i = 0; i < clusters; ++i) detail::stamp_hair_cluster(alpha, rng);

    // border frame forced to 0 so a definite background always exists
    double frame = std::max(2.0, 0.04 * size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double d = std::min({(double)y, (double)x, (double)(size - 1 - y),
                                 (double)(size - 1 - x)});
            if (d < frame)
                alpha.at(0, 0, y, x) *= static_cast<float>(std::max(0.0, d / frame));
        }

    // snap the extreme tails so alphas behave like 8-bit data: nothing lives
    // between 0 and the trimap background threshold (same at the top end)
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        if (alpha[i] <= 0.002f)
            alpha[i] = 0.0f;
        else if (alpha[i] >= 0.998f)
            alpha[i] = 1.0f;
    }

    // foreground texture: two-color palette mixed by noise
    Tensor<float> fg(1, 3, size, size);
    float c0[3], c1[3];
    for (int c = 0; c < 3; ++c) {
        c0[c] = static_cast<float>(rng.uniform(0.1, 0.9));
        c1[c] = static_cast<float>(rng.uniform(0.1, 0.9));
    }
    auto noise = value_noise(size, size, 3, rng);
    auto detail_noise = value_noise(size, size, 2, rng);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            float t = noise.at(0, 0, y, x);
            float d = 0.15f * (detail_noise.at(0, 0, y, x) - 0.5f);
            for (int c = 0; c < 3; ++c) {
                float v = c0[c] + (c1[c] - c0[c]) * t + d;
                fg.at(0, c, y, x) = std::min(std::max(v, 0.0f), 1.0f);
            }
        }
    return {std::move(fg), std::move(alpha)};
}

// Procedural background: a two-color gradient mixed with value noise.
inline Tensor<float> synthesize_background(uint64_t seed, int h, int w) {
    Pcg32 rng(mix_seed(seed, 0xB6));
    float c0[3], c1[3];
    for (int c = 0; c < 3; ++c) {
        c0[c] = static_cast<float>(rng.uniform(0.0, 1.0));
        c1[c] = static_cast<float>(rng.uniform(0.0, 1.0));
    }
    double theta = rng.uniform(0.0, 6.283185307179586);
    double dy = std::sin(theta) / std::max(h, 1), dx = std::cos(theta) / std::max(w, 1);
    auto noise = value_noise(h, w, 3, rng);
    Tensor<float> bg(1, 3, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double g = 0.5 + 0.5 * (dy * (y - h / 2.0) + dx * (x - w / 2.0));
            g = std::min(std::max(g, 0.0), 1.0);
            float t = static_cast<float>(0.6 * g + 0.4 * noise.at(0, 0, y, x));
            for (int c = 0; c < 3; ++c) bg.at(0, c, y, x) = c0[c] + (c1[c] - c0[c]) * t;
        }
    return bg;
}

}  // namespace gcamat::data
