#pragma once

#include <functional>
#include <optional>

#include "gcamat/data/affine.hpp"
#include "gcamat/data/synth.hpp"
#include "gcamat/data/trimap.hpp"

namespace gcamat::data {

// One training example: layers, the composite and its trimap.
struct MattingSample {
    Tensor<float> fg;      // (1,3,H,W)
    Tensor<float> bg;      // (1,3,H,W)
    Tensor<float> alpha;   // (1,1,H,W)
    Tensor<float> image;   // alpha*fg + (1-alpha)*bg
    Tensor<float> trimap;  // (1,3,H,W) one-hot
};

struct AugmentConfig {
    double merge_prob = 0.5;
    double resize_prob = 0.25;
    int resize_to = 640;
    int crop = 512;
    int morph_lo = 5, morph_hi = 29;
    double rotation_deg = 30;
    double scale_lo = 0.8, scale_hi = 1.25;
    double shear_deg = 10;
    double flip_prob = 0.5;
    double hue_jitter = 0.05;
    double sat_lo = 0.8, sat_hi = 1.2;
    double val_lo = 0.8, val_hi = 1.2;
    int max_affine_retries = 10;
};

// The convex combination of foreground over background.
template <typename T>
Tensor<T> composite(const Tensor<T>& fg, const Tensor<T>& bg, const Tensor<T>& alpha) {
    const Shape s = fg.shape();
    if (!fg.same_shape(bg))
        throw ValidationError("composite: fg " + s.str() + " vs bg " + bg.shape().str());
    if (alpha.shape().h != s.h || alpha.shape().w != s.w || alpha.shape().c != 1)
        throw ValidationError("composite: alpha " + alpha.shape().str() +
                              " does not match layers " + s.str());
    Tensor<T> img(s);
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < s.h; ++y)
                for (int x = 0; x < s.w; ++x) {
                    T a = alpha.at(n, 0, y, x);
                    img.at(n, c, y, x) = a * fg.at(n, c, y, x) + (T(1) - a) * bg.at(n, c, y, x);
                }
    return img;
}

// Merge two foreground objects into a new one: alpha composes as
// a + b(1-a); colors are the premultiplied over-composite. Pixels where b is
// fully transparent keep fg_a exactly.
inline std::pair<Tensor<float>, Tensor<float>> merge_foregrounds(
    const Tensor<float>& fg_a, const Tensor<float>& alpha_a, const Tensor<float>& fg_b,
    const Tensor<float>& alpha_b) {
    if (!fg_a.same_shape(fg_b) || !alpha_a.same_shape(alpha_b))
        throw ValidationError("merge_foregrounds: shape mismatch");
    const Shape s = fg_a.shape();
    Tensor<float> fg(s), alpha(alpha_a.shape());
    for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
            float aa = alpha_a.at(0, 0, y, x);
            float ab = alpha_b.at(0, 0, y, x);
            float an = aa + ab * (1.0f - aa);
            alpha.at(0, 0, y, x) = an;
            for (int c = 0; c < 3; ++c) {
                float ca = fg_a.at(0, c, y, x);
                if (ab == 0.0f || an == 0.0f) {
                    fg.at(0, c, y, x) = ca;
                } else {
                    float cb = fg_b.at(0, c, y, x);
                    fg.at(0, c, y, x) = (aa * ca + (1.0f - aa) * ab * cb) / an;
                }
            }
        }
    return {std::move(fg), std::move(alpha)};
}

// Hue shift (wrapping), saturation/value scaling (clamped).
inline Tensor<float> hsv_jitter(const Tensor<float>& rgb, double dh, double ds, double dv) {
    const Shape s = rgb.shape();
    Tensor<float> out(s);
    for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
            Hsv hsv = rgb_to_hsv(rgb.at(0, 0, y, x), rgb.at(0, 1, y, x), rgb.at(0, 2, y, x));
            hsv.h += dh;
            hsv.s = std::min(std::max(hsv.s * ds, 0.0), 1.0);
            hsv.v = std::min(std::max(hsv.v * dv, 0.0), 1.0);
            double r, g, b;
            hsv_to_rgb(hsv, r, g, b);
            out.at(0, 0, y, x) = static_cast<float>(r);
            out.at(0, 1, y, x) = static_cast<float>(g);
            out.at(0, 2, y, x) = static_cast<float>(b);
        }
    return out;
}

// Uniform draw over the unknown pixels of a one-hot trimap.
template <typename T>
std::pair<int, int> sample_crop_center(const Tensor<T>& trimap, Pcg32& rng) {
    const Shape s = trimap.shape();
    std::vector<int> unknown;
    for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x)
            if (trimap.at(0, gca::kTrimapUnknown, y, x) == T(1)) unknown.push_back(y * s.w + x);
    if (unknown.empty()) throw ContractError("sample_crop_center: no unknown pixels");
    int pick = unknown[rng.uniform_int(0, static_cast<int>(unknown.size()) - 1)];
    return {pick / s.w, pick % s.w};
}

template <typename T>
Tensor<T> crop_at(const Tensor<T>& t, int y0, int x0, int size) {
    const Shape s = t.shape();
    Tensor<T> out(s.n, s.c, size, size);
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x) out.at(n, c, y, x) = t.at(n, c, y0 + y, x0 + x);
    return out;
}

using ForegroundSource = std::function<std::pair<Tensor<float>, Tensor<float>>(Pcg32&)>;
using BackgroundSource = std::function<Tensor<float>(Pcg32&, int, int)>;

// The augmentation pipeline, in order: optional foreground merge, optional
// resize, random affine, trimap generation, unknown-centered crop, HSV
// jitter, background compositing. Returns nothing when no valid transform is
// found within the retry budget.
inline std::optional<MattingSample> augment(const ForegroundSource& fg_source,
                                            const BackgroundSource& bg_source,
                                            const AugmentConfig& cfg, Pcg32& rng) {
    auto [fg, alpha] = fg_source(rng);
    if (rng.bernoulli(cfg.merge_prob)) {
        auto [fg2, alpha2] = fg_source(rng);
        std::tie(fg, alpha) = merge_foregrounds(fg, alpha, fg2, alpha2);
    }
    if (rng.bernoulli(cfg.resize_prob)) {
        fg = resize_bilinear(fg, cfg.resize_to, cfg.resize_to);
        alpha = resize_bilinear(alpha, cfg.resize_to, cfg.resize_to);
    }
    const Shape s = alpha.shape();
    if (s.h < cfg.crop || s.w < cfg.crop)
        throw ContractError("augment: foreground smaller than the crop size");

    Tensor<float> warped_fg, warped_alpha, trimap;
    bool ok = false;
    for (int attempt = 0; attempt < cfg.max_affine_retries && !ok; ++attempt) {
        AffineParams p;
        p.rotation_deg = rng.uniform(-cfg.rotation_deg, cfg.rotation_deg);
        p.scale = rng.uniform(cfg.scale_lo, cfg.scale_hi);
        p.shear_deg = rng.uniform(-cfg.shear_deg, cfg.shear_deg);
        p.hflip = rng.bernoulli(cfg.flip_prob);
        p.vflip = rng.bernoulli(cfg.flip_prob);
        Affine m = affine_about_center(p, s.h, s.w);
        warped_fg = warp_bilinear(fg, m);
        warped_alpha = warp_bilinear(alpha, m);
        // degenerate radii draws are resampled a few times before the whole
        // transform is retried
        for (int redraw = 0; redraw < 3 && !ok; ++redraw) {
            int dil = rng.uniform_int(cfg.morph_lo, cfg.morph_hi);
            int ero = rng.uniform_int(cfg.morph_lo, cfg.morph_hi);
            try {
                trimap = generate_trimap(warped_alpha, dil, ero, cfg.morph_lo, cfg.morph_hi);
                ok = true;
            } catch (const DegenerateTrimapError&) {
            }
        }
    }
    if (!ok) return std::nullopt;

    auto [cy, cx] = sample_crop_center(trimap, rng);
    int y0 = std::min(std::max(cy - cfg.crop / 2, 0), s.h - cfg.crop);
    int x0 = std::min(std::max(cx - cfg.crop / 2, 0), s.w - cfg.crop);

    MattingSample out;
    out.fg = crop_at(warped_fg, y0, x0, cfg.crop);
    out.alpha = crop_at(warped_alpha, y0, x0, cfg.crop);
    out.trimap = crop_at(trimap, y0, x0, cfg.crop);

    double dh = rng.uniform(-cfg.hue_jitter, cfg.hue_jitter);
    double ds = rng.uniform(cfg.sat_lo, cfg.sat_hi);
    double dv = rng.uniform(cfg.val_lo, cfg.val_hi);
    out.fg = hsv_jitter(out.fg, dh, ds, dv);

    out.bg = bg_source(rng, cfg.crop, cfg.crop);
    out.image = composite(out.fg, out.bg, out.alpha);
    return out;
}

// Deterministic per-index sample: the pipeline seeded by mix_seed(seed, i).
inline std::optional<MattingSample> make_sample(uint64_t seed, uint64_t index, int synth_size,
                                                const AugmentConfig& cfg) {
    Pcg32 rng(mix_seed(seed, index));
    uint64_t fg_counter = 0;
    ForegroundSource fg_src = [&](Pcg32& r) {
        return synthesize_foreground(mix_seed(r.next_u32() | (seed << 20), ++fg_counter),
                                     synth_size);
    };
    BackgroundSource bg_src = [&](Pcg32& r, int h, int w) {
        return synthesize_background(r.next_u32(), h, w);
    };
    return augment(fg_src, bg_src, cfg, rng);
}

}  // namespace gcamat::data
