#pragma once

#include <cstdint>
#include <vector>

#include "gcamat/core/tensor.hpp"
#include "gcamat/gca/config.hpp"

namespace gcamat::gca {

// Trimap channel order used throughout: 0 = background, 1 = unknown,
// 2 = foreground.
inline constexpr int kTrimapBg = 0;
inline constexpr int kTrimapUnknown = 1;
inline constexpr int kTrimapFg = 2;

// Unknown/known partition of the feature grid. Every position is exactly one
// of the two; unknown_idx lists unknown positions in ascending linear order.
struct RegionMask {
    int h = 0, w = 0;
    std::vector<std::uint8_t> unknown;
    std::vector<int> unknown_idx;

    int positions() const { return h * w; }
    int num_unknown() const { return static_cast<int>(unknown_idx.size()); }
    int num_known() const { return positions() - num_unknown(); }
};

template <typename T>
void validate_one_hot(const Tensor<T>& trimap) {
    const Shape s = trimap.shape();
    if (s.c != 3) throw ValidationError("trimap must have 3 channels, got " + s.str());
    for (int n = 0; n < s.n; ++n)
        for (int h = 0; h < s.h; ++h)
            for (int w = 0; w < s.w; ++w) {
                int ones = 0;
                for (int c = 0; c < 3; ++c) {
                    T v = trimap.at(n, c, h, w);
                    if (v != T(0) && v != T(1))
                        throw ValidationError("trimap is not one-hot: value " +
                                              std::to_string(static_cast<double>(v)) + " at (" +
                                              std::to_string(h) + "," + std::to_string(w) + ")");
                    if (v == T(1)) ++ones;
                }
                if (ones != 1)
                    throw ValidationError("trimap is not one-hot at (" + std::to_string(h) + "," +
                                          std::to_string(w) + ")");
            }
}

// Average-pool the unknown channel of a one-hot trimap down to the feature
// resolution and threshold it. A single batch item is classified at a time.
template <typename T>
RegionMask classify_regions(const Tensor<T>& trimap, int feat_h, int feat_w,
                            const GcaConfig& cfg) {
    cfg.validate();
    const Shape s = trimap.shape();
    if (s.n != 1) throw ContractError("classify_regions takes a single batch item");
    validate_one_hot(trimap);
    if (feat_h < 1 || feat_w < 1 || s.h % feat_h != 0 || s.w % feat_w != 0)
        throw ContractError("feature grid " + std::to_string(feat_h) + "x" +
                            std::to_string(feat_w) + " does not evenly divide " + s.str());
    const int fy = s.h / feat_h, fx = s.w / feat_w;

    RegionMask m;
    m.h = feat_h;
    m.w = feat_w;
    m.unknown.assign(static_cast<std::size_t>(feat_h) * feat_w, 0);
    for (int y = 0; y < feat_h; ++y)
        for (int x = 0; x < feat_w; ++x) {
            double acc = 0;
            for (int dy = 0; dy < fy; ++dy)
                for (int dx = 0; dx < fx; ++dx)
                    acc += static_cast<double>(trimap.at(0, kTrimapUnknown, y * fy + dy, x * fx + dx));
            double pooled = acc / (fy * fx);
            bool unk = cfg.any_unknown_rule ? pooled > 0.0 : pooled > cfg.unknown_threshold;
            if (unk) {
                m.unknown[static_cast<std::size_t>(y) * feat_w + x] = 1;
                m.unknown_idx.push_back(y * feat_w + x);
            }
        }
    return m;
}

// (1,1,h,w) float mask, 1 at unknown positions.
template <typename T>
Tensor<T> mask_tensor(const RegionMask& m) {
    Tensor<T> t(1, 1, m.h, m.w);
    for (int i = 0; i < m.positions(); ++i) t[i] = m.unknown[i] ? T(1) : T(0);
    return t;
}

// Same mask tiled over channels: (1,C,h,w).
template <typename T>
Tensor<T> mask_tensor_channels(const RegionMask& m, int channels) {
    Tensor<T> t(1, channels, m.h, m.w);
    for (int c = 0; c < channels; ++c)
        for (int i = 0; i < m.positions(); ++i)
            t[static_cast<std::size_t>(c) * m.positions() + i] = m.unknown[i] ? T(1) : T(0);
    return t;
}

}  // namespace gcamat::gca
