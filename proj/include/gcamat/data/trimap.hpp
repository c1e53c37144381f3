#pragma once

#include <algorithm>
#include <set>

#include "gcamat/data/morph.hpp"
#include "gcamat/gca/region.hpp"

namespace gcamat::data {

// A trimap whose unknown band came out empty; callers resample the radii.
struct DegenerateTrimapError : Error {
    using Error::Error;
};

// Trimaps from alpha: foreground = erode(alpha >= 0.999), background =
// erode(alpha <= 0.001), unknown = the rest. Disk structuring elements; the
// background erosion radius is the dilation radius of the unknown band.
template <typename T>
Tensor<T> generate_trimap(const Tensor<T>& alpha, int dilate_r, int erode_r, int radius_lo = 5,
                          int radius_hi = 29) {
    const Shape s = alpha.shape();
    if (s.n != 1 || s.c != 1) throw ContractError("generate_trimap expects a (1,1,H,W) alpha");
    if (dilate_r < radius_lo || dilate_r > radius_hi || erode_r < radius_lo ||
        erode_r > radius_hi)
        throw ContractError("generate_trimap: radii must lie in [" + std::to_string(radius_lo) +
                            "," + std::to_string(radius_hi) + "]");

    const int h = s.h, w = s.w;
    std::vector<std::uint8_t> fg(static_cast<std::size_t>(h) * w), bg(fg.size());
    for (std::size_t i = 0; i < fg.size(); ++i) {
        fg[i] = alpha[i] >= T(0.999) ? 1 : 0;
        bg[i] = alpha[i] <= T(0.001) ? 1 : 0;
    }
    auto fge = erode_disk(fg, h, w, erode_r);
    auto bge = erode_disk(bg, h, w, dilate_r);

    Tensor<T> tri(1, 3, h, w);
    bool any_unknown = false;
    for (int i = 0; i < h * w; ++i) {
        if (fge[i]) {
            tri[static_cast<std::size_t>(gca::kTrimapFg) * h * w + i] = T(1);
        } else if (bge[i]) {
            tri[static_cast<std::size_t>(gca::kTrimapBg) * h * w + i] = T(1);
        } else {
            tri[static_cast<std::size_t>(gca::kTrimapUnknown) * h * w + i] = T(1);
            any_unknown = true;
        }
    }
    if (!any_unknown)
        throw DegenerateTrimapError("trimap has no unknown band (radii " +
                                    std::to_string(dilate_r) + "/" + std::to_string(erode_r) + ")");
    return tri;
}

// Grayscale PNG convention: 0 = background, 128 = unknown, 255 = foreground.
inline constexpr float kTrimapGrayBg = 0.0f;
inline constexpr float kTrimapGrayUnknown = 128.0f / 255.0f;
inline constexpr float kTrimapGrayFg = 1.0f;

template <typename T>
Tensor<float> trimap_to_gray(const Tensor<T>& trimap) {
    gca::validate_one_hot(trimap);
    const Shape s = trimap.shape();
    Tensor<float> g(1, 1, s.h, s.w);
    for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
            if (trimap.at(0, gca::kTrimapFg, y, x) == T(1))
                g.at(0, 0, y, x) = kTrimapGrayFg;
            else if (trimap.at(0, gca::kTrimapUnknown, y, x) == T(1))
                g.at(0, 0, y, x) = kTrimapGrayUnknown;
            else
                g.at(0, 0, y, x) = kTrimapGrayBg;
        }
    return g;
}

// Strict decoding of a {0,128,255} grayscale trimap (values are 8-bit
// levels). Any other level fails loudly, listing the offending values.
inline Tensor<float> gray_to_trimap(const Tensor<float>& gray) {
    const Shape s = gray.shape();
    if (s.n != 1 || s.c != 1) throw ValidationError("trimap image must be single-channel");
    Tensor<float> tri(1, 3, s.h, s.w);
    std::set<int> offending;
    for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
            int level = static_cast<int>(std::lround(gray.at(0, 0, y, x) * 255.0f));
            int c;
            if (level == 0)
                c = gca::kTrimapBg;
            else if (level == 128)
                c = gca::kTrimapUnknown;
            else if (level == 255)
                c = gca::kTrimapFg;
            else {
                offending.insert(level);
                continue;
            }
            tri.at(0, c, y, x) = 1.0f;
        }
    if (!offending.empty()) {
        std::string msg = "trimap contains gray levels other than {0,128,255}:";
        for (int v : offending) msg += " " + std::to_string(v);
        throw ValidationError(msg);
    }
    return tri;
}

}  // namespace gcamat::data
