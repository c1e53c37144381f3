#pragma once

#include <limits>
#include <vector>

#include "gcamat/core/tensor.hpp"

namespace gcamat::data {

namespace detail {

// Large finite stand-in for infinity: the envelope intersections in dt1d
// must stay finite (inf - inf would poison them with NaN).
inline constexpr double kInf = 1e18;

// Felzenszwalb-Huttenlocher 1-D squared distance transform.
inline void dt1d(std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
                 std::vector<double>& z, int n) {
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s;
        while (true) {
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
            if (s <= z[k]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        d[q] = (q - v[k]) * (double)(q - v[k]) + f[v[k]];
    }
}

}  // namespace detail

// Exact squared Euclidean distance to the nearest set pixel (mask != 0).
// Pixels in the set get 0; an empty set gives +inf everywhere.
inline std::vector<double> edt_squared(const std::vector<std::uint8_t>& mask, int h, int w) {
    std::vector<double> dist(static_cast<std::size_t>(h) * w);
    for (std::size_t i = 0; i < dist.size(); ++i)
        dist[i] = mask[i] ? 0.0 : detail::kInf;

    int n = std::max(h, w);
    std::vector<double> f(n), d(n), z(n + 1);
    std::vector<int> v(n);
    // columns
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) f[y] = dist[static_cast<std::size_t>(y) * w + x];
        detail::dt1d(f, d, v, z, h);
        for (int y = 0; y < h; ++y) dist[static_cast<std::size_t>(y) * w + x] = d[y];
    }
    // rows
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) f[x] = dist[static_cast<std::size_t>(y) * w + x];
        detail::dt1d(f, d, v, z, w);
        for (int x = 0; x < w; ++x) dist[static_cast<std::size_t>(y) * w + x] = d[x];
    }
    return dist;
}

// Binary erosion with a disk structuring element of radius r: a pixel
// survives iff no complement pixel lies within squared distance r*r.
inline std::vector<std::uint8_t> erode_disk(const std::vector<std::uint8_t>& mask, int h, int w,
                                            int r) {
    std::vector<std::uint8_t> complement(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) complement[i] = mask[i] ? 0 : 1;
    auto dist = edt_squared(complement, h, w);
    std::vector<std::uint8_t> out(mask.size());
    const double rr = static_cast<double>(r) * r;
    for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] && dist[i] > rr ? 1 : 0;
    return out;
}

inline std::vector<std::uint8_t> dilate_disk(const std::vector<std::uint8_t>& mask, int h, int w,
                                             int r) {
    auto dist = edt_squared(mask, h, w);
    std::vector<std::uint8_t> out(mask.size());
    const double rr = static_cast<double>(r) * r;
    for (std::size_t i = 0; i < mask.size(); ++i) out[i] = dist[i] <= rr ? 1 : 0;
    return out;
}

}  // namespace gcamat::data
