#pragma once

// Independent reference implementations used to cross-check the library.
// Everything here is written as literal nested loops over the defining
// formulas and deliberately shares no kernel code with the implementation.

#include <cstdint>
#include <vector>

#include "gcamat/core/tensor.hpp"

namespace oracle {

using gcamat::Shape;
using gcamat::Tensor;

// --------------------------------------------------------------------------
// Triple-loop matrix product.
// --------------------------------------------------------------------------
template <typename T>
Tensor<T> matmul_ref(const Tensor<T>& a, const Tensor<T>& b) {
    const int M = a.shape().h, K = a.shape().w, P = b.shape().w;
    Tensor<T> c(1, 1, M, P);
    for (int m = 0; m < M; ++m)
        for (int p = 0; p < P; ++p) {
            T acc = T(0);
            for (int k = 0; k < K; ++k) acc += a.at(0, 0, m, k) * b.at(0, 0, k, p);
            c.at(0, 0, m, p) = acc;
        }
    return c;
}

// --------------------------------------------------------------------------
// Direct 6-loop cross-correlation (zero padding).
// --------------------------------------------------------------------------
template <typename T>
Tensor<T> conv2d_ref(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias, int stride,
                     int pad) {
    const Shape xs = x.shape(), ws = w.shape();
    const int OH = (xs.h + 2 * pad - ws.h) / stride + 1;
    const int OW = (xs.w + 2 * pad - ws.w) / stride + 1;
    Tensor<T> y(xs.n, ws.n, OH, OW);
    for (int n = 0; n < xs.n; ++n)
        for (int co = 0; co < ws.n; ++co)
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow) {
                    T acc = bias ? (*bias)[co] : T(0);
                    for (int ci = 0; ci < xs.c; ++ci)
                        for (int kh = 0; kh < ws.h; ++kh)
                            for (int kw = 0; kw < ws.w; ++kw) {
                                int ih = oh * stride - pad + kh;
                                int iw = ow * stride - pad + kw;
                                if (ih < 0 || ih >= xs.h || iw < 0 || iw >= xs.w) continue;
                                acc += x.at(n, ci, ih, iw) * w.at(co, ci, kh, kw);
                            }
                    y.at(n, co, oh, ow) = acc;
                }
    return y;
}

// --------------------------------------------------------------------------
// Scatter-add transposed convolution; weight is (Cin, Cout, kh, kw).
// --------------------------------------------------------------------------
template <typename T>
Tensor<T> conv_transpose2d_ref(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,
                               int stride, int pad) {
    const Shape xs = x.shape(), ws = w.shape();
    const int OH = (xs.h - 1) * stride - 2 * pad + ws.h;
    const int OW = (xs.w - 1) * stride - 2 * pad + ws.w;
    Tensor<T> y(xs.n, ws.c, OH, OW);
    for (int n = 0; n < xs.n; ++n)
        for (int ci = 0; ci < xs.c; ++ci)
            for (int ih = 0; ih < xs.h; ++ih)
                for (int iw = 0; iw < xs.w; ++iw) {
                    T v = x.at(n, ci, ih, iw);
                    for (int co = 0; co < ws.c; ++co)
                        for (int kh = 0; kh < ws.h; ++kh)
                            for (int kw = 0; kw < ws.w; ++kw) {
                                int oh = ih * stride - pad + kh;
                                int ow = iw * stride - pad + kw;
                                if (oh < 0 || oh >= OH || ow < 0 || ow >= OW) continue;
                                y.at(n, co, oh, ow) += v * w.at(ci, co, kh, kw);
                            }
                }
    if (bias)
        for (int n = 0; n < xs.n; ++n)
            for (int co = 0; co < ws.c; ++co)
                for (int oh = 0; oh < OH; ++oh)
                    for (int ow = 0; ow < OW; ++ow) y.at(n, co, oh, ow) += (*bias)[co];
    return y;
}

// --------------------------------------------------------------------------
// Two-pass per-channel statistics.
// --------------------------------------------------------------------------
template <typename T>
void channel_stats_ref(const Tensor<T>& x, std::vector<double>& mean, std::vector<double>& var) {
    const Shape s = x.shape();
    mean.assign(s.c, 0.0);
    var.assign(s.c, 0.0);
    const double m = static_cast<double>(s.n) * s.h * s.w;
    for (int c = 0; c < s.c; ++c) {
        double acc = 0;
        for (int n = 0; n < s.n; ++n)
            for (int h = 0; h < s.h; ++h)
                for (int w = 0; w < s.w; ++w) acc += x.at(n, c, h, w);
        mean[c] = acc / m;
        double acc2 = 0;
        for (int n = 0; n < s.n; ++n)
            for (int h = 0; h < s.h; ++h)
                for (int w = 0; w < s.w; ++w) {
                    double d = x.at(n, c, h, w) - mean[c];
                    acc2 += d * d;
                }
        var[c] = acc2 / m;
    }
}

// --------------------------------------------------------------------------
// Nested-loop guided contextual attention reference, O(c (hw)^2).
// Operates on a single item; guide is the already-adapted image feature.
// --------------------------------------------------------------------------
template <typename T>
struct GcaRef {
    std::vector<std::vector<T>> attention;  // one row of HW scores per query
    std::vector<int> queries;               // linear query positions
    Tensor<T> propagated;                   // masked reconstruction (pre-residual)
    Tensor<T> out;                          // alpha + propagated (residual form)
};

template <typename T>
GcaRef<T> gca_reference(const Tensor<T>& guide, const Tensor<T>& alpha,
                        const std::vector<std::uint8_t>& unknown, int patch, T lambda,
                        T clamp_lo, T clamp_hi, T eps_norm, bool overlap_full) {
    const Shape gs = guide.shape(), as = alpha.shape();
    const int H = gs.h, W = gs.w, HW = H * W, C = gs.c, CA = as.c;
    const int half = patch / 2;

    auto guide_patch = [&](int pos, int c, int ky, int kx) -> T {
        int y = pos / W + ky - half, x = pos % W + kx - half;
        if (y < 0 || y >= H || x < 0 || x >= W) return T(0);
        return guide.at(0, c, y, x);
    };
    auto alpha_patch = [&](int pos, int c, int ky, int kx) -> T {
        int y = pos / W + ky - half, x = pos % W + kx - half;
        if (y < 0 || y >= H || x < 0 || x >= W) return T(0);
        return alpha.at(0, c, y, x);
    };

    // Patch norms, floored at eps.
    std::vector<T> norm(HW);
    for (int pos = 0; pos < HW; ++pos) {
        T sq = T(0);
        for (int c = 0; c < C; ++c)
            for (int ky = 0; ky < patch; ++ky)
                for (int kx = 0; kx < patch; ++kx) {
                    T v = guide_patch(pos, c, ky, kx);
                    sq += v * v;
                }
        T nr = std::sqrt(sq);
        norm[pos] = nr > eps_norm ? nr : eps_norm;
    }

    GcaRef<T> ref;
    int nu = 0, nk = 0;
    for (int pos = 0; pos < HW; ++pos) {
        if (unknown[pos]) {
            ref.queries.push_back(pos);
            ++nu;
        } else {
            ++nk;
        }
    }

    auto clampw = [&](double phi) { return std::min(std::max(phi, (double)clamp_lo), (double)clamp_hi); };
    double wu = nk == 0 ? (double)clamp_hi : clampw(std::sqrt((double)nu / nk));
    double wk = nk == 0 ? (double)clamp_lo : clampw(std::sqrt((double)nk / nu));

    // Similarity + scaled softmax per query.
    for (int q : ref.queries) {
        std::vector<T> row(HW);
        for (int key = 0; key < HW; ++key) {
            T s;
            if (key == q) {
                s = lambda;
            } else {
                T dot = T(0);
                for (int c = 0; c < C; ++c)
                    for (int ky = 0; ky < patch; ++ky)
                        for (int kx = 0; kx < patch; ++kx)
                            dot += guide_patch(q, c, ky, kx) * guide_patch(key, c, ky, kx);
                s = dot / (norm[q] * norm[key]);
            }
            row[key] = s * static_cast<T>(unknown[key] ? wu : wk);
        }
        T mx = row[0];
        for (int k = 1; k < HW; ++k) mx = std::max(mx, row[k]);
        T sum = T(0);
        for (int k = 0; k < HW; ++k) {
            row[k] = std::exp(row[k] - mx);
            sum += row[k];
        }
        for (int k = 0; k < HW; ++k) row[k] /= sum;
        ref.attention.push_back(std::move(row));
    }

    // Propagation: stamp each query's attention-weighted alpha patch at the
    // query position, average overlaps, mask to the unknown region.
    Tensor<T> acc(1, CA, H, W);
    std::vector<int> counts(HW, 0);
    for (int pos = 0; pos < HW; ++pos) {
        if (!overlap_full && !unknown[pos]) continue;
        for (int ky = 0; ky < patch; ++ky)
            for (int kx = 0; kx < patch; ++kx) {
                int y = pos / W + ky - half, x = pos % W + kx - half;
                if (y >= 0 && y < H && x >= 0 && x < W) counts[y * W + x]++;
            }
    }
    for (std::size_t qi = 0; qi < ref.queries.size(); ++qi) {
        int q = ref.queries[qi];
        for (int c = 0; c < CA; ++c)
            for (int ky = 0; ky < patch; ++ky)
                for (int kx = 0; kx < patch; ++kx) {
                    int y = q / W + ky - half, x = q % W + kx - half;
                    if (y < 0 || y >= H || x < 0 || x >= W) continue;
                    T mixed = T(0);
                    for (int key = 0; key < HW; ++key)
                        mixed += ref.attention[qi][key] * alpha_patch(key, c, ky, kx);
                    acc.at(0, c, y, x) += mixed;
                }
    }
    ref.propagated = Tensor<T>(1, CA, H, W);
    ref.out = alpha;
    for (int c = 0; c < CA; ++c)
        for (int pos = 0; pos < HW; ++pos) {
            if (!unknown[pos] || counts[pos] == 0) continue;
            T v = acc.at(0, c, pos / W, pos % W) / static_cast<T>(counts[pos]);
            ref.propagated.at(0, c, pos / W, pos % W) = v;
            ref.out.at(0, c, pos / W, pos % W) += v;
        }
    return ref;
}

}  // namespace oracle
