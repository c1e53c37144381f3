#pragma once

#include <cstring>

#include "gcamat/core/tensor.hpp"

// Plain computational kernels on raw buffers / tensors. Everything here is
// single-threaded with a fixed summation order, so repeated runs are bitwise
// identical.

namespace gcamat {

inline int conv_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

// C[M x P] (+)= A[M x K] * B[K x P], row-major.
template <typename T>
void gemm_nn(int M, int P, int K, const T* A, const T* B, T* C, bool accumulate) {
    if (!accumulate) std::memset(C, 0, sizeof(T) * static_cast<std::size_t>(M) * P);
    for (int m = 0; m < M; ++m) {
        const T* a = A + static_cast<std::size_t>(m) * K;
        T* c = C + static_cast<std::size_t>(m) * P;
        for (int k = 0; k < K; ++k) {
            T av = a[k];
            const T* b = B + static_cast<std::size_t>(k) * P;
            for (int p = 0; p < P; ++p) c[p] += av * b[p];
        }
    }
}

// C[M x P] (+)= A[M x K] * B[P x K]^T. Rows of both operands are contiguous.
template <typename T>
void gemm_nt(int M, int P, int K, const T* A, const T* B, T* C, bool accumulate) {
    for (int m = 0; m < M; ++m) {
        const T* a = A + static_cast<std::size_t>(m) * K;
        T* c = C + static_cast<std::size_t>(m) * P;
        for (int p = 0; p < P; ++p) {
            const T* b = B + static_cast<std::size_t>(p) * K;
            T acc = T(0);
            for (int k = 0; k < K; ++k) acc += a[k] * b[k];
            c[p] = accumulate ? c[p] + acc : acc;
        }
    }
}

// C[M x P] (+)= A[K x M]^T * B[K x P].
template <typename T>
void gemm_tn(int M, int P, int K, const T* A, const T* B, T* C, bool accumulate) {
    if (!accumulate) std::memset(C, 0, sizeof(T) * static_cast<std::size_t>(M) * P);
    for (int k = 0; k < K; ++k) {
        const T* a = A + static_cast<std::size_t>(k) * M;
        const T* b = B + static_cast<std::size_t>(k) * P;
        for (int m = 0; m < M; ++m) {
            T av = a[m];
            T* c = C + static_cast<std::size_t>(m) * P;
            for (int p = 0; p < P; ++p) c[p] += av * b[p];
        }
    }
}

// Sliding-window geometry shared by im2col, col2im and the convolutions.
struct PatchGeom {
    Shape in;           // N,C,H,W of the image-side tensor
    int kh = 3, kw = 3;
    int sh = 1, sw = 1;
    int ph = 0, pw = 0;

    int out_h() const { return conv_out_dim(in.h, kh, sh, ph); }
    int out_w() const { return conv_out_dim(in.w, kw, sw, pw); }
    int rows() const { return in.n * out_h() * out_w(); }
    int cols() const { return in.c * kh * kw; }

    void validate() const {
        if (in.h + 2 * ph < kh || in.w + 2 * pw < kw)
            throw DimensionError("kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                                 " larger than padded input " + in.str());
        if (sh < 1 || sw < 1) throw DimensionError("stride must be positive");
    }
};

// Row r of the result holds the flattened (c, kh, kw) receptive field of
// output position r = (n * outH + oh) * outW + ow. Zero padding.
template <typename T>
Tensor<T> im2col(const Tensor<T>& x, const PatchGeom& g) {
    g.validate();
    const int OH = g.out_h(), OW = g.out_w();
    Tensor<T> cols(1, 1, g.rows(), g.cols());
    T* dst = cols.data();
    for (int n = 0; n < g.in.n; ++n)
        for (int oh = 0; oh < OH; ++oh)
            for (int ow = 0; ow < OW; ++ow) {
                for (int c = 0; c < g.in.c; ++c)
                    for (int kh = 0; kh < g.kh; ++kh) {
                        int ih = oh * g.sh - g.ph + kh;
                        for (int kw = 0; kw < g.kw; ++kw) {
                            int iw = ow * g.sw - g.pw + kw;
                            bool inside = ih >= 0 && ih < g.in.h && iw >= 0 && iw < g.in.w;
                            *dst++ = inside ? x.at(n, c, ih, iw) : T(0);
                        }
                    }
            }
    return cols;
}

// Adjoint of im2col: scatter-adds every patch entry back to its source pixel.
template <typename T>
Tensor<T> col2im_sum(const Tensor<T>& cols, const PatchGeom& g) {
    g.validate();
    if (cols.shape().h != g.rows() || cols.shape().w != g.cols())
        throw DimensionError("col2im_sum: column matrix " + cols.shape().str() +
                             " does not match geometry");
    const int OH = g.out_h(), OW = g.out_w();
    Tensor<T> x(g.in);
    const T* src = cols.data();
    for (int n = 0; n < g.in.n; ++n)
        for (int oh = 0; oh < OH; ++oh)
            for (int ow = 0; ow < OW; ++ow) {
                for (int c = 0; c < g.in.c; ++c)
                    for (int kh = 0; kh < g.kh; ++kh) {
                        int ih = oh * g.sh - g.ph + kh;
                        for (int kw = 0; kw < g.kw; ++kw, ++src) {
                            int iw = ow * g.sw - g.pw + kw;
                            if (ih >= 0 && ih < g.in.h && iw >= 0 && iw < g.in.w)
                                x.at(n, c, ih, iw) += *src;
                        }
                    }
            }
    return x;
}

// Number of sliding windows covering each input pixel (same for every n, c).
template <typename T>
Tensor<T> overlap_counts(const PatchGeom& g) {
    const int OH = g.out_h(), OW = g.out_w();
    Tensor<T> cnt(1, 1, g.in.h, g.in.w);
    for (int oh = 0; oh < OH; ++oh)
        for (int ow = 0; ow < OW; ++ow)
            for (int kh = 0; kh < g.kh; ++kh) {
                int ih = oh * g.sh - g.ph + kh;
                if (ih < 0 || ih >= g.in.h) continue;
                for (int kw = 0; kw < g.kw; ++kw) {
                    int iw = ow * g.sw - g.pw + kw;
                    if (iw >= 0 && iw < g.in.w) cnt.at(0, 0, ih, iw) += T(1);
                }
            }
    return cnt;
}

}  // namespace gcamat
