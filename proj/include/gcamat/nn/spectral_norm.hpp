#pragma once

#include <iostream>

#include "gcamat/nn/common.hpp"

namespace gcamat::nn {

// Spectral normalization of a convolution weight: the weight is divided by
// the top singular value of its (Cout) x (Cin*kh*kw) reshape, estimated by
// power iteration. One iteration per training step; u/v persist across steps
// and are part of the checkpoint.
template <typename T>
class SpectralNorm {
public:
    SpectralNorm() = default;

    void init(int cout, int kp, Pcg32& rng) {
        u_ = random_normal<T>({1, 1, 1, cout}, rng);
        normalize(u_);
        v_ = Tensor<T>(1, 1, 1, kp);
    }

    // Returns the spectrally normalized weight as a graph node. Gradient
    // flows through the 1/sigma factor; u and v are treated as constants.
    ag::Var<T> apply(const ag::Var<T>& weight, Mode mode) {
        const Shape ws = weight->value.shape();
        const int cout = ws.n;
        const int kp = ws.c * ws.h * ws.w;

        if (weight_is_zero(weight->value)) {
            if (!warned_zero_) {
                std::cerr << "spectral_norm: skipping all-zero weight (sigma undefined)\n";
                warned_zero_ = true;
            }
            return weight;
        }

        if (mode == Mode::Train) power_iterate(weight->value);

        // sigma = u^T W v, computed in-graph so d(W/sigma)/dW is exact.
        auto wmat = ag::reshape(weight, Shape{1, 1, cout, kp});
        auto un = ag::constant(u_);                                    // (1,1,1,cout)
        auto vn = ag::constant(reshape_tensor(v_, {1, 1, kp, 1}));     // (1,1,kp,1)
        auto sigma = ag::matmul(ag::matmul(un, wmat), vn);             // (1,1,1,1)
        T sv = sigma->value[0];
        if (!(sv > T(1e-12))) {
            if (!warned_zero_) {
                std::cerr << "spectral_norm: sigma estimate degenerate, skipping\n";
                warned_zero_ = true;
            }
            return weight;
        }
        return ag::scale_by(weight, ag::pow_scalar(sigma, T(-1)));
    }

    // One power-iteration step on the raw weight values. All-zero weights
    // are left alone so u keeps its random direction until training makes
    // the weight nonzero.
    void power_iterate(const Tensor<T>& w) {
        if (weight_is_zero(w)) return;
        const Shape ws = w.shape();
        const int cout = ws.n;
        const int kp = ws.c * ws.h * ws.w;
        // v = normalize(W^T u)
        for (int k = 0; k < kp; ++k) {
            T acc = T(0);
            for (int c = 0; c < cout; ++c) acc += w[static_cast<std::size_t>(c) * kp + k] * u_[c];
            v_[k] = acc;
        }
        normalize(v_);
        // u = normalize(W v)
        for (int c = 0; c < cout; ++c) {
            T acc = T(0);
            const T* row = w.data() + static_cast<std::size_t>(c) * kp;
            for (int k = 0; k < kp; ++k) acc += row[k] * v_[k];
            u_[c] = acc;
        }
        normalize(u_);
    }

    // Current power-iteration estimate of the top singular value.
    T sigma_estimate(const Tensor<T>& w) const {
        const Shape ws = w.shape();
        const int cout = ws.n;
        const int kp = ws.c * ws.h * ws.w;
        T sigma = T(0);
        for (int c = 0; c < cout; ++c) {
            T acc = T(0);
            const T* row = w.data() + static_cast<std::size_t>(c) * kp;
            for (int k = 0; k < kp; ++k) acc += row[k] * v_[k];
            sigma += acc * u_[c];
        }
        return sigma;
    }

    Tensor<T>& u() { return u_; }
    Tensor<T>& v() { return v_; }

private:
    static bool weight_is_zero(const Tensor<T>& w) {
        for (std::size_t i = 0; i < w.size(); ++i)
            if (w[i] != T(0)) return false;
        return true;
    }

    static void normalize(Tensor<T>& t) {
        T sq = T(0);
        for (std::size_t i = 0; i < t.size(); ++i) sq += t[i] * t[i];
        T nrm = std::sqrt(sq);
        if (nrm > T(0))
            for (std::size_t i = 0; i < t.size(); ++i) t[i] /= nrm;
    }

    static Tensor<T> reshape_tensor(const Tensor<T>& t, Shape s) {
        Tensor<T> out(s);
        for (std::size_t i = 0; i < t.size(); ++i) out[i] = t[i];
        return out;
    }

    Tensor<T> u_, v_;
    bool warned_zero_ = false;
};

}  // namespace gcamat::nn
