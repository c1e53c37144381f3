#pragma once

#include "gcamat/nn/common.hpp"

namespace gcamat::nn {

// Batch normalization over (N,H,W) per channel. Training mode normalizes by
// batch statistics (biased variance) and updates the running estimates; eval
// mode uses the running estimates.
template <typename T>
class BatchNorm {
public:
    BatchNorm() = default;
    explicit BatchNorm(int channels, T momentum = T(0.1), T eps = T(1e-5))
        : momentum_(momentum),
          eps_(eps),
          running_mean_(1, channels, 1, 1),
          running_var_(1, channels, 1, 1, T(1)) {
        gamma_ = ag::param(Tensor<T>(Shape{1, channels, 1, 1}, T(1)));
        beta_ = ag::param(Tensor<T>(1, channels, 1, 1));
    }

    ag::Var<T> forward(const ag::Var<T>& x, Mode mode) {
        const Shape s = x->value.shape();
        if (s.c != running_mean_.shape().c)
            throw DimensionError("batchnorm: channel mismatch");
        if (mode == Mode::Train) {
            if (static_cast<std::size_t>(s.n) * s.h * s.w <= 1)
                throw ContractError("batchnorm: training mode needs more than one value per channel");
            auto m = ag::mean_channels(x);
            auto xc = ag::add_channels(x, ag::neg(m));
            auto var = ag::mean_channels(ag::mul(xc, xc));
            auto inv = ag::pow_scalar(ag::add_scalar(var, eps_), T(-0.5));
            auto y = ag::mul_channels(xc, inv);
            for (int c = 0; c < s.c; ++c) {
                running_mean_[c] = (T(1) - momentum_) * running_mean_[c] + momentum_ * m->value[c];
                running_var_[c] = (T(1) - momentum_) * running_var_[c] + momentum_ * var->value[c];
            }
            return ag::add_channels(ag::mul_channels(y, gamma_), beta_);
        }
        Tensor<T> shift(1, s.c, 1, 1), scale(1, s.c, 1, 1);
        for (int c = 0; c < s.c; ++c) {
            shift[c] = -running_mean_[c];
            scale[c] = T(1) / std::sqrt(running_var_[c] + eps_);
        }
        auto y = ag::mul_channels(ag::add_channels(x, ag::constant(shift)), ag::constant(scale));
        return ag::add_channels(ag::mul_channels(y, gamma_), beta_);
    }

    void register_into(ParamSet<T>& ps, const std::string& prefix) {
        ps.add_param(prefix + ".gamma", gamma_);
        ps.add_param(prefix + ".beta", beta_);
        ps.add_state(prefix + ".running_mean", &running_mean_);
        ps.add_state(prefix + ".running_var", &running_var_);
    }

    ag::Var<T>& gamma() { return gamma_; }
    ag::Var<T>& beta() { return beta_; }
    Tensor<T>& running_mean() { return running_mean_; }
    Tensor<T>& running_var() { return running_var_; }

private:
    T momentum_ = T(0.1);
    T eps_ = T(1e-5);
    ag::Var<T> gamma_, beta_;
    Tensor<T> running_mean_, running_var_;
};

}  // namespace gcamat::nn
