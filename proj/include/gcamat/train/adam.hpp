#pragma once

#include "gcamat/core/graph.hpp"
#include "gcamat/train/schedule.hpp"

namespace gcamat::train {

// Bias-corrected Adam moments, one pair per parameter (in registration
// order). Serialized into checkpoints for resumable training.
template <typename T>
struct AdamState {
    std::vector<Tensor<T>> m, v;
    int64_t t = 0;  // completed updates

    template <typename Params>
    void init(const Params& params) {
        m.clear();
        v.clear();
        for (const auto& [name, var] : params) {
            m.emplace_back(var->value.shape());
            v.emplace_back(var->value.shape());
        }
        t = 0;
    }
};

// One Adam update over all parameters at the given learning rate. If any
// gradient is non-finite the whole step is skipped and false is returned;
// the caller logs the incident. Parameters with no gradient signal update
// their moments with zero gradients.
template <typename T, typename Params>
bool adam_step(Params& params, AdamState<T>& state, double lr_t, const TrainConfig& cfg) {
    if (state.m.size() != params.size())
        throw ContractError("adam state does not match the parameter list");
    for (const auto& [name, var] : params)
        if (var->has_grad && !all_finite(var->grad)) return false;

    state.t += 1;
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    const T bc1 = T(1) - static_cast<T>(std::pow(cfg.beta1, static_cast<double>(state.t)));
    const T bc2 = T(1) - static_cast<T>(std::pow(cfg.beta2, static_cast<double>(state.t)));
    const T eps = static_cast<T>(cfg.adam_eps);
    const T lr = static_cast<T>(lr_t);

    std::size_t i = 0;
    for (auto& [name, var] : params) {
        Tensor<T>& m = state.m[i];
        Tensor<T>& v = state.v[i];
        ++i;
        T* p = var->value.data();
        const T* g = var->has_grad ? var->grad.data() : nullptr;
        for (std::size_t k = 0; k < var->value.size(); ++k) {
            T gk = g ? g[k] : T(0);
            m[k] = b1 * m[k] + (T(1) - b1) * gk;
            v[k] = b2 * v[k] + (T(1) - b2) * gk * gk;
            T mhat = m[k] / bc1;
            T vhat = v[k] / bc2;
            p[k] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
    return true;
}

}  // namespace gcamat::train
