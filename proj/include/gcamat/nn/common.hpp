#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gcamat/core/ops.hpp"

namespace gcamat::nn {

enum class Mode { Train, Eval };

// Flat registry of a module tree: trainable parameters (graph leaves) and
// non-trainable state tensors (running stats, power-iteration vectors).
// Registration order is the construction order, which is deterministic and
// defines the optimizer's update order.
template <typename T>
struct ParamSet {
    std::vector<std::pair<std::string, ag::Var<T>>> params;
    std::vector<std::pair<std::string, Tensor<T>*>> state;

    void add_param(const std::string& name, const ag::Var<T>& v) { params.emplace_back(name, v); }
    void add_state(const std::string& name, Tensor<T>* t) { state.emplace_back(name, t); }

    ag::Var<T> find_param(const std::string& name) const {
        for (const auto& [n, v] : params)
            if (n == name) return v;
        throw ContractError("no parameter named " + name);
    }
};

// Kaiming fan-in initialization keeps pre-training activations order-1.
template <typename T>
Tensor<T> kaiming_normal(Shape s, int fan_in, Pcg32& rng) {
    T std = std::sqrt(T(2) / static_cast<T>(fan_in));
    return random_normal<T>(s, rng, std);
}

}  // namespace gcamat::nn
