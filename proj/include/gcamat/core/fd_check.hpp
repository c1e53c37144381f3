#pragma once

#include <functional>
#include <vector>

#include "gcamat/core/ops.hpp"
#include "gcamat/core/rng.hpp"

// Central finite-difference verification of analytic gradients. Meant to run
// in double precision; the truncation error of the central difference at
// eps=1e-4 is far below the 1e-4 relative tolerance used by the test suite.

namespace gcamat {

struct FdReport {
    double max_rel_err = 0.0;
    std::vector<double> per_input_max;  // worst relative error per input
    int probes_run = 0;
    int excluded = 0;  // probes at nondifferentiable points (subgradients)
    int worst_input = -1;
    std::size_t worst_elem = 0;
    bool nonfinite = false;  // a probe produced a non-finite value
    int nonfinite_input = -1;
    std::size_t nonfinite_elem = 0;

    bool pass(double tol) const { return !nonfinite && max_rel_err < tol; }
};

// op maps a vector of graph leaves to a scalar node. Non-scalar operations
// are checked by wrapping them in a fixed projection, see the tests.
template <typename T>
FdReport fd_check(const std::function<ag::Var<T>(const std::vector<ag::Var<T>>&)>& op,
                  std::vector<Tensor<T>> inputs, T eps, int probes, Pcg32& rng) {
    FdReport rep;
    rep.per_input_max.assign(inputs.size(), 0.0);

    auto eval = [&](const std::vector<Tensor<T>>& ins) -> T {
        std::vector<ag::Var<T>> vars;
        vars.reserve(ins.size());
        for (const auto& t : ins) vars.push_back(ag::constant(t));
        return ag::scalar(op(vars));
    };

    // Analytic gradients at the base point.
    std::vector<ag::Var<T>> vars;
    vars.reserve(inputs.size());
    for (const auto& t : inputs) vars.push_back(ag::param(t));
    ag::Var<T> y = op(vars);
    if (!all_finite(y->value)) {
        rep.nonfinite = true;
        return rep;
    }
    ag::backward(y);
    T f0 = y->value[0];

    std::size_t total = 0;
    for (const auto& t : inputs) total += t.size();
    if (total == 0) throw ContractError("fd_check: empty inputs");

    for (int p = 0; p < probes; ++p) {
        // Pick a random element across all inputs.
        std::size_t flat = static_cast<std::size_t>(rng.uniform() * static_cast<double>(total));
        if (flat >= total) flat = total - 1;
        int which = 0;
        while (flat >= inputs[which].size()) {
            flat -= inputs[which].size();
            ++which;
        }

        T saved = inputs[which][flat];
        inputs[which][flat] = saved + eps;
        T fp = eval(inputs);
        inputs[which][flat] = saved - eps;
        T fm = eval(inputs);
        inputs[which][flat] = saved;

        if (!std::isfinite(static_cast<double>(fp)) || !std::isfinite(static_cast<double>(fm))) {
            rep.nonfinite = true;
            rep.nonfinite_input = which;
            rep.nonfinite_elem = flat;
            return rep;
        }
        ++rep.probes_run;

        double dp = static_cast<double>(fp - f0) / static_cast<double>(eps);
        double dm = static_cast<double>(f0 - fm) / static_cast<double>(eps);
        // One-sided slopes disagreeing flags a kink (relu/abs/clamp at their
        // corner): reported as excluded subgradient points, not failures.
        if (std::abs(dp - dm) > 0.1 * std::max({1.0, std::abs(dp), std::abs(dm)})) {
            ++rep.excluded;
            continue;
        }

        double central = static_cast<double>(fp - fm) / (2.0 * static_cast<double>(eps));
        double analytic =
            vars[which]->has_grad ? static_cast<double>(vars[which]->grad[flat]) : 0.0;
        double rel = std::abs(analytic - central) /
                     std::max({1.0, std::abs(analytic), std::abs(central)});
        rep.per_input_max[which] = std::max(rep.per_input_max[which], rel);
        if (rel > rep.max_rel_err) {
            rep.max_rel_err = rel;
            rep.worst_input = which;
            rep.worst_elem = flat;
        }
    }
    return rep;
}

}  // namespace gcamat
