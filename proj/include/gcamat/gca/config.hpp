#pragma once

#include "gcamat/core/errors.hpp"

namespace gcamat::gca {

// Hyperparameters of the guided attention block. lambda_self is the
// punishment constant assigned to a patch's self-similarity; clamp_lo/hi
// bound the region weight.
struct GcaConfig {
    int patch_size = 3;
    double lambda_self = -1e4;
    double clamp_lo = 0.1;
    double clamp_hi = 10.0;
    double unknown_threshold = 0.5;
    double eps_norm = 1e-6;
    // Alternative region rule: any unknown coverage marks a feature cell
    // unknown (instead of pooled coverage > threshold).
    bool any_unknown_rule = false;
    // Normalize the propagation scatter by the full deconvolution overlap
    // instead of the unknown-query overlap.
    bool overlap_full = false;

    void validate() const {
        if (patch_size < 1 || patch_size % 2 == 0)
            throw ContractError("gca: patch_size must be odd and positive");
        if (!(clamp_lo < clamp_hi)) throw ContractError("gca: clamp_lo must be < clamp_hi");
        if (!(lambda_self < 0)) throw ContractError("gca: lambda_self must be negative");
        if (!(unknown_threshold > 0.0 && unknown_threshold < 1.0))
            throw ContractError("gca: unknown_threshold must be in (0,1)");
        if (!(eps_norm > 0)) throw ContractError("gca: eps_norm must be positive");
    }
};

}  // namespace gcamat::gca
