#pragma once

#include "gcamat/gca/attention.hpp"
#include "gcamat/nn/conv2d.hpp"

namespace gcamat::gca {

// Overlap counts for the propagation scatter. By default only stamps from
// unknown queries are counted; with cfg.overlap_full every feature position
// contributes a stamp (the full-deconvolution normalization).
template <typename T>
Tensor<T> propagation_counts(const RegionMask& mask, const GcaConfig& cfg) {
    const int p = cfg.patch_size, half = p / 2;
    Tensor<T> cnt(1, 1, mask.h, mask.w);
    for (int y = 0; y < mask.h; ++y)
        for (int x = 0; x < mask.w; ++x) {
            if (!cfg.overlap_full && !mask.unknown[static_cast<std::size_t>(y) * mask.w + x])
                continue;
            for (int dy = -half; dy <= half; ++dy)
                for (int dx = -half; dx <= half; ++dx) {
                    int py = y + dy, px = x + dx;
                    if (py >= 0 && py < mask.h && px >= 0 && px < mask.w)
                        cnt.at(0, 0, py, px) += T(1);
                }
        }
    return cnt;
}

// Scatter per-query patch rows back onto the feature grid, centering row q at
// its query position, and average overlapping writes by the precomputed
// counts. cols is (1,1,U,C*p*p) with (c,ky,kx) column order.
template <typename T>
ag::Var<T> scatter_average_node(const ag::Var<T>& cols, const RegionMask& mask, int channels,
                                const GcaConfig& cfg) {
    const int p = cfg.patch_size, half = p / 2;
    const int nu = mask.num_unknown();
    const Shape cs = cols->value.shape();
    if (cs.h != nu || cs.w != channels * p * p)
        throw DimensionError("scatter_average_node: column matrix " + cs.str() +
                             " does not match " + std::to_string(nu) + " queries x " +
                             std::to_string(channels * p * p));
    Tensor<T> counts = propagation_counts<T>(mask, cfg);

    Tensor<T> out(1, channels, mask.h, mask.w);
    for (int q = 0; q < nu; ++q) {
        const int cy = mask.unknown_idx[q] / mask.w;
        const int cx = mask.unknown_idx[q] % mask.w;
        const T* row = cols->value.data() + static_cast<std::size_t>(q) * cs.w;
        for (int c = 0; c < channels; ++c)
            for (int ky = 0; ky < p; ++ky) {
                int py = cy + ky - half;
                if (py < 0 || py >= mask.h) continue;
                for (int kx = 0; kx < p; ++kx) {
                    int px = cx + kx - half;
                    if (px < 0 || px >= mask.w) continue;
                    out.at(0, c, py, px) += row[(static_cast<std::size_t>(c) * p + ky) * p + kx];
                }
            }
    }
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < mask.h; ++y)
            for (int x = 0; x < mask.w; ++x) {
                T cnt = counts.at(0, 0, y, x);
                if (cnt > T(0)) out.at(0, c, y, x) /= cnt;
            }

    return ag::make_node<T>(std::move(out), {cols},
                            [cols, mask, channels, cfg, counts](ag::Node<T>& n) {
        if (!cols->requires_grad) return;
        const int p = cfg.patch_size, half = p / 2;
        const int nu = mask.num_unknown();
        Tensor<T> g(cols->value.shape());
        for (int q = 0; q < nu; ++q) {
            const int cy = mask.unknown_idx[q] / mask.w;
            const int cx = mask.unknown_idx[q] % mask.w;
            T* row = g.data() + static_cast<std::size_t>(q) * g.shape().w;
            for (int c = 0; c < channels; ++c)
                for (int ky = 0; ky < p; ++ky) {
                    int py = cy + ky - half;
                    if (py < 0 || py >= mask.h) continue;
                    for (int kx = 0; kx < p; ++kx) {
                        int px = cx + kx - half;
                        if (px < 0 || px >= mask.w) continue;
                        T cnt = counts.at(0, 0, py, px);
                        row[(static_cast<std::size_t>(c) * p + ky) * p + kx] =
                            n.grad.at(0, c, py, px) / cnt;
                    }
                }
        }
        ag::accumulate(cols, g);
    });
}

// Attention-weighted propagation of alpha features, masked to the unknown
// region. Output is the raw reconstruction (before adaptation and residual).
template <typename T>
ag::Var<T> propagate_node(const ag::Var<T>& alpha_feat, const ag::Var<T>& attention,
                          const RegionMask& mask, const GcaConfig& cfg) {
    const Shape as = alpha_feat->value.shape();
    if (as.n != 1) throw ContractError("propagate_node takes a single batch item");
    if (as.h != mask.h || as.w != mask.w)
        throw DimensionError("propagate_node: alpha features " + as.str() +
                             " do not match the feature grid " + std::to_string(mask.h) + "x" +
                             std::to_string(mask.w));
    const int p = cfg.patch_size;
    auto patches = ag::im2col_node(alpha_feat, p, p, 1, 1, p / 2, p / 2);  // (1,1,HW,Ca*p*p)
    auto mixed = ag::matmul(attention, patches);                           // (1,1,U,Ca*p*p)
    auto recon = scatter_average_node(mixed, mask, as.c, cfg);
    return ag::mul(recon, ag::constant(mask_tensor_channels<T>(mask, as.c)));
}

// Plain-tensor propagate: reconstruction, optional 1x1 adaptation weight
// (Cout=Ca, Cin=Ca, 1, 1, no bias), then the masked residual sum. With no
// unknown queries the input is returned unchanged.
template <typename T>
Tensor<T> propagate(const Tensor<T>& alpha_feat, const AttentionResult<T>& attn,
                    const RegionMask& mask, const GcaConfig& cfg,
                    const Tensor<T>* adapt_weight = nullptr) {
    if (alpha_feat.shape().h != mask.h || alpha_feat.shape().w != mask.w)
        throw DimensionError("propagate: alpha feature / mask grid mismatch");
    if (mask.num_unknown() == 0) return alpha_feat;
    auto a = ag::constant(alpha_feat);
    auto r = propagate_node(a, ag::constant(attn.scores), mask, cfg);
    if (adapt_weight) {
        auto w = ag::constant(*adapt_weight);
        r = nn::conv2d_op(r, w, ag::Var<T>{}, 1, 0);
    }
    auto out = ag::masked_residual_add(a, r, mask_tensor_channels<T>(mask, alpha_feat.shape().c));
    return out->value;
}

}  // namespace gcamat::gca
