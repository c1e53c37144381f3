#pragma once

#include "gcamat/gca/region.hpp"
#include "gcamat/core/ops.hpp"

namespace gcamat::gca {

// Region weight for one key patch: sqrt of the unknown/known area ratio,
// clamped to [clamp_lo, clamp_hi]. Unknown keys get clamp(sqrt(|U|/|K|)),
// known keys clamp(sqrt(|K|/|U|)). With no known patches the unknown weight
// saturates at clamp_hi and the known weight is unused (it takes the limit
// value clamp_lo).
inline double region_weight(const RegionMask& mask, bool key_is_unknown, const GcaConfig& cfg) {
    const int u = mask.num_unknown();
    const int k = mask.num_known();
    if (u < 1) throw ContractError("region_weight: no unknown patches, no queries exist");
    if (k == 0) return key_is_unknown ? cfg.clamp_hi : cfg.clamp_lo;
    double ratio = key_is_unknown ? static_cast<double>(u) / k : static_cast<double>(k) / u;
    return std::min(std::max(std::sqrt(ratio), cfg.clamp_lo), cfg.clamp_hi);
}

// Per-key weight vector (1,1,1,HW).
template <typename T>
Tensor<T> region_weight_vector(const RegionMask& mask, const GcaConfig& cfg) {
    const T wu = static_cast<T>(region_weight(mask, true, cfg));
    const T wk = static_cast<T>(region_weight(mask, false, cfg));
    Tensor<T> w(1, 1, 1, mask.positions());
    for (int i = 0; i < mask.positions(); ++i) w[i] = mask.unknown[i] ? wu : wk;
    return w;
}

// Guided similarity graph for one batch item: normalized inner products of
// every unknown query patch against every feature patch (patch_size window,
// stride 1, zero padding), with the self-match set to lambda_self. guide must
// already be the adapted image feature (1,C,H,W).
template <typename T>
ag::Var<T> similarity_node(const ag::Var<T>& guide, const RegionMask& mask,
                           const GcaConfig& cfg) {
    cfg.validate();
    const Shape s = guide->value.shape();
    if (s.n != 1) throw ContractError("similarity_node takes a single batch item");
    if (s.h != mask.h || s.w != mask.w)
        throw DimensionError("similarity_node: feature " + s.str() + " vs mask grid " +
                             std::to_string(mask.h) + "x" + std::to_string(mask.w));
    const int p = cfg.patch_size;
    const int hw = mask.positions();
    const int nu = mask.num_unknown();

    auto patches = ag::im2col_node(guide, p, p, 1, 1, p / 2, p / 2);     // (1,1,HW,C*p*p)
    auto unit = ag::normalize_rows(patches, static_cast<T>(cfg.eps_norm));
    auto queries = ag::gather_rows(unit, mask.unknown_idx);              // (1,1,U,C*p*p)
    auto sim = ag::matmul(queries, ag::transpose2d(unit));               // (1,1,U,HW)

    Tensor<T> self_mask(1, 1, nu, hw);
    for (int q = 0; q < nu; ++q)
        self_mask[static_cast<std::size_t>(q) * hw + mask.unknown_idx[q]] = T(1);
    return ag::masked_fill(sim, self_mask, static_cast<T>(cfg.lambda_self));
}

// Guided attention scores and the bookkeeping needed for visualization.
template <typename T>
struct AttentionResult {
    Tensor<T> scores;  // (1,1,U,HW), each row sums to 1
    std::vector<int> query_idx;                  // linear feature positions of queries
    std::vector<std::pair<int, int>> argmax_xy;  // per query: (x', y') of top score
    T w_unknown = T(1), w_known = T(1);
    int feat_h = 0, feat_w = 0;

    bool empty() const { return query_idx.empty(); }
};

// argmax per row over the weighted (pre-softmax) scores; ties resolved by
// lowest linear index. Softmax is monotone, so this matches the post-softmax
// argmax while staying exact in the presence of underflow.
template <typename T>
void record_argmax(const Tensor<T>& weighted, const RegionMask& mask, AttentionResult<T>& out) {
    const int nu = weighted.shape().h, hw = weighted.shape().w;
    out.argmax_xy.resize(nu);
    for (int q = 0; q < nu; ++q) {
        const T* row = weighted.data() + static_cast<std::size_t>(q) * hw;
        int best = 0;
        for (int k = 1; k < hw; ++k)
            if (row[k] > row[best]) best = k;
        out.argmax_xy[q] = {best % mask.w, best / mask.w};
    }
}

// Scaled softmax over keys. Returns the attention node; fills `capture` when
// it is non-null.
template <typename T>
ag::Var<T> attention_node(const ag::Var<T>& similarity, const RegionMask& mask,
                          const GcaConfig& cfg, AttentionResult<T>* capture = nullptr) {
    auto wvec = ag::constant(region_weight_vector<T>(mask, cfg));
    auto weighted = ag::mul_lastdim(similarity, wvec);
    auto attn = ag::softmax(weighted, 3);
    if (capture) {
        capture->scores = attn->value;
        capture->query_idx = mask.unknown_idx;
        capture->w_unknown = static_cast<T>(region_weight(mask, true, cfg));
        capture->w_known = static_cast<T>(region_weight(mask, false, cfg));
        capture->feat_h = mask.h;
        capture->feat_w = mask.w;
        record_argmax(weighted->value, mask, *capture);
    }
    return attn;
}

// Plain-tensor entry points used by the tests and the visualizer. They run
// the same graph ops on constant leaves.
template <typename T>
Tensor<T> guided_similarity(const Tensor<T>& image_feat, const RegionMask& mask,
                            const GcaConfig& cfg) {
    return similarity_node(ag::constant(image_feat), mask, cfg)->value;
}

template <typename T>
AttentionResult<T> guided_attention(const Tensor<T>& similarity, const RegionMask& mask,
                                    const GcaConfig& cfg) {
    AttentionResult<T> res;
    attention_node(ag::constant(similarity), mask, cfg, &res);
    return res;
}

}  // namespace gcamat::gca
