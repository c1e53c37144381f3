#pragma once

#include "gcamat/gca/propagate.hpp"

namespace gcamat::gca {

// The guided contextual attention block. Low-level image features pass
// through a 1x1 adaptation convolution and guide the attention; alpha
// features are propagated along the attention graph and added back through a
// second, zero-initialized 1x1 adaptation convolution. With no unknown
// queries (or zero adaptation weights) the block is an identity on the alpha
// features; the known region is always a bit-exact copy.
template <typename T>
class GcaBlock {
public:
    GcaBlock() = default;
    GcaBlock(int guide_channels, int alpha_channels, const GcaConfig& cfg, Pcg32& rng)
        : cfg_(cfg),
          adapt_guide_(guide_channels, guide_channels, 1, 1, 0, /*bias=*/false,
                       /*spectral=*/true, rng),
          adapt_out_(alpha_channels, alpha_channels, 1, 1, 0, /*bias=*/false,
                     /*spectral=*/true, rng, nn::WeightInit::Zero) {
        cfg_.validate();
    }

    // alpha_feat: (N,Ca,h,w), image_feat: (N,Cg,h,w), one RegionMask per item.
    ag::Var<T> forward(const ag::Var<T>& alpha_feat, const ag::Var<T>& image_feat,
                       const std::vector<RegionMask>& masks, nn::Mode mode) {
        const Shape as = alpha_feat->value.shape();
        const Shape gs = image_feat->value.shape();
        if (as.n != gs.n || as.h != gs.h || as.w != gs.w)
            throw DimensionError("gca: alpha features " + as.str() +
                                 " and image features " + gs.str() + " disagree");
        if (static_cast<int>(masks.size()) != as.n)
            throw ContractError("gca: need one region mask per batch item");
        if (capture_) captured_.assign(as.n, AttentionResult<T>{});

        auto guide = adapt_guide_.forward(image_feat, mode);

        std::vector<ag::Var<T>> items;
        items.reserve(as.n);
        for (int n = 0; n < as.n; ++n) {
            auto a = ag::slice(alpha_feat, Shape{n, 0, 0, 0}, Shape{1, as.c, as.h, as.w});
            const RegionMask& m = masks[n];
            if (m.num_unknown() == 0) {
                if (capture_) {
                    captured_[n].feat_h = m.h;
                    captured_[n].feat_w = m.w;
                }
                items.push_back(a);  // no queries: the block is an identity
                continue;
            }
            auto g = ag::slice(guide, Shape{n, 0, 0, 0}, Shape{1, gs.c, gs.h, gs.w});
            auto sim = similarity_node(g, m, cfg_);
            auto attn = attention_node(sim, m, cfg_, capture_ ? &captured_[n] : nullptr);
            auto recon = propagate_node(a, attn, m, cfg_);
            auto adapted = adapt_out_.forward(recon, mode);
            items.push_back(
                ag::masked_residual_add(a, adapted, mask_tensor_channels<T>(m, as.c)));
        }
        return as.n == 1 ? items[0] : ag::concat(items, 0);
    }

    void register_into(nn::ParamSet<T>& ps, const std::string& p) {
        adapt_guide_.register_into(ps, p + ".adapt_guide");
        adapt_out_.register_into(ps, p + ".adapt_out");
    }

    void set_capture(bool on) { capture_ = on; }
    const std::vector<AttentionResult<T>>& captured() const { return captured_; }
    const GcaConfig& config() const { return cfg_; }
    nn::Conv2d<T>& adapt_guide() { return adapt_guide_; }
    nn::Conv2d<T>& adapt_out() { return adapt_out_; }

private:
    GcaConfig cfg_;
    nn::Conv2d<T> adapt_guide_;
    nn::Conv2d<T> adapt_out_;
    bool capture_ = false;
    std::vector<AttentionResult<T>> captured_;
};

}  // namespace gcamat::gca
