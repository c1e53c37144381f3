#pragma once

#include <optional>

#include "gcamat/gca/block.hpp"
#include "gcamat/model/config.hpp"
#include "gcamat/nn/blocks.hpp"

namespace gcamat::model {

namespace detail {

// Reflect-pad right/bottom only (plain tensors, inference path).
template <typename T>
Tensor<T> pad_reflect_br(const Tensor<T>& x, int pb, int pr) {
    const Shape s = x.shape();
    if (pb > s.h - 1 || pr > s.w - 1)
        throw DimensionError("reflect padding wider than input minus one");
    Tensor<T> out(s.n, s.c, s.h + pb, s.w + pr);
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int h = 0; h < s.h + pb; ++h) {
                int sh = h < s.h ? h : 2 * s.h - 2 - h;
                for (int w = 0; w < s.w + pr; ++w) {
                    int sw = w < s.w ? w : 2 * s.w - 2 - w;
                    out.at(n, c, h, w) = x.at(n, c, sh, sw);
                }
            }
    return out;
}

template <typename T>
Tensor<T> crop(const Tensor<T>& x, int h, int w) {
    Tensor<T> out(x.shape().n, x.shape().c, h, w);
    for (int n = 0; n < out.shape().n; ++n)
        for (int c = 0; c < out.shape().c; ++c)
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx) out.at(n, c, y, xx) = x.at(n, c, y, xx);
    return out;
}

template <typename T>
Tensor<T> slice_item(const Tensor<T>& x, int n) {
    const Shape s = x.shape();
    Tensor<T> out(1, s.c, s.h, s.w);
    const T* src = x.data() + static_cast<std::size_t>(n) * s.c * s.h * s.w;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = src[i];
    return out;
}

}  // namespace detail

// Decoder stage: nearest-neighbor x2, a channel-adjusting conv and one
// residual block (nearest + conv avoids checkerboard artifacts).
template <typename T>
class UpStage {
public:
    UpStage() = default;
    UpStage(int cin, int cout, Pcg32& rng) : conv_(cin, cout, 3, 1, rng), res_(cout, cout, 1, rng) {}

    ag::Var<T> forward(const ag::Var<T>& x, nn::Mode mode) {
        return res_.forward(conv_.forward(ag::upsample_nearest2x(x), mode), mode);
    }
    void register_into(nn::ParamSet<T>& ps, const std::string& p) {
        conv_.register_into(ps, p + ".conv");
        res_.register_into(ps, p + ".res");
    }

private:
    nn::ConvBnRelu<T> conv_;
    nn::ResidualBlock<T> res_;
};

// The matting network: residual encoder-decoder over the 6-channel
// image+trimap input, encoder features fused into the decoder just before
// each upsampling stage, the raw input forwarded to the last convolution
// through a shortcut block, and (optionally) two guided attention blocks
// placed symmetrically at the 1/8-resolution stage. The image-feature branch
// sees only the 3-channel image.
template <typename T>
class MattingNetwork {
public:
    explicit MattingNetwork(const ModelConfig& cfg, uint64_t seed = 0) : cfg_(cfg) {
        cfg_.validate();
        Pcg32 rng(mix_seed(seed, 0xA11CE));
        const int B = cfg_.base_channels;

        stem_ = nn::ConvBnRelu<T>(cfg_.input_channels, B, 3, 1, rng);
        for (int i = 0; i < cfg_.stages; ++i) {
            int cin = i == 0 ? B : cfg_.stage_channels(i - 1);
            int cout = cfg_.stage_channels(i);
            std::vector<nn::ResidualBlock<T>> stage;
            stage.emplace_back(cin, cout, 2, rng);
            for (int j = 1; j < cfg_.blocks_per_stage; ++j) stage.emplace_back(cout, cout, 1, rng);
            encoder_.push_back(std::move(stage));
        }

        // decoder mirrors the encoder back to full resolution
        for (int i = cfg_.stages - 1; i >= 0; --i) {
            int cin = cfg_.stage_channels(i);
            int cout = i == 0 ? B : cfg_.stage_channels(i - 1);
            decoder_.emplace_back(cin, cout, rng);
        }
        for (int i = 0; i < cfg_.stages - 1; ++i)
            shortcuts_.emplace_back(cfg_.stage_channels(i), cfg_.stage_channels(i), rng);
        shortcut_in_ = nn::ShortcutBlock<T>(cfg_.input_channels, B, rng);
        head_ = nn::Conv2d<T>(B, 1, 3, 1, 1, /*bias=*/true, /*spectral=*/true, rng);

        if (cfg_.use_gca) {
            img_conv1_ = nn::Conv2d<T>(3, B, 3, 2, 1, false, true, rng);
            img_conv2_ = nn::Conv2d<T>(B, 2 * B, 3, 2, 1, false, true, rng);
            img_conv3_ = nn::Conv2d<T>(2 * B, cfg_.guide_channels(), 3, 2, 1, false, true, rng);
            gca_enc_ = gca::GcaBlock<T>(cfg_.guide_channels(), cfg_.guide_channels(), cfg_.gca, rng);
            gca_dec_ = gca::GcaBlock<T>(cfg_.guide_channels(), cfg_.guide_channels(), cfg_.gca, rng);
        }

        register_all();
    }

    const ModelConfig& config() const { return cfg_; }
    nn::ParamSet<T>& params() { return params_; }

    void set_capture_attention(bool on) {
        capture_ = on;
        if (cfg_.use_gca) {
            gca_enc_->set_capture(on);
            gca_dec_->set_capture(on);
        }
    }
    const std::vector<gca::AttentionResult<T>>& encoder_attention() const {
        return gca_enc_->captured();
    }
    const std::vector<gca::AttentionResult<T>>& decoder_attention() const {
        return gca_dec_->captured();
    }

    // Region masks at the attention stage, one per batch item.
    std::vector<gca::RegionMask> attention_masks(const Tensor<T>& trimap) const {
        const Shape s = trimap.shape();
        std::vector<gca::RegionMask> masks;
        for (int n = 0; n < s.n; ++n)
            masks.push_back(gca::classify_regions(detail::slice_item(trimap, n),
                                                  s.h / cfg_.gca_downsample,
                                                  s.w / cfg_.gca_downsample, cfg_.gca));
        return masks;
    }

    // Full forward pass. H and W must be divisible by size_multiple(); use
    // infer_full for arbitrary sizes.
    ag::Var<T> forward(const Tensor<T>& image, const Tensor<T>& trimap, nn::Mode mode) {
        const Shape is = image.shape(), ts = trimap.shape();
        if (is.c != 3) throw ContractError("forward: image must have 3 channels");
        if (ts.n != is.n || ts.h != is.h || ts.w != is.w)
            throw ValidationError("forward: image " + is.str() + " and trimap " + ts.str() +
                                  " disagree");
        const int mult = cfg_.size_multiple();
        if (is.h % mult != 0 || is.w % mult != 0)
            throw ContractError("forward: spatial dims must be divisible by " +
                                std::to_string(mult) + " (use infer_full)");
        gca::validate_one_hot(trimap);

        auto img = ag::constant(image);
        auto input = ag::concat<T>({img, ag::constant(trimap)}, 1);

        std::vector<gca::RegionMask> masks;
        ag::Var<T> guide;
        if (cfg_.use_gca) {
            masks = attention_masks(trimap);
            // low-level appearance features from the merged image only
            auto f = ag::relu(img_conv1_->forward(img, mode));
            f = ag::relu(img_conv2_->forward(f, mode));
            guide = img_conv3_->forward(f, mode);
        }

        // encoder
        auto x = stem_.forward(input, mode);
        std::vector<ag::Var<T>> skips;  // per stage output (post-GCA at the attention stage)
        const int gca_stage = 2;        // output at 1/8 resolution
        for (int i = 0; i < cfg_.stages; ++i) {
            for (auto& block : encoder_[i]) x = block.forward(x, mode);
            if (cfg_.use_gca && i == gca_stage) x = gca_enc_->forward(x, guide, masks, mode);
            skips.push_back(x);
        }

        // decoder with encoder fusion just before each upsampling stage
        for (int d = 0; d < cfg_.stages; ++d) {
            int enc_level = cfg_.stages - 1 - d;  // resolution level entering this up stage
            if (enc_level < cfg_.stages - 1) {
                if (cfg_.use_gca && enc_level == gca_stage)
                    x = gca_dec_->forward(x, guide, masks, mode);
                x = ag::add(x, shortcuts_[enc_level].forward(skips[enc_level], mode));
            }
            x = decoder_[d].forward(x, mode);
        }

        // raw-input shortcut into the last convolution, then clamp to [0,1]
        x = ag::add(x, shortcut_in_.forward(input, mode));
        return ag::clamp(head_.forward(x, mode), T(0), T(1));
    }

    // Whole-image inference: reflect-pad to the next size multiple, run in
    // eval mode, crop back.
    Tensor<T> infer_full(const Tensor<T>& image, const Tensor<T>& trimap) {
        const Shape is = image.shape(), ts = trimap.shape();
        if (ts.n != is.n || ts.h != is.h || ts.w != is.w)
            throw ValidationError("infer_full: image " + is.str() + " and trimap " + ts.str() +
                                  " disagree");
        const int mult = cfg_.size_multiple();
        if (is.h < mult || is.w < mult)
            throw ContractError("infer_full: input must be at least " + std::to_string(mult) +
                                " pixels on each side");
        int ph = (mult - is.h % mult) % mult;
        int pw = (mult - is.w % mult) % mult;
        Tensor<T> img = ph || pw ? detail::pad_reflect_br(image, ph, pw) : image;
        Tensor<T> tri = ph || pw ? detail::pad_reflect_br(trimap, ph, pw) : trimap;
        auto out = forward(img, tri, nn::Mode::Eval);
        return ph || pw ? detail::crop(out->value, is.h, is.w) : out->value;
    }

    // Alpha estimate plus the recomposited image over known foreground and
    // background layers.
    std::pair<Tensor<T>, Tensor<T>> predict_and_composite(const Tensor<T>& image,
                                                          const Tensor<T>& trimap,
                                                          const Tensor<T>& fg,
                                                          const Tensor<T>& bg) {
        if (!fg.same_shape(image) || !bg.same_shape(image))
            throw ContractError("predict_and_composite needs fg/bg layers shaped like the image");
        Tensor<T> alpha = infer_full(image, trimap);
        Tensor<T> comp(image.shape());
        const Shape s = image.shape();
        for (int n = 0; n < s.n; ++n)
            for (int c = 0; c < s.c; ++c)
                for (int h = 0; h < s.h; ++h)
                    for (int w = 0; w < s.w; ++w) {
                        T a = alpha.at(n, 0, h, w);
                        comp.at(n, c, h, w) = a * fg.at(n, c, h, w) + (T(1) - a) * bg.at(n, c, h, w);
                    }
        return {std::move(alpha), std::move(comp)};
    }

private:
    void register_all() {
        stem_.register_into(params_, "stem");
        for (int i = 0; i < cfg_.stages; ++i)
            for (std::size_t j = 0; j < encoder_[i].size(); ++j)
                encoder_[i][j].register_into(params_, "enc" + std::to_string(i) + ".b" +
                                                          std::to_string(j));
        for (std::size_t d = 0; d < decoder_.size(); ++d)
            decoder_[d].register_into(params_, "dec" + std::to_string(d));
        for (std::size_t i = 0; i < shortcuts_.size(); ++i)
            shortcuts_[i].register_into(params_, "short" + std::to_string(i));
        shortcut_in_.register_into(params_, "short_in");
        head_.register_into(params_, "head");
        if (cfg_.use_gca) {
            img_conv1_->register_into(params_, "img.conv1");
            img_conv2_->register_into(params_, "img.conv2");
            img_conv3_->register_into(params_, "img.conv3");
            gca_enc_->register_into(params_, "gca_enc");
            gca_dec_->register_into(params_, "gca_dec");
        }
    }

    ModelConfig cfg_;
    nn::ParamSet<T> params_;
    nn::ConvBnRelu<T> stem_;
    std::vector<std::vector<nn::ResidualBlock<T>>> encoder_;
    std::vector<UpStage<T>> decoder_;
    std::vector<nn::ShortcutBlock<T>> shortcuts_;
    nn::ShortcutBlock<T> shortcut_in_;
    nn::Conv2d<T> head_;
    std::optional<nn::Conv2d<T>> img_conv1_, img_conv2_, img_conv3_;
    std::optional<gca::GcaBlock<T>> gca_enc_, gca_dec_;
    bool capture_ = false;
};

}  // namespace gcamat::model
