#pragma once

#include "gcamat/nn/batchnorm.hpp"
#include "gcamat/nn/conv2d.hpp"

namespace gcamat::nn {

// conv -> SN (on the weight) -> BN -> ReLU
template <typename T>
class ConvBnRelu {
public:
    ConvBnRelu() = default;
    ConvBnRelu(int cin, int cout, int k, int stride, Pcg32& rng)
        : conv_(cin, cout, k, stride, k / 2, /*bias=*/false, /*spectral=*/true, rng),
          bn_(cout) {}

    ag::Var<T> forward(const ag::Var<T>& x, Mode mode) {
        return ag::relu(bn_.forward(conv_.forward(x, mode), mode));
    }

    void register_into(ParamSet<T>& ps, const std::string& p) {
        conv_.register_into(ps, p + ".conv");
        bn_.register_into(ps, p + ".bn");
    }

    Conv2d<T>& conv() { return conv_; }
    BatchNorm<T>& bn() { return bn_; }

private:
    Conv2d<T> conv_;
    BatchNorm<T> bn_;
};

// Pre-add residual block: out = bn2(conv2(relu(bn1(conv1(x))))) + proj(x).
// With conv2 zero-initialized the block is exactly the (projected) input.
template <typename T>
class ResidualBlock {
public:
    ResidualBlock() = default;
    ResidualBlock(int cin, int cout, int stride, Pcg32& rng)
        : conv1_(cin, cout, 3, stride, 1, false, true, rng),
          bn1_(cout),
          conv2_(cout, cout, 3, 1, 1, false, true, rng),
          bn2_(cout),
          has_proj_(stride != 1 || cin != cout) {
        if (has_proj_) {
            proj_ = Conv2d<T>(cin, cout, 1, stride, 0, false, true, rng);
            proj_bn_ = BatchNorm<T>(cout);
        }
    }

    ag::Var<T> forward(const ag::Var<T>& x, Mode mode) {
        auto h = ag::relu(bn1_.forward(conv1_.forward(x, mode), mode));
        auto r = bn2_.forward(conv2_.forward(h, mode), mode);
        auto s = has_proj_ ? proj_bn_.forward(proj_.forward(x, mode), mode) : x;
        return ag::add(r, s);
    }

    void register_into(ParamSet<T>& ps, const std::string& p) {
        conv1_.register_into(ps, p + ".conv1");
        bn1_.register_into(ps, p + ".bn1");
        conv2_.register_into(ps, p + ".conv2");
        bn2_.register_into(ps, p + ".bn2");
        if (has_proj_) {
            proj_.register_into(ps, p + ".proj");
            proj_bn_.register_into(ps, p + ".proj_bn");
        }
    }

    Conv2d<T>& conv2() { return conv2_; }

private:
    Conv2d<T> conv1_;
    BatchNorm<T> bn1_;
    Conv2d<T> conv2_;
    BatchNorm<T> bn2_;
    bool has_proj_ = false;
    Conv2d<T> proj_;
    BatchNorm<T> proj_bn_;
};

// Two-layer shortcut mapping encoder features (or the raw input) to decoder
// channel counts. Spatial size is preserved.
template <typename T>
class ShortcutBlock {
public:
    ShortcutBlock() = default;
    ShortcutBlock(int cin, int cout, Pcg32& rng)
        : conv1_(cin, cout, 3, 1, 1, false, true, rng),
          bn1_(cout),
          conv2_(cout, cout, 3, 1, 1, false, true, rng),
          bn2_(cout) {}

    ag::Var<T> forward(const ag::Var<T>& x, Mode mode) {
        auto h = ag::relu(bn1_.forward(conv1_.forward(x, mode), mode));
        return bn2_.forward(conv2_.forward(h, mode), mode);
    }

    void register_into(ParamSet<T>& ps, const std::string& p) {
        conv1_.register_into(ps, p + ".conv1");
        bn1_.register_into(ps, p + ".bn1");
        conv2_.register_into(ps, p + ".conv2");
        bn2_.register_into(ps, p + ".bn2");
    }

private:
    Conv2d<T> conv1_;
    BatchNorm<T> bn1_;
    Conv2d<T> conv2_;
    BatchNorm<T> bn2_;
};

}  // namespace gcamat::nn
