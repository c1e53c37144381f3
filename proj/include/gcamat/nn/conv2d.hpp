#pragma once

#include <optional>

#include "gcamat/nn/spectral_norm.hpp"

namespace gcamat::nn {

// Fused convolution op: im2col + GEMM forward, analytic backward for input,
// weight and bias. The column matrix is recomputed in the backward pass
// instead of being cached.
template <typename T>
ag::Var<T> conv2d_op(const ag::Var<T>& x, const ag::Var<T>& w, const ag::Var<T>& b,
                     int stride, int pad) {
    const Shape xs = x->value.shape();
    const Shape ws = w->value.shape();  // (Cout, Cin, kh, kw)
    if (xs.c != ws.c)
        throw DimensionError("conv2d: input channels " + std::to_string(xs.c) +
                             " do not match weight Cin " + std::to_string(ws.c));
    if (b && b->value.shape() != Shape{1, ws.n, 1, 1})
        throw DimensionError("conv2d: bias must be (1,Cout,1,1)");
    PatchGeom g{xs, ws.h, ws.w, stride, stride, pad, pad};
    g.validate();
    const int R = g.rows(), K = g.cols(), Cout = ws.n;
    const int OH = g.out_h(), OW = g.out_w();

    Tensor<T> cols = im2col(x->value, g);
    Tensor<T> rows(1, 1, R, Cout);
    gemm_nt(R, Cout, K, cols.data(), w->value.data(), rows.data(), false);

    Tensor<T> out(xs.n, Cout, OH, OW);
    for (int n = 0; n < xs.n; ++n)
        for (int oh = 0; oh < OH; ++oh)
            for (int ow = 0; ow < OW; ++ow) {
                const T* src = rows.data() + (static_cast<std::size_t>(n) * OH * OW +
                                              static_cast<std::size_t>(oh) * OW + ow) * Cout;
                for (int co = 0; co < Cout; ++co)
                    out.at(n, co, oh, ow) = b ? src[co] + b->value[co] : src[co];
            }

    std::vector<ag::Var<T>> parents{x, w};
    if (b) parents.push_back(b);
    return ag::make_node<T>(std::move(out), std::move(parents), [x, w, b, g](ag::Node<T>& n) {
        const Shape xs = x->value.shape();
        const int R = g.rows(), K = g.cols(), Cout = w->value.shape().n;
        const int OH = g.out_h(), OW = g.out_w();

        Tensor<T> grows(1, 1, R, Cout);
        for (int nn = 0; nn < xs.n; ++nn)
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow) {
                    T* dst = grows.data() + (static_cast<std::size_t>(nn) * OH * OW +
                                             static_cast<std::size_t>(oh) * OW + ow) * Cout;
                    for (int co = 0; co < Cout; ++co) dst[co] = n.grad.at(nn, co, oh, ow);
                }

        if (x->requires_grad) {
            Tensor<T> gcols(1, 1, R, K);
            gemm_nn(R, K, Cout, grows.data(), w->value.data(), gcols.data(), false);
            ag::accumulate(x, col2im_sum(gcols, g));
        }
        if (w->requires_grad) {
            Tensor<T> cols = im2col(x->value, g);
            Tensor<T> gw(w->value.shape());
            gemm_tn(Cout, K, R, grows.data(), cols.data(), gw.data(), false);
            ag::accumulate(w, gw);
        }
        if (b && b->requires_grad) {
            Tensor<T> gb(1, Cout, 1, 1);
            for (int r = 0; r < R; ++r)
                for (int co = 0; co < Cout; ++co)
                    gb[co] += grows[static_cast<std::size_t>(r) * Cout + co];
            ag::accumulate(b, gb);
        }
    });
}

namespace detail {
// NCHW -> (N*H*W) x C row matrix.
template <typename T>
Tensor<T> nchw_to_rows(const Tensor<T>& t) {
    const Shape s = t.shape();
    Tensor<T> rows(1, 1, s.n * s.h * s.w, s.c);
    for (int n = 0; n < s.n; ++n)
        for (int h = 0; h < s.h; ++h)
            for (int w = 0; w < s.w; ++w) {
                T* dst = rows.data() + (static_cast<std::size_t>(n) * s.h * s.w +
                                        static_cast<std::size_t>(h) * s.w + w) * s.c;
                for (int c = 0; c < s.c; ++c) dst[c] = t.at(n, c, h, w);
            }
    return rows;
}
}  // namespace detail

// Transposed convolution, the adjoint geometry of conv2d_op. Weight layout is
// (Cin, Cout, kh, kw); overlapping contributions are summed.
template <typename T>
ag::Var<T> conv_transpose2d_op(const ag::Var<T>& x, const ag::Var<T>& w, const ag::Var<T>& b,
                               int stride, int pad) {
    const Shape xs = x->value.shape();
    const Shape ws = w->value.shape();  // (Cin, Cout, kh, kw)
    if (xs.c != ws.n)
        throw DimensionError("conv_transpose2d: input channels " + std::to_string(xs.c) +
                             " do not match weight Cin " + std::to_string(ws.n));
    const int Cout = ws.c, kh = ws.h, kw = ws.w;
    const int OH = (xs.h - 1) * stride - 2 * pad + kh;
    const int OW = (xs.w - 1) * stride - 2 * pad + kw;
    if (OH < 1 || OW < 1) throw DimensionError("conv_transpose2d: empty output");
    if (b && b->value.shape() != Shape{1, Cout, 1, 1})
        throw DimensionError("conv_transpose2d: bias must be (1,Cout,1,1)");

    // Scatter geometry: windows are placed on the *output* grid, one per
    // input position.
    PatchGeom g{Shape{xs.n, Cout, OH, OW}, kh, kw, stride, stride, pad, pad};
    g.validate();
    const int R = g.rows(), KP = g.cols(), Cin = xs.c;

    Tensor<T> xrows = detail::nchw_to_rows(x->value);
    Tensor<T> cols(1, 1, R, KP);
    gemm_nn(R, KP, Cin, xrows.data(), w->value.data(), cols.data(), false);
    Tensor<T> out = col2im_sum(cols, g);
    if (b)
        for (int n = 0; n < xs.n; ++n)
            for (int co = 0; co < Cout; ++co)
                for (int h = 0; h < OH; ++h)
                    for (int ww = 0; ww < OW; ++ww) out.at(n, co, h, ww) += b->value[co];

    std::vector<ag::Var<T>> parents{x, w};
    if (b) parents.push_back(b);
    return ag::make_node<T>(std::move(out), std::move(parents), [x, w, b, g](ag::Node<T>& n) {
        const Shape xs = x->value.shape();
        const int R = g.rows(), KP = g.cols(), Cin = xs.c;
        const int Cout = g.in.c;

        Tensor<T> gcols = im2col(n.grad, g);  // (1,1,R,KP)
        if (x->requires_grad) {
            Tensor<T> growsx(1, 1, R, Cin);
            gemm_nt(R, Cin, KP, gcols.data(), w->value.data(), growsx.data(), false);
            Tensor<T> gx(xs);
            for (int nn = 0; nn < xs.n; ++nn)
                for (int h = 0; h < xs.h; ++h)
                    for (int ww = 0; ww < xs.w; ++ww) {
                        const T* src = growsx.data() + (static_cast<std::size_t>(nn) * xs.h * xs.w +
                                                        static_cast<std::size_t>(h) * xs.w + ww) * Cin;
                        for (int ci = 0; ci < Cin; ++ci) gx.at(nn, ci, h, ww) = src[ci];
                    }
            ag::accumulate(x, gx);
        }
        if (w->requires_grad) {
            Tensor<T> xrows = detail::nchw_to_rows(x->value);
            Tensor<T> gw(w->value.shape());
            gemm_tn(Cin, KP, R, xrows.data(), gcols.data(), gw.data(), false);
            ag::accumulate(w, gw);
        }
        if (b && b->requires_grad) {
            Tensor<T> gb(1, Cout, 1, 1);
            for (int nn = 0; nn < g.in.n; ++nn)
                for (int co = 0; co < Cout; ++co)
                    for (int h = 0; h < g.in.h; ++h)
                        for (int ww = 0; ww < g.in.w; ++ww) gb[co] += n.grad.at(nn, co, h, ww);
            ag::accumulate(b, gb);
        }
    });
}

enum class WeightInit { Kaiming, Zero };

// Convolution layer with optional bias and spectral normalization.
template <typename T>
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(int cin, int cout, int k, int stride, int pad, bool bias, bool spectral, Pcg32& rng,
           WeightInit init = WeightInit::Kaiming)
        : stride_(stride), pad_(pad), spectral_(spectral) {
        Shape ws{cout, cin, k, k};
        weight_ = ag::param(init == WeightInit::Zero ? Tensor<T>(ws)
                                                     : kaiming_normal<T>(ws, cin * k * k, rng));
        if (bias) bias_ = ag::param(Tensor<T>(1, cout, 1, 1));
        if (spectral) {
            sn_.init(cout, cin * k * k, rng);
            sn_.power_iterate(weight_->value);  // u/v valid from construction
        }
    }

    ag::Var<T> forward(const ag::Var<T>& x, Mode mode) {
        ag::Var<T> w = spectral_ ? sn_.apply(weight_, mode) : weight_;
        return conv2d_op(x, w, bias_, stride_, pad_);
    }

    void register_into(ParamSet<T>& ps, const std::string& prefix) {
        ps.add_param(prefix + ".weight", weight_);
        if (bias_) ps.add_param(prefix + ".bias", bias_);
        if (spectral_) {
            ps.add_state(prefix + ".sn_u", &sn_.u());
            ps.add_state(prefix + ".sn_v", &sn_.v());
        }
    }

    ag::Var<T>& weight() { return weight_; }
    ag::Var<T>& bias() { return bias_; }
    SpectralNorm<T>& sn() { return sn_; }
    bool spectral() const { return spectral_; }

private:
    ag::Var<T> weight_;
    ag::Var<T> bias_;  // null when the layer has no bias
    int stride_ = 1, pad_ = 0;
    bool spectral_ = false;
    SpectralNorm<T> sn_;
};

// Transposed-convolution layer (overlap contributions summed).
template <typename T>
class ConvTranspose2d {
public:
    ConvTranspose2d() = default;
    ConvTranspose2d(int cin, int cout, int k, int stride, int pad, bool bias, Pcg32& rng)
        : stride_(stride), pad_(pad) {
        weight_ = ag::param(kaiming_normal<T>(Shape{cin, cout, k, k}, cin * k * k, rng));
        if (bias) bias_ = ag::param(Tensor<T>(1, cout, 1, 1));
    }

    ag::Var<T> forward(const ag::Var<T>& x, Mode) {
        return conv_transpose2d_op(x, weight_, bias_, stride_, pad_);
    }

    void register_into(ParamSet<T>& ps, const std::string& prefix) {
        ps.add_param(prefix + ".weight", weight_);
        if (bias_) ps.add_param(prefix + ".bias", bias_);
    }

    ag::Var<T>& weight() { return weight_; }

private:
    ag::Var<T> weight_;
    ag::Var<T> bias_;
    int stride_ = 1, pad_ = 0;
};

}  // namespace gcamat::nn
