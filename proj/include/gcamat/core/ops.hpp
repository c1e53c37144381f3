#pragma once

#include <cmath>
#include <vector>

#include "gcamat/core/graph.hpp"
#include "gcamat/core/kernels.hpp"

// Differentiable primitives. Each op computes its value eagerly and registers
// an analytic backward; all of them are covered by finite-difference checks
// in the test suite.

namespace gcamat::ag {

namespace detail {

template <typename T>
void check_same_shape(const Var<T>& a, const Var<T>& b, const char* who) {
    if (!a->value.same_shape(b->value))
        throw DimensionError(std::string(who) + ": shape mismatch " + a->value.shape().str() +
                             " vs " + b->value.shape().str());
}

// Decompose the tensor as [outer, len, inner] around one axis of NCHW.
struct AxisView {
    std::size_t outer, len, inner;
};

inline AxisView axis_view(const Shape& s, int axis) {
    if (axis < 0 || axis > 3) throw DimensionError("axis out of range");
    std::size_t d[4] = {static_cast<std::size_t>(s.n), static_cast<std::size_t>(s.c),
                        static_cast<std::size_t>(s.h), static_cast<std::size_t>(s.w)};
    AxisView v{1, d[axis], 1};
    for (int i = 0; i < axis; ++i) v.outer *= d[i];
    for (int i = axis + 1; i < 4; ++i) v.inner *= d[i];
    return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary / scalar ops
// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    detail::check_same_shape(a, b, "add");
    Tensor<T> out(a->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] + b->value[i];
    return make_node<T>(std::move(out), {a, b}, [a, b](Node<T>& n) {
        accumulate(a, n.grad);
        accumulate(b, n.grad);
    });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    detail::check_same_shape(a, b, "sub");
    Tensor<T> out(a->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] - b->value[i];
    return make_node<T>(std::move(out), {a, b}, [a, b](Node<T>& n) {
        accumulate(a, n.grad);
        if (b->requires_grad) {
            Tensor<T> g(n.grad.shape());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = -n.grad[i];
            accumulate(b, g);
        }
    });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    detail::check_same_shape(a, b, "mul");
    Tensor<T> out(a->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] * b->value[i];
    return make_node<T>(std::move(out), {a, b}, [a, b](Node<T>& n) {
        if (a->requires_grad) {
            Tensor<T> g(n.grad.shape());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = n.grad[i] * b->value[i];
            accumulate(a, g);
        }
        if (b->requires_grad) {
            Tensor<T> g(n.grad.shape());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = n.grad[i] * a->value[i];
            accumulate(b, g);
        }
    });
}

template <typename T>
Var<T> add_scalar(const Var<T>& x, T s) {
    Tensor<T> out(x->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x->value[i] + s;
    return make_node<T>(std::move(out), {x}, [x](Node<T>& n) { accumulate(x, n.grad); });
}

template <typename T>
Var<T> mul_scalar(const Var<T>& x, T s) {
    Tensor<T> out(x->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x->value[i] * s;
    return make_node<T>(std::move(out), {x}, [x, s](Node<T>& n) {
        if (!x->requires_grad) return;
        Tensor<T> g(n.grad.shape());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = n.grad[i] * s;
        accumulate(x, g);
    });
}

template <typename T>
Var<T> neg(const Var<T>& x) {
    return mul_scalar(x, T(-1));
}

// Multiply a tensor by a scalar-valued node (shape 1x1x1x1).
template <typename T>
Var<T> scale_by(const Var<T>& x, const Var<T>& s) {
    if (s->value.size() != 1) throw DimensionError("scale_by: scale must be scalar");
    T sv = s->value[0];
    Tensor<T> out(x->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x->value[i] * sv;
    return make_node<T>(std::move(out), {x, s}, [x, s, sv](Node<T>& n) {
        if (x->requires_grad) {
            Tensor<T> g(n.grad.shape());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = n.grad[i] * sv;
            accumulate(x, g);
        }
        if (s->requires_grad) {
            Tensor<T> g(1, 1, 1, 1);
            for (std::size_t i = 0; i < n.grad.size(); ++i) g[0] += n.grad[i] * x->value[i];
            accumulate(s, g);
        }
    });
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities
// ---------------------------------------------------------------------------

template <typename T>
Var<T> relu(const Var<T>& x) {
    Tensor<T> out(x->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x->value[i] > T(0) ? x->value[i] : T(0);
    return make_node<T>(std::move(out), {x}, [x](Node<T>& n) {
        if (!x->requires_grad) return;
        Tensor<T> g(n.grad.shape());
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] = x->value[i] > T(0) ? n.grad[i] : T(0);
        accumulate(x, g);
    });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
    Tensor<T> out(x->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = x->value[i] > T(0) ? x->value[i] : slope * x->value[i];
    return make_node<T>(std::move(out), {x}, [x, slope](Node<T>& n) {
        if (!x->requires_grad) return;
        Tensor<T> g(n.grad.shape());
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] = x->value[i] > T(0) ? n.grad[i] : slope * n.grad[i];
        accumulate(x, g);
    });
}

// |x| with subgradient 0 at the kink.
template <typename T>
Var<T> abs_val(const Var<T>& x) {
    Tensor<T> out(x->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(x->value[i]);
    return make_node<T>(std::move(out), {x}, [x](Node<T>& n) {
        if (!x->requires_grad) return;
        Tensor<T> g(n.grad.shape());
        for (std::size_t i = 0; i < g.size(); ++i) {
            T v = x->value[i];
            g[i] = v > T(0) ? n.grad[i] : (v < T(0) ? -n.grad[i] : T(0));
        }
        accumulate(x, g);
    });
}

// x^e. Non-integer exponents require strictly positive inputs.
template <typename T>
Var<T> pow_scalar(const Var<T>& x, T e) {
    bool integral = e == std::floor(e);
    Tensor<T> out(x->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!integral && x->value[i] <= T(0))
            throw NumericError("pow_scalar: non-positive base at index " + std::to_string(i));
        out[i] = std::pow(x->value[i], e);
    }
    return make_node<T>(std::move(out), {x}, [x, e](Node<T>& n) {
        if (!x->requires_grad) return;
        Tensor<T> g(n.grad.shape());
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] = n.grad[i] * e * std::pow(x->value[i], e - T(1));
        accumulate(x, g);
    });
}

template <typename T>
Var<T> clamp(const Var<T>& x, T lo, T hi) {
    Tensor<T> out(x->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::min(std::max(x->value[i], lo), hi);
    return make_node<T>(std::move(out), {x}, [x, lo, hi](Node<T>& n) {
        if (!x->requires_grad) return;
        Tensor<T> g(n.grad.shape());
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] = (x->value[i] > lo && x->value[i] < hi) ? n.grad[i] : T(0);
        accumulate(x, g);
    });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename T>
Var<T> sum_all(const Var<T>& x) {
    Tensor<T> out(1, 1, 1, 1);
    for (std::size_t i = 0; i < x->value.size(); ++i) out[0] += x->value[i];
    return make_node<T>(std::move(out), {x}, [x](Node<T>& n) {
        if (!x->requires_grad) return;
        Tensor<T> g(x->value.shape(), n.grad[0]);
        accumulate(x, g);
    });
}

template <typename T>
Var<T> mean_all(const Var<T>& x) {
    if (x->value.empty()) throw ContractError("mean_all of empty tensor");
    return mul_scalar(sum_all(x), T(1) / static_cast<T>(x->value.size()));
}

// Per-channel mean over batch and spatial dims; result is (1,C,1,1).
template <typename T>
Var<T> mean_channels(const Var<T>& x) {
    const Shape s = x->value.shape();
    std::size_t m = static_cast<std::size_t>(s.n) * s.h * s.w;
    if (m == 0) throw ContractError("mean_channels of empty tensor");
    Tensor<T> out(1, s.c, 1, 1);
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int h = 0; h < s.h; ++h)
                for (int w = 0; w < s.w; ++w) out[c] += x->value.at(n, c, h, w);
    for (int c = 0; c < s.c; ++c) out[c] /= static_cast<T>(m);
    return make_node<T>(std::move(out), {x}, [x, m](Node<T>& n) {
        if (!x->requires_grad) return;
        const Shape s = x->value.shape();
        Tensor<T> g(s);
        for (int nn = 0; nn < s.n; ++nn)
            for (int c = 0; c < s.c; ++c)
                for (int h = 0; h < s.h; ++h)
                    for (int w = 0; w < s.w; ++w)
                        g.at(nn, c, h, w) = n.grad[c] / static_cast<T>(m);
        accumulate(x, g);
    });
}

// ---------------------------------------------------------------------------
// Channel broadcasts (s has shape (1,C,1,1))
// ---------------------------------------------------------------------------

namespace detail {
template <typename T>
void check_channel_vec(const Var<T>& x, const Var<T>& s, const char* who) {
    const Shape& xs = x->value.shape();
    const Shape& ss = s->value.shape();
    if (ss.n != 1 || ss.h != 1 || ss.w != 1 || ss.c != xs.c)
        throw DimensionError(std::string(who) + ": expected (1," + std::to_string(xs.c) +
                             ",1,1) channel vector, got " + ss.str());
}
}  // namespace detail

template <typename T>
Var<T> add_channels(const Var<T>& x, const Var<T>& s) {
    detail::check_channel_vec(x, s, "add_channels");
    const Shape xs = x->value.shape();
    Tensor<T> out(xs);
    for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < xs.c; ++c)
            for (int h = 0; h < xs.h; ++h)
                for (int w = 0; w < xs.w; ++w)
                    out.at(n, c, h, w) = x->value.at(n, c, h, w) + s->value[c];
    return make_node<T>(std::move(out), {x, s}, [x, s](Node<T>& n) {
        accumulate(x, n.grad);
        if (!s->requires_grad) return;
        const Shape xs = x->value.shape();
        Tensor<T> g(1, xs.c, 1, 1);
        for (int nn = 0; nn < xs.n; ++nn)
            for (int c = 0; c < xs.c; ++c)
                for (int h = 0; h < xs.h; ++h)
                    for (int w = 0; w < xs.w; ++w) g[c] += n.grad.at(nn, c, h, w);
        accumulate(s, g);
    });
}

template <typename T>
Var<T> mul_channels(const Var<T>& x, const Var<T>& s) {
    detail::check_channel_vec(x, s, "mul_channels");
    const Shape xs = x->value.shape();
    Tensor<T> out(xs);
    for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < xs.c; ++c)
            for (int h = 0; h < xs.h; ++h)
                for (int w = 0; w < xs.w; ++w)
                    out.at(n, c, h, w) = x->value.at(n, c, h, w) * s->value[c];
    return make_node<T>(std::move(out), {x, s}, [x, s](Node<T>& n) {
        const Shape xs = x->value.shape();
        if (x->requires_grad) {
            Tensor<T> g(xs);
            for (int nn = 0; nn < xs.n; ++nn)
                for (int c = 0; c < xs.c; ++c)
                    for (int h = 0; h < xs.h; ++h)
                        for (int w = 0; w < xs.w; ++w)
                            g.at(nn, c, h, w) = n.grad.at(nn, c, h, w) * s->value[c];
            accumulate(x, g);
        }
        if (s->requires_grad) {
            Tensor<T> g(1, xs.c, 1, 1);
            for (int nn = 0; nn < xs.n; ++nn)
                for (int c = 0; c < xs.c; ++c)
                    for (int h = 0; h < xs.h; ++h)
                        for (int w = 0; w < xs.w; ++w)
                            g[c] += n.grad.at(nn, c, h, w) * x->value.at(nn, c, h, w);
            accumulate(s, g);
        }
    });
}

// Scale each position of the last dimension by w[k]; w has shape (1,1,1,K).
template <typename T>
Var<T> mul_lastdim(const Var<T>& x, const Var<T>& w) {
    const Shape xs = x->value.shape();
    const Shape ws = w->value.shape();
    if (ws.n != 1 || ws.c != 1 || ws.h != 1 || ws.w != xs.w)
        throw DimensionError("mul_lastdim: weight must be (1,1,1," + std::to_string(xs.w) +
                             "), got " + ws.str());
    std::size_t rows = xs.numel() / xs.w;
    Tensor<T> out(xs);
    for (std::size_t r = 0; r < rows; ++r)
        for (int k = 0; k < xs.w; ++k)
            out[r * xs.w + k] = x->value[r * xs.w + k] * w->value[k];
    return make_node<T>(std::move(out), {x, w}, [x, w, rows](Node<T>& n) {
        const int K = x->value.shape().w;
        if (x->requires_grad) {
            Tensor<T> g(x->value.shape());
            for (std::size_t r = 0; r < rows; ++r)
                for (int k = 0; k < K; ++k) g[r * K + k] = n.grad[r * K + k] * w->value[k];
            accumulate(x, g);
        }
        if (w->requires_grad) {
            Tensor<T> g(1, 1, 1, K);
            for (std::size_t r = 0; r < rows; ++r)
                for (int k = 0; k < K; ++k) g[k] += n.grad[r * K + k] * x->value[r * K + k];
            accumulate(w, g);
        }
    });
}

// ---------------------------------------------------------------------------
// Softmax
// ---------------------------------------------------------------------------

// Numerically stable softmax along one axis (max subtraction). With the
// -1e4 self-similarity punishment the shifted exponent underflows to exactly
// 0 in single precision; that is the intended behaviour.
template <typename T>
Var<T> softmax(const Var<T>& x, int axis) {
    const Shape s = x->value.shape();
    const auto v = detail::axis_view(s, axis);
    Tensor<T> out(s);
    for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t i = 0; i < v.inner; ++i) {
            std::size_t base = o * v.len * v.inner + i;
            T mx = x->value[base];
            for (std::size_t l = 1; l < v.len; ++l)
                mx = std::max(mx, x->value[base + l * v.inner]);
            T sum = T(0);
            for (std::size_t l = 0; l < v.len; ++l) {
                T e = std::exp(x->value[base + l * v.inner] - mx);
                out[base + l * v.inner] = e;
                sum += e;
            }
            for (std::size_t l = 0; l < v.len; ++l) out[base + l * v.inner] /= sum;
        }
    return make_node<T>(std::move(out), {x}, [x, v](Node<T>& n) {
        if (!x->requires_grad) return;
        Tensor<T> g(x->value.shape());
        const Tensor<T>& y = n.value;
        for (std::size_t o = 0; o < v.outer; ++o)
            for (std::size_t i = 0; i < v.inner; ++i) {
                std::size_t base = o * v.len * v.inner + i;
                T dot = T(0);
                for (std::size_t l = 0; l < v.len; ++l)
                    dot += n.grad[base + l * v.inner] * y[base + l * v.inner];
                for (std::size_t l = 0; l < v.len; ++l)
                    g[base + l * v.inner] =
                        y[base + l * v.inner] * (n.grad[base + l * v.inner] - dot);
            }
        accumulate(x, g);
    });
}

// ---------------------------------------------------------------------------
// Shape manipulation
// ---------------------------------------------------------------------------

template <typename T>
Var<T> reshape(const Var<T>& x, Shape s) {
    if (s.numel() != x->value.size())
        throw DimensionError("reshape: cannot view " + x->value.shape().str() + " as " + s.str());
    Tensor<T> out(s);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x->value[i];
    return make_node<T>(std::move(out), {x}, [x](Node<T>& n) {
        if (!x->requires_grad) return;
        Tensor<T> g(x->value.shape());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = n.grad[i];
        accumulate(x, g);
    });
}

// Transpose the trailing (H,W) matrix of a (1,1,M,K) tensor.
template <typename T>
Var<T> transpose2d(const Var<T>& x) {
    const Shape s = x->value.shape();
    if (s.n != 1 || s.c != 1) throw DimensionError("transpose2d expects (1,1,M,K)");
    Tensor<T> out(1, 1, s.w, s.h);
    for (int m = 0; m < s.h; ++m)
        for (int k = 0; k < s.w; ++k) out.at(0, 0, k, m) = x->value.at(0, 0, m, k);
    return make_node<T>(std::move(out), {x}, [x](Node<T>& n) {
        if (!x->requires_grad) return;
        const Shape s = x->value.shape();
        Tensor<T> g(s);
        for (int m = 0; m < s.h; ++m)
            for (int k = 0; k < s.w; ++k) g.at(0, 0, m, k) = n.grad.at(0, 0, k, m);
        accumulate(x, g);
    });
}

// Concatenate along batch (axis 0) or channel (axis 1).
template <typename T>
Var<T> concat(const std::vector<Var<T>>& xs, int axis) {
    if (xs.empty()) throw ContractError("concat of no tensors");
    if (axis != 0 && axis != 1) throw DimensionError("concat supports axes 0 (N) and 1 (C)");
    Shape s = xs[0]->value.shape();
    int total = 0;
    for (const auto& x : xs) {
        const Shape& xi = x->value.shape();
        if (xi.h != s.h || xi.w != s.w || (axis == 0 ? xi.c != s.c : xi.n != s.n))
            throw DimensionError("concat: incompatible shapes " + s.str() + " vs " + xi.str());
        total += axis == 0 ? xi.n : xi.c;
    }
    Shape os = s;
    (axis == 0 ? os.n : os.c) = total;
    Tensor<T> out(os);
    {
        int off = 0;
        for (const auto& x : xs) {
            const Shape& xi = x->value.shape();
            for (int n = 0; n < xi.n; ++n)
                for (int c = 0; c < xi.c; ++c)
                    for (int h = 0; h < xi.h; ++h)
                        for (int w = 0; w < xi.w; ++w)
                            out.at(axis == 0 ? off + n : n, axis == 1 ? off + c : c, h, w) =
                                x->value.at(n, c, h, w);
            off += axis == 0 ? xi.n : xi.c;
        }
    }
    std::vector<Var<T>> parents(xs.begin(), xs.end());
    return make_node<T>(std::move(out), std::move(parents), [xs, axis](Node<T>& n) {
        int off = 0;
        for (const auto& x : xs) {
            const Shape& xi = x->value.shape();
            if (x->requires_grad) {
                Tensor<T> g(xi);
                for (int nn = 0; nn < xi.n; ++nn)
                    for (int c = 0; c < xi.c; ++c)
                        for (int h = 0; h < xi.h; ++h)
                            for (int w = 0; w < xi.w; ++w)
                                g.at(nn, c, h, w) = n.grad.at(axis == 0 ? off + nn : nn,
                                                              axis == 1 ? off + c : c, h, w);
                accumulate(x, g);
            }
            off += axis == 0 ? xi.n : xi.c;
        }
    });
}

// Copy out a sub-block; backward scatters into the matching region.
template <typename T>
Var<T> slice(const Var<T>& x, Shape offset, Shape size) {
    const Shape s = x->value.shape();
    if (offset.n < 0 || offset.c < 0 || offset.h < 0 || offset.w < 0 ||
        offset.n + size.n > s.n || offset.c + size.c > s.c || offset.h + size.h > s.h ||
        offset.w + size.w > s.w)
        throw DimensionError("slice: block " + offset.str() + "+" + size.str() +
                             " outside tensor " + s.str());
    Tensor<T> out(size);
    for (int n = 0; n < size.n; ++n)
        for (int c = 0; c < size.c; ++c)
            for (int h = 0; h < size.h; ++h)
                for (int w = 0; w < size.w; ++w)
                    out.at(n, c, h, w) =
                        x->value.at(offset.n + n, offset.c + c, offset.h + h, offset.w + w);
    return make_node<T>(std::move(out), {x}, [x, offset, size](Node<T>& n) {
        if (!x->requires_grad) return;
        Tensor<T> g(x->value.shape());
        for (int nn = 0; nn < size.n; ++nn)
            for (int c = 0; c < size.c; ++c)
                for (int h = 0; h < size.h; ++h)
                    for (int w = 0; w < size.w; ++w)
                        g.at(offset.n + nn, offset.c + c, offset.h + h, offset.w + w) =
                            n.grad.at(nn, c, h, w);
        accumulate(x, g);
    });
}

// Gather rows of a (1,1,R,K) matrix. Indices must be unique.
template <typename T>
Var<T> gather_rows(const Var<T>& x, std::vector<int> idx) {
    const Shape s = x->value.shape();
    if (s.n != 1 || s.c != 1) throw DimensionError("gather_rows expects (1,1,R,K)");
    for (int r : idx)
        if (r < 0 || r >= s.h) throw DimensionError("gather_rows: row index out of range");
    Tensor<T> out(1, 1, static_cast<int>(idx.size()), s.w);
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (int k = 0; k < s.w; ++k) out.at(0, 0, static_cast<int>(i), k) = x->value.at(0, 0, idx[i], k);
    return make_node<T>(std::move(out), {x}, [x, idx = std::move(idx)](Node<T>& n) {
        if (!x->requires_grad) return;
        Tensor<T> g(x->value.shape());
        const int K = x->value.shape().w;
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (int k = 0; k < K; ++k)
                g.at(0, 0, idx[i], k) += n.grad.at(0, 0, static_cast<int>(i), k);
        accumulate(x, g);
    });
}

// ---------------------------------------------------------------------------
// Spatial ops
// ---------------------------------------------------------------------------

template <typename T>
Var<T> upsample_nearest2x(const Var<T>& x) {
    const Shape s = x->value.shape();
    Tensor<T> out(s.n, s.c, s.h * 2, s.w * 2);
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int h = 0; h < s.h * 2; ++h)
                for (int w = 0; w < s.w * 2; ++w)
                    out.at(n, c, h, w) = x->value.at(n, c, h / 2, w / 2);
    return make_node<T>(std::move(out), {x}, [x](Node<T>& n) {
        if (!x->requires_grad) return;
        const Shape s = x->value.shape();
        Tensor<T> g(s);
        for (int nn = 0; nn < s.n; ++nn)
            for (int c = 0; c < s.c; ++c)
                for (int h = 0; h < s.h * 2; ++h)
                    for (int w = 0; w < s.w * 2; ++w)
                        g.at(nn, c, h / 2, w / 2) += n.grad.at(nn, c, h, w);
        accumulate(x, g);
    });
}

enum class PadMode { Zero, Reflect, Replicate };

namespace detail {
// Source coordinate for padded coordinate i in [-p, len+p); -1 means outside
// (zero padding).
inline int pad_src(int i, int len, PadMode mode) {
    if (i >= 0 && i < len) return i;
    switch (mode) {
        case PadMode::Zero:
            return -1;
        case PadMode::Reflect:
            return i < 0 ? -i : 2 * len - 2 - i;
        case PadMode::Replicate:
            return i < 0 ? 0 : len - 1;
    }
    return -1;
}
}  // namespace detail

template <typename T>
Var<T> pad2d(const Var<T>& x, int ph, int pw, PadMode mode) {
    const Shape s = x->value.shape();
    if (ph < 0 || pw < 0) throw DimensionError("pad2d: negative padding");
    if (mode == PadMode::Reflect && (ph > s.h - 1 || pw > s.w - 1))
        throw DimensionError("pad2d: reflect padding wider than input minus one");
    Tensor<T> out(s.n, s.c, s.h + 2 * ph, s.w + 2 * pw);
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int h = 0; h < s.h + 2 * ph; ++h) {
                int sh = detail::pad_src(h - ph, s.h, mode);
                for (int w = 0; w < s.w + 2 * pw; ++w) {
                    int sw = detail::pad_src(w - pw, s.w, mode);
                    out.at(n, c, h, w) =
                        (sh < 0 || sw < 0) ? T(0) : x->value.at(n, c, sh, sw);
                }
            }
    return make_node<T>(std::move(out), {x}, [x, ph, pw, mode](Node<T>& n) {
        if (!x->requires_grad) return;
        const Shape s = x->value.shape();
        Tensor<T> g(s);
        for (int nn = 0; nn < s.n; ++nn)
            for (int c = 0; c < s.c; ++c)
                for (int h = 0; h < s.h + 2 * ph; ++h) {
                    int sh = detail::pad_src(h - ph, s.h, mode);
                    if (sh < 0) continue;
                    for (int w = 0; w < s.w + 2 * pw; ++w) {
                        int sw = detail::pad_src(w - pw, s.w, mode);
                        if (sw < 0) continue;
                        g.at(nn, c, sh, sw) += n.grad.at(nn, c, h, w);
                    }
                }
        accumulate(x, g);
    });
}

// ---------------------------------------------------------------------------
// Matrix multiply and patch ops
// ---------------------------------------------------------------------------

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
    const Shape sa = a->value.shape(), sb = b->value.shape();
    if (sa.n != 1 || sa.c != 1 || sb.n != 1 || sb.c != 1)
        throw DimensionError("matmul expects (1,1,M,K) x (1,1,K,P)");
    if (sa.w != sb.h)
        throw DimensionError("matmul: inner dimensions disagree, " + sa.str() + " x " + sb.str());
    const int M = sa.h, K = sa.w, P = sb.w;
    Tensor<T> out(1, 1, M, P);
    gemm_nn(M, P, K, a->value.data(), b->value.data(), out.data(), false);
    return make_node<T>(std::move(out), {a, b}, [a, b, M, K, P](Node<T>& n) {
        if (a->requires_grad) {
            Tensor<T> ga(1, 1, M, K);
            gemm_nt(M, K, P, n.grad.data(), b->value.data(), ga.data(), false);
            accumulate(a, ga);
        }
        if (b->requires_grad) {
            Tensor<T> gb(1, 1, K, P);
            gemm_tn(K, P, M, a->value.data(), n.grad.data(), gb.data(), false);
            accumulate(b, gb);
        }
    });
}

template <typename T>
Var<T> im2col_node(const Var<T>& x, int kh, int kw, int sh, int sw, int ph, int pw) {
    PatchGeom g{x->value.shape(), kh, kw, sh, sw, ph, pw};
    Tensor<T> out = im2col(x->value, g);
    return make_node<T>(std::move(out), {x}, [x, g](Node<T>& n) {
        if (!x->requires_grad) return;
        accumulate(x, col2im_sum(n.grad, g));
    });
}

// Scatter-add columns back to image layout (adjoint of im2col_node).
template <typename T>
Var<T> col2im_sum_node(const Var<T>& cols, const PatchGeom& g) {
    Tensor<T> out = col2im_sum(cols->value, g);
    return make_node<T>(std::move(out), {cols}, [cols, g](Node<T>& n) {
        if (!cols->requires_grad) return;
        accumulate(cols, im2col(n.grad, g));
    });
}

// col2im with overlap averaging: the scatter-add result is divided by the
// window count covering each pixel. Pixels covered by no window stay zero.
template <typename T>
Var<T> col2im_mean_node(const Var<T>& cols, const PatchGeom& g) {
    Tensor<T> counts = overlap_counts<T>(g);
    Tensor<T> out = col2im_sum(cols->value, g);
    for (int n = 0; n < g.in.n; ++n)
        for (int c = 0; c < g.in.c; ++c)
            for (int h = 0; h < g.in.h; ++h)
                for (int w = 0; w < g.in.w; ++w) {
                    T cnt = counts.at(0, 0, h, w);
                    if (cnt > T(0)) out.at(n, c, h, w) /= cnt;
                }
    return make_node<T>(std::move(out), {cols}, [cols, g, counts](Node<T>& n) {
        if (!cols->requires_grad) return;
        Tensor<T> scaled(n.grad.shape());
        for (int nn = 0; nn < g.in.n; ++nn)
            for (int c = 0; c < g.in.c; ++c)
                for (int h = 0; h < g.in.h; ++h)
                    for (int w = 0; w < g.in.w; ++w) {
                        T cnt = counts.at(0, 0, h, w);
                        scaled.at(nn, c, h, w) =
                            cnt > T(0) ? n.grad.at(nn, c, h, w) / cnt : T(0);
                    }
        accumulate(cols, im2col(scaled, g));
    });
}

// ---------------------------------------------------------------------------
// Masked ops (masks are plain tensors, not graph nodes)
// ---------------------------------------------------------------------------

template <typename T>
Var<T> masked_fill(const Var<T>& x, const Tensor<T>& mask, T value) {
    if (!x->value.same_shape(mask))
        throw DimensionError("masked_fill: mask shape " + mask.shape().str() +
                             " does not match " + x->value.shape().str());
    Tensor<T> out(x->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = mask[i] != T(0) ? value : x->value[i];
    return make_node<T>(std::move(out), {x}, [x, mask](Node<T>& n) {
        if (!x->requires_grad) return;
        Tensor<T> g(n.grad.shape());
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] = mask[i] != T(0) ? T(0) : n.grad[i];
        accumulate(x, g);
    });
}

// out = x + r where mask != 0, bit-exact copy of x elsewhere. Keeps the
// known region of a masked residual untouched down to the last bit.
template <typename T>
Var<T> masked_residual_add(const Var<T>& x, const Var<T>& r, const Tensor<T>& mask) {
    detail::check_same_shape(x, r, "masked_residual_add");
    if (!x->value.same_shape(mask))
        throw DimensionError("masked_residual_add: bad mask shape " + mask.shape().str());
    Tensor<T> out(x->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = mask[i] != T(0) ? x->value[i] + r->value[i] : x->value[i];
    return make_node<T>(std::move(out), {x, r}, [x, r, mask](Node<T>& n) {
        accumulate(x, n.grad);
        if (!r->requires_grad) return;
        Tensor<T> g(n.grad.shape());
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] = mask[i] != T(0) ? n.grad[i] : T(0);
        accumulate(r, g);
    });
}

// ---------------------------------------------------------------------------
// Row normalization
// ---------------------------------------------------------------------------

// Each row of a (1,1,R,K) matrix is scaled to unit L2 norm; norms are floored
// at eps so flat rows map to well-defined (near-zero) directions.
template <typename T>
Var<T> normalize_rows(const Var<T>& x, T eps) {
    const Shape s = x->value.shape();
    if (s.n != 1 || s.c != 1) throw DimensionError("normalize_rows expects (1,1,R,K)");
    if (eps <= T(0)) throw ContractError("normalize_rows: eps must be positive");
    const int R = s.h, K = s.w;
    Tensor<T> out(s);
    std::vector<T> norms(R);
    for (int r = 0; r < R; ++r) {
        const T* row = x->value.data() + static_cast<std::size_t>(r) * K;
        T sq = T(0);
        for (int k = 0; k < K; ++k) sq += row[k] * row[k];
        T nrm = std::sqrt(sq);
        norms[r] = nrm;
        T m = std::max(nrm, eps);
        for (int k = 0; k < K; ++k) out[static_cast<std::size_t>(r) * K + k] = row[k] / m;
    }
    return make_node<T>(std::move(out), {x}, [x, eps, norms = std::move(norms)](Node<T>& n) {
        if (!x->requires_grad) return;
        const Shape s = x->value.shape();
        const int R = s.h, K = s.w;
        Tensor<T> g(s);
        for (int r = 0; r < R; ++r) {
            const std::size_t off = static_cast<std::size_t>(r) * K;
            const T* go = n.grad.data() + off;
            const T* y = n.value.data() + off;
            T* gi = g.data() + off;
            if (norms[r] > eps) {
                T dot = T(0);
                for (int k = 0; k < K; ++k) dot += go[k] * y[k];
                for (int k = 0; k < K; ++k) gi[k] = (go[k] - y[k] * dot) / norms[r];
            } else {
                for (int k = 0; k < K; ++k) gi[k] = go[k] / eps;
            }
        }
        accumulate(x, g);
    });
}

}  // namespace gcamat::ag
