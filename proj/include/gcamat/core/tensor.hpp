#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gcamat/core/errors.hpp"
#include "gcamat/core/rng.hpp"

namespace gcamat {

// Dense 4-D shape (batch, channel, height, width).
struct Shape {
    int n = 0, c = 0, h = 0, w = 0;

    std::size_t numel() const {
        return static_cast<std::size_t>(n) * c * h * w;
    }
    bool operator==(const Shape&) const = default;
    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + ")";
    }
};

// Contiguous row-major NCHW tensor. Single precision for training, double for
// oracle and finite-difference builds.
template <typename T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape s, T fill = T(0)) : shape_(checked(s)), v_(shape_.numel(), fill) {}
    Tensor(int n, int c, int h, int w, T fill = T(0)) : Tensor(Shape{n, c, h, w}, fill) {}

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return v_.size(); }
    bool empty() const { return v_.empty(); }

    T* data() { return v_.data(); }
    const T* data() const { return v_.data(); }

    T& operator[](std::size_t i) { return v_[i]; }
    const T& operator[](std::size_t i) const { return v_[i]; }

    std::size_t index(int n, int c, int h, int w) const {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }
    T& at(int n, int c, int h, int w) { return v_[index(n, c, h, w)]; }
    const T& at(int n, int c, int h, int w) const { return v_[index(n, c, h, w)]; }

    void fill(T x) { std::fill(v_.begin(), v_.end(), x); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (std::size_t i = 0; i < v_.size(); ++i) out[i] = static_cast<U>(v_[i]);
        return out;
    }

private:
    static Shape checked(Shape s) {
        if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0)
            throw DimensionError("negative tensor dimension " + s.str());
        return s;
    }

    Shape shape_{};
    std::vector<T> v_;
};

template <typename T>
bool all_finite(const Tensor<T>& t) {
    for (std::size_t i = 0; i < t.size(); ++i)
        if (!std::isfinite(t[i])) return false;
    return true;
}

// Index of the first non-finite entry, or size() when all entries are finite.
template <typename T>
std::size_t first_nonfinite(const Tensor<T>& t) {
    for (std::size_t i = 0; i < t.size(); ++i)
        if (!std::isfinite(t[i])) return i;
    return t.size();
}

template <typename T>
Tensor<T> zeros_like(const Tensor<T>& t) {
    return Tensor<T>(t.shape());
}

template <typename T>
Tensor<T> full_like(const Tensor<T>& t, T x) {
    return Tensor<T>(t.shape(), x);
}

template <typename T>
Tensor<T> random_uniform(Shape s, Pcg32& rng, T lo = T(-1), T hi = T(1)) {
    Tensor<T> t(s);
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = static_cast<T>(rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
    return t;
}

template <typename T>
Tensor<T> random_normal(Shape s, Pcg32& rng, T stddev = T(1)) {
    Tensor<T> t(s);
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = static_cast<T>(rng.normal() * static_cast<double>(stddev));
    return t;
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    if (!a.same_shape(b))
        throw DimensionError("max_abs_diff: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    T m = T(0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        T d = std::abs(a[i] - b[i]);
        if (d > m) m = d;
    }
    return m;
}

}  // namespace gcamat
