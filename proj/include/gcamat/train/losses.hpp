#pragma once

#include "gcamat/nn/conv2d.hpp"
#include "gcamat/train/schedule.hpp"

namespace gcamat::train {

namespace detail {

template <typename T>
T mask_count(const Tensor<T>& mask) {
    T cnt = T(0);
    for (std::size_t i = 0; i < mask.size(); ++i) cnt += mask[i];
    return cnt;
}

// sqrt(x^2 + eps^2), the smoothed absolute value.
template <typename T>
ag::Var<T> charbonnier(const ag::Var<T>& x, T eps) {
    return ag::pow_scalar(ag::add_scalar(ag::mul(x, x), eps * eps), T(0.5));
}

}  // namespace detail

// Mean smoothed-L1 between prediction and ground truth over the unknown
// pixels. eps=1e-6 keeps the loss differentiable at zero error.
template <typename T>
ag::Var<T> alpha_prediction_loss(const ag::Var<T>& pred, const Tensor<T>& gt,
                                 const Tensor<T>& unknown_mask, T eps = T(1e-6)) {
    if (!pred->value.same_shape(gt) || !pred->value.same_shape(unknown_mask))
        throw DimensionError("alpha_prediction_loss: shape mismatch");
    T cnt = detail::mask_count(unknown_mask);
    if (cnt == T(0)) throw ContractError("alpha_prediction_loss: empty unknown mask");
    auto diff = ag::sub(pred, ag::constant(gt));
    auto masked = ag::mul(detail::charbonnier(diff, eps), ag::constant(unknown_mask));
    return ag::mul_scalar(ag::sum_all(masked), T(1) / cnt);
}

// Mean smoothed-L1 between the input image and the image recomposited with
// the predicted alpha, over unknown pixels and channels.
template <typename T>
ag::Var<T> compositional_loss(const ag::Var<T>& pred, const Tensor<T>& fg, const Tensor<T>& bg,
                              const Tensor<T>& image, const Tensor<T>& unknown_mask,
                              T eps = T(1e-6)) {
    const Shape ps = pred->value.shape();
    if (ps.c != 1) throw DimensionError("compositional_loss: prediction must be single-channel");
    if (!fg.same_shape(bg) || !fg.same_shape(image) || fg.shape().c != 3)
        throw DimensionError("compositional_loss: fg/bg/image must be matching RGB tensors");
    if (fg.shape().n != ps.n || fg.shape().h != ps.h || fg.shape().w != ps.w)
        throw DimensionError("compositional_loss: layers do not match the prediction");
    T cnt = detail::mask_count(unknown_mask);
    if (cnt == T(0)) throw ContractError("compositional_loss: empty unknown mask");

    auto pred3 = ag::concat<T>({pred, pred, pred}, 1);
    auto fgv = ag::constant(fg);
    auto bgv = ag::constant(bg);
    auto comp = ag::add(ag::mul(pred3, fgv),
                        ag::mul(ag::add_scalar(ag::neg(pred3), T(1)), bgv));
    auto diff = ag::sub(ag::constant(image), comp);

    Tensor<T> mask3(Shape{ps.n, 3, ps.h, ps.w});
    for (int n = 0; n < ps.n; ++n)
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < ps.h; ++y)
                for (int x = 0; x < ps.w; ++x)
                    mask3.at(n, c, y, x) = unknown_mask.at(n, 0, y, x);
    auto masked = ag::mul(detail::charbonnier(diff, eps), ag::constant(mask3));
    return ag::mul_scalar(ag::sum_all(masked), T(1) / (cnt * 3));
}

// First-order Gaussian-derivative filter pair (x and y), L2-normalized,
// radius from the 1% support cutoff.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> gaussian_derivative_kernels(double sigma) {
    const double epsilon = 1e-2;
    int half = static_cast<int>(
        std::ceil(sigma * std::sqrt(-2.0 * std::log(std::sqrt(2.0 * 3.14159265358979323846) *
                                                    sigma * epsilon))));
    const int size = 2 * half + 1;
    auto gauss = [&](double x) {
        return std::exp(-x * x / (2 * sigma * sigma)) /
               (sigma * std::sqrt(2.0 * 3.14159265358979323846));
    };
    auto dgauss = [&](double x) { return -x * gauss(x) / (sigma * sigma); };
    Tensor<T> kx(1, 1, size, size), ky(1, 1, size, size);
    double norm = 0;
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
            double v = gauss(i - half) * dgauss(j - half);  // x-derivative
            kx.at(0, 0, i, j) = static_cast<T>(v);
            norm += v * v;
        }
    norm = std::sqrt(norm);
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
            kx.at(0, 0, i, j) = static_cast<T>(kx.at(0, 0, i, j) / norm);
            ky.at(0, 0, i, j) = kx.at(0, 0, i, j);
        }
    // ky is the transpose of kx
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) ky.at(0, 0, i, j) = kx.at(0, 0, j, i);
    return {std::move(kx), std::move(ky)};
}

// Gradient magnitude via Gaussian-derivative filters (replicate border).
template <typename T>
ag::Var<T> gradient_magnitude(const ag::Var<T>& x, double sigma) {
    auto [kx, ky] = gaussian_derivative_kernels<T>(sigma);
    const int half = (kx.shape().h - 1) / 2;
    auto padded = ag::pad2d(x, half, half, ag::PadMode::Replicate);
    auto gx = nn::conv2d_op(padded, ag::constant(kx), ag::Var<T>{}, 1, 0);
    auto gy = nn::conv2d_op(padded, ag::constant(ky), ag::Var<T>{}, 1, 0);
    auto sq = ag::add(ag::mul(gx, gx), ag::mul(gy, gy));
    return ag::pow_scalar(ag::add_scalar(sq, T(1e-18)), T(0.5));
}

// Mean smoothed absolute difference between the gradient magnitudes of
// prediction and ground truth over the unknown region. The smoothing eps is
// 1e-8 so identical inputs stay below 1e-7.
template <typename T>
ag::Var<T> gradient_loss(const ag::Var<T>& pred, const Tensor<T>& gt,
                         const Tensor<T>& unknown_mask, double sigma = 1.4, T eps = T(1e-8)) {
    if (!pred->value.same_shape(gt) || !pred->value.same_shape(unknown_mask))
        throw DimensionError("gradient_loss: shape mismatch");
    T cnt = detail::mask_count(unknown_mask);
    if (cnt == T(0)) throw ContractError("gradient_loss: empty unknown mask");
    auto mag_pred = gradient_magnitude(pred, sigma);
    auto mag_gt = gradient_magnitude(ag::constant(gt), sigma);
    auto diff = ag::sub(mag_pred, mag_gt);
    auto masked = ag::mul(detail::charbonnier(diff, eps), ag::constant(unknown_mask));
    return ag::mul_scalar(ag::sum_all(masked), T(1) / cnt);
}

}  // namespace gcamat::train
