#pragma once

#include <queue>

#include "gcamat/train/losses.hpp"

// The four matting error metrics, computed over the unknown region only and
// reported with the field's scaling conventions: SAD, Grad and Conn are sums
// divided by 1000, MSE is the plain mean on [0,1] alphas.

namespace gcamat::train {

struct Metrics {
    double sad = 0, mse = 0, grad = 0, conn = 0;
};

template <typename T>
void check_metric_inputs(const Tensor<T>& pred, const Tensor<T>& gt, const Tensor<T>& mask) {
    if (!pred.same_shape(gt) || !pred.same_shape(mask))
        throw DimensionError("metrics: shape mismatch");
    if (pred.shape().n != 1 || pred.shape().c != 1)
        throw ContractError("metrics operate on single (1,1,H,W) images");
}

template <typename T>
double metric_sad(const Tensor<T>& pred, const Tensor<T>& gt, const Tensor<T>& mask) {
    check_metric_inputs(pred, gt, mask);
    double acc = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (mask[i] != T(0)) acc += std::abs(static_cast<double>(pred[i]) - gt[i]);
    return acc / 1000.0;
}

template <typename T>
double metric_mse(const Tensor<T>& pred, const Tensor<T>& gt, const Tensor<T>& mask) {
    check_metric_inputs(pred, gt, mask);
    double acc = 0, cnt = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (mask[i] != T(0)) {
            double d = static_cast<double>(pred[i]) - gt[i];
            acc += d * d;
            cnt += 1;
        }
    return cnt > 0 ? acc / cnt : 0.0;
}

// Sum of squared gradient-magnitude differences (sigma=1.4 Gaussian
// derivatives, replicate border), /1000.
template <typename T>
double metric_grad(const Tensor<T>& pred, const Tensor<T>& gt, const Tensor<T>& mask,
                   double sigma = 1.4) {
    check_metric_inputs(pred, gt, mask);
    auto mp = gradient_magnitude(ag::constant(pred), sigma)->value;
    auto mg = gradient_magnitude(ag::constant(gt), sigma)->value;
    double acc = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (mask[i] != T(0)) {
            double d = static_cast<double>(mp[i]) - mg[i];
            acc += d * d;
        }
    return acc / 1000.0;
}

namespace detail {

// Largest 4-connected component of a binary map (first found wins ties).
inline void largest_component(const std::vector<std::uint8_t>& bin, int h, int w,
                              std::vector<std::uint8_t>& omega) {
    omega.assign(bin.size(), 0);
    std::vector<int> label(bin.size(), -1);
    int best_label = -1, best_size = 0, next = 0;
    std::vector<int> queue;
    for (int start = 0; start < h * w; ++start) {
        if (!bin[start] || label[start] != -1) continue;
        int size = 0;
        queue.clear();
        queue.push_back(start);
        label[start] = next;
        while (!queue.empty()) {
            int p = queue.back();
            queue.pop_back();
            ++size;
            int y = p / w, x = p % w;
            const int ns[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
            for (auto& nb : ns) {
                if (nb[0] < 0 || nb[0] >= h || nb[1] < 0 || nb[1] >= w) continue;
                int q = nb[0] * w + nb[1];
                if (bin[q] && label[q] == -1) {
                    label[q] = next;
                    queue.push_back(q);
                }
            }
        }
        if (size > best_size) {
            best_size = size;
            best_label = next;
        }
        ++next;
    }
    if (best_label >= 0)
        for (std::size_t i = 0; i < bin.size(); ++i) omega[i] = label[i] == best_label ? 1 : 0;
}

}  // namespace detail

// Connectivity error: per-pixel degree of connectedness to the largest
// jointly-opaque region, over thresholds stepped by 0.1, summed over unknown
// pixels, /1000. When the ground truth has no fully opaque pixel the largest
// region at the highest populated threshold is used and the report is
// flagged.
template <typename T>
double metric_conn(const Tensor<T>& pred, const Tensor<T>& gt, const Tensor<T>& mask,
                   double step = 0.1, bool* no_opaque_flag = nullptr) {
    check_metric_inputs(pred, gt, mask);
    const int h = pred.shape().h, w = pred.shape().w;
    const int n_steps = static_cast<int>(std::lround(1.0 / step));

    if (no_opaque_flag) {
        *no_opaque_flag = true;
        for (std::size_t i = 0; i < gt.size(); ++i)
            if (gt[i] >= T(1)) {
                *no_opaque_flag = false;
                break;
            }
    }

    std::vector<double> l_map(static_cast<std::size_t>(h) * w, -1.0);
    std::vector<std::uint8_t> joint(l_map.size()), omega;
    for (int i = 1; i <= n_steps; ++i) {
        double theta = i * step;
        for (std::size_t p = 0; p < joint.size(); ++p)
            joint[p] = pred[p] >= theta && gt[p] >= theta ? 1 : 0;
        detail::largest_component(joint, h, w, omega);
        for (std::size_t p = 0; p < l_map.size(); ++p)
            if (l_map[p] == -1.0 && !omega[p]) l_map[p] = (i - 1) * step;
    }
    for (auto& v : l_map)
        if (v == -1.0) v = 1.0;

    double acc = 0;
    for (std::size_t p = 0; p < l_map.size(); ++p) {
        if (mask[p] == T(0)) continue;
        double dp = static_cast<double>(pred[p]) - l_map[p];
        double dg = static_cast<double>(gt[p]) - l_map[p];
        double phi_p = 1.0 - (dp >= 0.15 ? dp : 0.0);
        double phi_g = 1.0 - (dg >= 0.15 ? dg : 0.0);
        acc += std::abs(phi_p - phi_g);
    }
    return acc / 1000.0;
}

template <typename T>
Metrics compute_metrics(const Tensor<T>& pred, const Tensor<T>& gt, const Tensor<T>& mask,
                        bool* no_opaque_flag = nullptr) {
    Metrics m;
    m.sad = metric_sad(pred, gt, mask);
    m.mse = metric_mse(pred, gt, mask);
    m.grad = metric_grad(pred, gt, mask);
    m.conn = metric_conn(pred, gt, mask, 0.1, no_opaque_flag);
    return m;
}

}  // namespace gcamat::train
