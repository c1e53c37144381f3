#pragma once

#include "gcamat/core/rng.hpp"
#include "gcamat/core/tensor.hpp"

namespace gcamat::data {

// 2x3 affine map [a b tx; c d ty] acting on (x, y).
struct Affine {
    double a = 1, b = 0, tx = 0;
    double c = 0, d = 1, ty = 0;

    void apply(double x, double y, double& ox, double& oy) const {
        ox = a * x + b * y + tx;
        oy = c * x + d * y + ty;
    }

    Affine then(const Affine& m) const {  // m ∘ this
        return {m.a * a + m.b * c, m.a * b + m.b * d, m.a * tx + m.b * ty + m.tx,
                m.c * a + m.d * c, m.c * b + m.d * d, m.c * tx + m.d * ty + m.ty};
    }

    Affine inverse() const {
        double det = a * d - b * c;
        if (det == 0) throw ContractError("affine matrix is singular");
        Affine inv{d / det, -b / det, 0, -c / det, a / det, 0};
        double ox, oy;
        inv.apply(tx, ty, ox, oy);
        inv.tx = -ox;
        inv.ty = -oy;
        return inv;
    }
};

struct AffineParams {
    double rotation_deg = 0;
    double scale = 1;
    double shear_deg = 0;
    bool hflip = false;
    bool vflip = false;
};

// Rotation, scaling, shearing and flips about the image center.
inline Affine affine_about_center(const AffineParams& p, int h, int w) {
    const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
    const double rad = p.rotation_deg * 3.14159265358979323846 / 180.0;
    const double sh = std::tan(p.shear_deg * 3.14159265358979323846 / 180.0);
    Affine to_origin{1, 0, -cx, 0, 1, -cy};
    Affine flip{p.hflip ? -1.0 : 1.0, 0, 0, 0, p.vflip ? -1.0 : 1.0, 0};
    Affine shear{1, sh, 0, 0, 1, 0};
    Affine scale{p.scale, 0, 0, 0, p.scale, 0};
    Affine rot{std::cos(rad), -std::sin(rad), 0, std::sin(rad), std::cos(rad), 0};
    Affine back{1, 0, cx, 0, 1, cy};
    return to_origin.then(flip).then(shear).then(scale).then(rot).then(back);
}

// Bilinear warp through the inverse map; samples outside the source are 0.
template <typename T>
Tensor<T> warp_bilinear(const Tensor<T>& src, const Affine& fwd) {
    const Shape s = src.shape();
    Affine inv = fwd.inverse();
    Tensor<T> out(s);
    for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
            double sx, sy;
            inv.apply(x, y, sx, sy);
            if (sx < 0 || sy < 0 || sx > s.w - 1 || sy > s.h - 1) continue;
            int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
            int x1 = std::min(x0 + 1, s.w - 1), y1 = std::min(y0 + 1, s.h - 1);
            double tx = sx - x0, ty = sy - y0;
            for (int c = 0; c < s.c; ++c) {
                double v = (1 - ty) * ((1 - tx) * src.at(0, c, y0, x0) + tx * src.at(0, c, y0, x1)) +
                           ty * ((1 - tx) * src.at(0, c, y1, x0) + tx * src.at(0, c, y1, x1));
                out.at(0, c, y, x) = static_cast<T>(v);
            }
        }
    return out;
}

template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& src, int oh, int ow) {
    const Shape s = src.shape();
    Tensor<T> out(s.n, s.c, oh, ow);
    const double fy = oh > 1 ? static_cast<double>(s.h - 1) / (oh - 1) : 0;
    const double fx = ow > 1 ? static_cast<double>(s.w - 1) / (ow - 1) : 0;
    for (int n = 0; n < s.n; ++n)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                double sy = y * fy, sx = x * fx;
                int y0 = static_cast<int>(sy), x0 = static_cast<int>(sx);
                int y1 = std::min(y0 + 1, s.h - 1), x1 = std::min(x0 + 1, s.w - 1);
                double ty = sy - y0, tx = sx - x0;
                for (int c = 0; c < s.c; ++c) {
                    double v =
                        (1 - ty) * ((1 - tx) * src.at(n, c, y0, x0) + tx * src.at(n, c, y0, x1)) +
                        ty * ((1 - tx) * src.at(n, c, y1, x0) + tx * src.at(n, c, y1, x1));
                    out.at(n, c, y, x) = static_cast<T>(v);
                }
            }
    return out;
}

}  // namespace gcamat::data
