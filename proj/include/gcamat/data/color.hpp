#pragma once

#include <algorithm>
#include <cmath>

namespace gcamat::data {

// RGB <-> HSV on [0,1] floats. h is the hue as a fraction of the full wheel.
struct Hsv {
    double h, s, v;
};

inline Hsv rgb_to_hsv(double r, double g, double b) {
    double mx = std::max({r, g, b});
    double mn = std::min({r, g, b});
    double d = mx - mn;
    double h = 0;
    if (d > 0) {
        if (mx == r)
            h = std::fmod((g - b) / d, 6.0);
        else if (mx == g)
            h = (b - r) / d + 2.0;
        else
            h = (r - g) / d + 4.0;
        h /= 6.0;
        if (h < 0) h += 1.0;
    }
    double s = mx > 0 ? d / mx : 0.0;
    return {h, s, mx};
}

inline void hsv_to_rgb(const Hsv& in, double& r, double& g, double& b) {
    double h = in.h - std::floor(in.h);  // wrap to [0,1)
    double c = in.v * in.s;
    double hp = h * 6.0;
    double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r1 = 0, g1 = 0, b1 = 0;
    switch (static_cast<int>(hp) % 6) {
        case 0: r1 = c; g1 = x; break;
        case 1: r1 = x; g1 = c; break;
        case 2: g1 = c; b1 = x; break;
        case 3: g1 = x; b1 = c; break;
        case 4: r1 = x; b1 = c; break;
        default: r1 = c; b1 = x; break;
    }
    double m = in.v - c;
    r = r1 + m;
    g = g1 + m;
    b = b1 + m;
}

}  // namespace gcamat::data
