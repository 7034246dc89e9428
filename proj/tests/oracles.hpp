// Copyright 2026 The relight-forge Authors
// SPDX-License-Identifier: Apache-2.0

// Reference implementations written independently of the library, used as
// ground truth by the unit and acceptance tests.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

using Vec = std::array<double, 3>;
using Color = std::array<double, 3>;

/// Cartesian unit vector for azimuth phi (from +z towards +x) and polar theta
/// (from +y).
inline Vec unit(double phi, double theta) {
    return {std::sin(theta) * std::sin(phi), std::cos(theta), std::sin(theta) * std::cos(phi)};
}

inline double dot(const Vec& a, const Vec& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

struct Light {
    double phi;
    double theta;
    Color color;
};

/// Brute-force cosine-lobe sum in Cartesian form, clamped at 255.
inline Color radiance(const std::vector<Light>& lights, const Vec& v) {
    Color out{0, 0, 0};
    for (const auto& l : lights) {
        const double c = dot(unit(l.phi, l.theta), v);
        for (int k = 0; k < 3; ++k) {
            const double term = l.color[k] * c;
            if (term > 0) out[k] += term;
        }
    }
    for (double& x : out) x = std::min(x, 255.0);
    return out;
}

/// Direction a camera-space normal looks up in the map.
inline Vec normal_to_dir(double nx, double ny, double nz) {
    const double len = std::sqrt(nx * nx + ny * ny + nz * nz);
    return {nx / len, ny / len, nz / len};
}

/// SSIM of two constant signals: variances and covariance vanish, leaving
/// the luminance term only.
inline double ssim_constant(double a, double b) {
    const double c1 = 0.0001;
    return (2 * a * b + c1) / (a * a + b * b + c1);
}

} // namespace oracle
