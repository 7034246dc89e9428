// Copyright 2026 The relight-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "relight_forge/error.hpp"
#include "relight_forge/image.hpp"
#include "relight_forge/rng.hpp"

namespace relight_forge {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kMaxRadiance = 255.0;

/// Azimuth stored as a fraction of a full turn, snapped to multiples of 2^-53.
///
/// On that grid, differences and wrap-around sums of two azimuths are exact in
/// binary64, which makes rotating a light set by k/width turns (width a power
/// of two) reproduce the column-shifted environment map bit for bit.
class Azimuth {
public:
    Azimuth() = default;

    static Azimuth from_turns(double turns) {
        double t = turns - std::floor(turns);
        t = std::nearbyint(std::ldexp(t, 53));
        t = std::ldexp(t, -53);
        if (t >= 1.0) t = 0.0;
        Azimuth a;
        a.turns_ = t;
        return a;
    }

    static Azimuth from_radians(double radians) { return from_turns(radians / kTwoPi); }

    double turns() const noexcept { return turns_; }
    double radians() const noexcept { return turns_ * kTwoPi; }

    Azimuth rotated(Azimuth delta) const noexcept {
        Azimuth out;
        const double complement = 1.0 - delta.turns_;
        out.turns_ = turns_ >= complement ? turns_ - complement : turns_ + delta.turns_;
        return out;
    }

    /// Shortest separation in turns, in [0, 0.5]. Symmetric and exact on the grid.
    static double separation(Azimuth a, Azimuth b) noexcept {
        double d = std::abs(a.turns_ - b.turns_);
        if (d > 0.5) d = 1.0 - d;
        return d;
    }

    friend bool operator==(const Azimuth&, const Azimuth&) = default;

private:
    double turns_ = 0.0;
};

/// Direction on the unit sphere. Polar angle is measured from +y; azimuth
/// runs from +z towards +x, so unit() = (sinθ sinφ, cosθ, sinθ cosφ).
struct SphericalDirection {
    Azimuth azimuth;
    double polar = 0.0;

    static SphericalDirection from_radians(double azimuth_rad, double polar_rad) {
        require(azimuth_rad >= 0.0 && azimuth_rad < kTwoPi, Errc::invalid_range,
                "azimuth must lie in [0, 2pi), got " + std::to_string(azimuth_rad));
        require(polar_rad >= 0.0 && polar_rad <= std::numbers::pi, Errc::invalid_range,
                "polar angle must lie in [0, pi], got " + std::to_string(polar_rad));
        return {Azimuth::from_radians(azimuth_rad), polar_rad};
    }

    Vec3 unit() const {
        const double s = std::sin(polar);
        const double phi = azimuth.radians();
        return {s * std::sin(phi), std::cos(polar), s * std::cos(phi)};
    }

    friend bool operator==(const SphericalDirection&, const SphericalDirection&) = default;
};

/// Cosine of the great-circle angle between two directions.
inline double cos_angle(const SphericalDirection& a, const SphericalDirection& b) {
    const double d = Azimuth::separation(a.azimuth, b.azimuth);
    const double c = std::sin(a.polar) * std::sin(b.polar) * std::cos(kTwoPi * d) +
                     std::cos(a.polar) * std::cos(b.polar);
    return std::clamp(c, -1.0, 1.0);
}

inline double angular_distance(const SphericalDirection& a, const SphericalDirection& b) {
    return std::acos(cos_angle(a, b));
}

struct PointLight {
    SphericalDirection direction;
    Rgb color{};

    static PointLight make(double azimuth_rad, double polar_rad, Rgb color) {
        for (double c : color) {
            require(c >= 0.0 && c <= kMaxRadiance, Errc::invalid_range,
                    "light color channel outside [0, 255]: " + std::to_string(c));
        }
        return {SphericalDirection::from_radians(azimuth_rad, polar_rad), color};
    }

    friend bool operator==(const PointLight&, const PointLight&) = default;
};

class LightSet {
public:
    LightSet(std::vector<PointLight> lights, std::uint64_t seed)
        : lights_(std::move(lights)), seed_(seed) {
        require(!lights_.empty(), Errc::empty_light_set, "a light set needs at least one light");
        for (const auto& l : lights_) {
            for (double c : l.color) {
                require(c >= 0.0 && c <= kMaxRadiance, Errc::invalid_range,
                        "light color channel outside [0, 255]");
            }
        }
    }

    const std::vector<PointLight>& lights() const noexcept { return lights_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t size() const noexcept { return lights_.size(); }

    friend bool operator==(const LightSet&, const LightSet&) = default;

private:
    std::vector<PointLight> lights_;
    std::uint64_t seed_ = 0;
};

/// Cosine-falloff accumulation of all lights, negative lobes zeroed per light
/// and the total clamped to 255 channel-wise.
inline Rgb radiance_at(const LightSet& lights, const SphericalDirection& v) {
    Rgb sum{0.0, 0.0, 0.0};
    for (const auto& light : lights.lights()) {
        const double c = cos_angle(v, light.direction);
        for (int ch = 0; ch < 3; ++ch) sum[ch] += std::max(light.color[ch] * c, 0.0);
    }
    for (double& s : sum) s = std::min(s, kMaxRadiance);
    return sum;
}

class EnvironmentMap {
public:
    EnvironmentMap(int width, int height) : texels_(checked(width, height), height) {}

    int width() const noexcept { return texels_.width(); }
    int height() const noexcept { return texels_.height(); }

    Rgb& at(int col, int row) { return texels_.at(col, row); }
    const Rgb& at(int col, int row) const { return texels_.at(col, row); }

    const RgbImage& texels() const noexcept { return texels_; }

    friend bool operator==(const EnvironmentMap&, const EnvironmentMap&) = default;

private:
    static int checked(int width, int height) {
        require(width >= 2 && height >= 2, Errc::dimension_too_small,
                "environment map must be at least 2x2, got " + std::to_string(width) + "x" +
                    std::to_string(height));
        return width;
    }

    RgbImage texels_;
};

inline constexpr int kDefaultMapWidth = 64;
inline constexpr int kDefaultMapHeight = 32;

/// Texel-center convention: column c at (c + 0.5) / width turns, row r at
/// polar pi (r + 0.5) / height. No texel sits on a pole or the seam.
inline SphericalDirection texel_direction(int col, int row, int width, int height) {
    return {Azimuth::from_turns((col + 0.5) / width), std::numbers::pi * (row + 0.5) / height};
}

inline EnvironmentMap synthesize_map(const LightSet& lights, int width = kDefaultMapWidth,
                                     int height = kDefaultMapHeight) {
    EnvironmentMap map(width, height);
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) map.at(c, r) = radiance_at(lights, texel_direction(c, r, width, height));
    }
    return map;
}

/// Bilinear lookup with azimuthal wrap-around and rows clamped at the poles.
inline Rgb sample_bilinear(const EnvironmentMap& map, const SphericalDirection& dir) {
    const int w = map.width();
    const int h = map.height();
    const double x = dir.azimuth.turns() * w - 0.5;
    const double y = dir.polar / std::numbers::pi * h - 0.5;
    const double xf = std::floor(x);
    const double yf = std::floor(y);
    const double fx = x - xf;
    const double fy = y - yf;
    const int x0 = static_cast<int>(xf);
    const int y0 = static_cast<int>(yf);
    const int c0 = ((x0 % w) + w) % w;
    const int c1 = (c0 + 1) % w;
    const int r0 = std::clamp(y0, 0, h - 1);
    const int r1 = std::clamp(y0 + 1, 0, h - 1);
    // a + f (b - a) returns a exactly when both ends agree.
    auto lerp = [](double a, double b, double f) { return a + f * (b - a); };
    Rgb out{};
    for (int ch = 0; ch < 3; ++ch) {
        const double top = lerp(map.at(c0, r0)[ch], map.at(c1, r0)[ch], fx);
        const double bottom = lerp(map.at(c0, r1)[ch], map.at(c1, r1)[ch], fx);
        out[ch] = lerp(top, bottom, fy);
    }
    return out;
}

/// Rotates every light about the polar axis by delta turns.
inline LightSet rotate_lights(const LightSet& lights, Azimuth delta) {
    std::vector<PointLight> out = lights.lights();
    for (auto& l : out) l.direction.azimuth = l.direction.azimuth.rotated(delta);
    return LightSet(std::move(out), lights.seed());
}

struct CountRange {
    int min = 1;
    int max = 8;
};

struct IntensityRange {
    double min = 0.0;
    double max = 255.0;
};

/// Directions uniform on the sphere (uniform azimuth, cos(polar) uniform in
/// [-1, 1]); colors uniform per channel in the intensity range.
inline LightSet sample_light_set(std::uint64_t seed, CountRange count = {},
                                 IntensityRange intensity = {}) {
    require(count.min >= 1 && count.max <= 64 && count.min <= count.max, Errc::invalid_range,
            "light count range must satisfy 1 <= min <= max <= 64");
    require(intensity.min >= 0.0 && intensity.max <= kMaxRadiance && intensity.min <= intensity.max,
            Errc::invalid_range, "intensity range must satisfy 0 <= min <= max <= 255");
    Rng rng(seed);
    const auto n = static_cast<int>(rng.between(count.min, count.max));
    std::vector<PointLight> lights;
    lights.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const Azimuth az = Azimuth::from_turns(rng.uniform());
        const double cos_polar = 1.0 - 2.0 * rng.uniform();
        PointLight light{{az, std::acos(cos_polar)}, {}};
        for (double& c : light.color) c = rng.uniform(intensity.min, intensity.max);
        lights.push_back(light);
    }
    return LightSet(std::move(lights), seed);
}

} // namespace relight_forge
