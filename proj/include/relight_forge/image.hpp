// Copyright 2026 The relight-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "relight_forge/error.hpp"

namespace relight_forge {

using Rgb = std::array<double, 3>;

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(double s, Vec3 v) { return {s * v.x, s * v.y, s * v.z}; }
    friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(Vec3 v) { return std::sqrt(dot(v, v)); }

/// Row-major 2D grid of pixels.
template <typename Pixel>
class Image {
public:
    Image() = default;
    Image(int width, int height, Pixel fill = Pixel{})
        : width_(width), height_(height),
          pixels_(static_cast<std::size_t>(checked_area(width, height)), fill) {}

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return pixels_.size(); }
    bool empty() const noexcept { return pixels_.empty(); }

    Pixel& at(int x, int y) { return pixels_[index(x, y)]; }
    const Pixel& at(int x, int y) const { return pixels_[index(x, y)]; }

    Pixel& operator[](std::size_t i) { return pixels_[i]; }
    const Pixel& operator[](std::size_t i) const { return pixels_[i]; }

    std::vector<Pixel>& pixels() noexcept { return pixels_; }
    const std::vector<Pixel>& pixels() const noexcept { return pixels_; }

    template <typename Other>
    bool same_shape(const Image<Other>& other) const noexcept {
        return width_ == other.width() && height_ == other.height();
    }

    friend bool operator==(const Image&, const Image&) = default;

private:
    static long checked_area(int width, int height) {
        require(width >= 0 && height >= 0, Errc::dimension_too_small, "negative image dimension");
        return static_cast<long>(width) * height;
    }

    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<Pixel> pixels_;
};

using RgbImage = Image<Rgb>;
using NormalImage = Image<Vec3>;
using MaskImage = Image<std::uint8_t>;

template <typename A, typename B>
void require_same_shape(const Image<A>& a, const Image<B>& b, const std::string& what) {
    require(a.same_shape(b), Errc::dimension_mismatch,
            what + " (" + std::to_string(a.width()) + "x" + std::to_string(a.height()) + " vs " +
                std::to_string(b.width()) + "x" + std::to_string(b.height()) + ")");
}

} // namespace relight_forge
