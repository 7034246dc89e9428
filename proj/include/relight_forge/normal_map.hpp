// Copyright 2026 The relight-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "relight_forge/error.hpp"
#include "relight_forge/image.hpp"

namespace relight_forge {

/// Standard normal-map encoding: n = normalize(2 rgb - 1).
inline Vec3 decode_normal(const Rgb& rgb) {
    const Vec3 v{2.0 * rgb[0] - 1.0, 2.0 * rgb[1] - 1.0, 2.0 * rgb[2] - 1.0};
    const double len = norm(v);
    require(len >= 1e-6, Errc::degenerate_normal, "normal-map pixel decodes to a zero vector");
    return (1.0 / len) * v;
}

inline Rgb encode_normal(const Vec3& n) { return {(n.x + 1.0) * 0.5, (n.y + 1.0) * 0.5, (n.z + 1.0) * 0.5}; }

} // namespace relight_forge
