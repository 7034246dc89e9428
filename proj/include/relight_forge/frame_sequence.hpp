// Copyright 2026 The relight-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "relight_forge/error.hpp"
#include "relight_forge/image.hpp"

namespace relight_forge {

inline constexpr double kNormalTolerance = 1e-3;

/// Temporally ordered RGB frames in [0, 1] with optional per-frame normal and
/// binary mask tracks. Normals are held decoded (unit vectors).
struct FrameSequence {
    std::vector<RgbImage> frames;
    std::optional<std::vector<NormalImage>> normals;
    std::optional<std::vector<MaskImage>> masks;
    double fps = 24.0;

    std::size_t length() const noexcept { return frames.size(); }
    int width() const noexcept { return frames.empty() ? 0 : frames.front().width(); }
    int height() const noexcept { return frames.empty() ? 0 : frames.front().height(); }
    bool has_normals() const noexcept { return normals.has_value(); }
    bool has_masks() const noexcept { return masks.has_value(); }

    void validate() const {
        require(fps > 0.0, Errc::config, "fps must be positive");
        for (const auto& f : frames) require_same_shape(frames.front(), f, "frame dimensions differ within sequence");
        if (normals) {
            require(normals->size() == frames.size(), Errc::dimension_mismatch, "normal track length differs from frames");
            for (const auto& n : *normals) {
                require_same_shape(frames.front(), n, "normal map dimensions differ from frames");
                for (const auto& v : n.pixels()) {
                    require(std::abs(norm(v) - 1.0) <= kNormalTolerance, Errc::degenerate_normal,
                            "stored normal is not unit length");
                }
            }
        }
        if (masks) {
            require(masks->size() == frames.size(), Errc::dimension_mismatch, "mask track length differs from frames");
            for (const auto& m : *masks) {
                require_same_shape(frames.front(), m, "mask dimensions differ from frames");
                for (auto v : m.pixels()) require(v <= 1, Errc::format, "mask values must be 0 or 1");
            }
        }
    }
};

/// Same length and frame dimensions.
inline bool same_shape(const FrameSequence& a, const FrameSequence& b) {
    return a.length() == b.length() && a.width() == b.width() && a.height() == b.height();
}

inline void require_same_shape(const FrameSequence& a, const FrameSequence& b, const std::string& what) {
    require(same_shape(a, b), Errc::dimension_mismatch,
            what + " (" + std::to_string(a.length()) + " frames " + std::to_string(a.width()) + "x" +
                std::to_string(a.height()) + " vs " + std::to_string(b.length()) + " frames " +
                std::to_string(b.width()) + "x" + std::to_string(b.height()) + ")");
}

} // namespace relight_forge
