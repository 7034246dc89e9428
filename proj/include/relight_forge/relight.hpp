// Copyright 2026 The relight-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "relight_forge/envmap.hpp"
#include "relight_forge/error.hpp"
#include "relight_forge/frame_sequence.hpp"
#include "relight_forge/image.hpp"
#include "relight_forge/io.hpp"
#include "relight_forge/normal_map.hpp"
#include "relight_forge/parallel.hpp"
#include "relight_forge/rng.hpp"

namespace relight_forge {

/// Camera-space normal to environment direction: azimuth atan2(n_x, n_z)
/// wrapped to [0, 2pi), polar arccos(n_y). Renderer and oracles share this.
inline SphericalDirection normal_direction(const Vec3& n) {
    const double len = norm(n);
    require(len >= 1e-6, Errc::degenerate_normal, "zero-length normal");
    const Vec3 u = (1.0 / len) * n;
    return {Azimuth::from_radians(std::atan2(u.x, u.z)), std::acos(std::clamp(u.y, -1.0, 1.0))};
}

/// Irradiance lookup for a normal, scaled to [0, 1].
inline Rgb shading_for_normal(const EnvironmentMap& env, const Vec3& n) {
    Rgb s = sample_bilinear(env, normal_direction(n));
    for (double& c : s) c /= kMaxRadiance;
    return s;
}

/// Lambertian relighting: out = uniform_lit * shading(normal), clamped to
/// [0, 1]. Pixels whose mask is 0 are zeroed.
inline RgbImage relight_frame(const RgbImage& uniform_lit, const NormalImage& normals, const EnvironmentMap& env,
                              const MaskImage* mask = nullptr) {
    require_same_shape(uniform_lit, normals, "relight_frame: normals do not match frame");
    if (mask) require_same_shape(uniform_lit, *mask, "relight_frame: mask does not match frame");
    RgbImage out(uniform_lit.width(), uniform_lit.height());
    for (std::size_t i = 0; i < uniform_lit.size(); ++i) {
        if (mask && (*mask)[i] == 0) continue;
        const Rgb s = shading_for_normal(env, normals[i]);
        for (int ch = 0; ch < 3; ++ch) out[i][ch] = std::clamp(uniform_lit[i][ch] * s[ch], 0.0, 1.0);
    }
    return out;
}

/// Relights every frame under the same map; frames are processed in parallel.
inline FrameSequence relight_sequence(const FrameSequence& seq, const EnvironmentMap& env) {
    require(seq.has_normals(), Errc::missing_track, "relight_sequence requires a normals track");
    require(seq.normals->size() == seq.length(), Errc::dimension_mismatch, "normal track length differs from frames");
    FrameSequence out;
    out.fps = seq.fps;
    out.normals = seq.normals;
    out.masks = seq.masks;
    out.frames.resize(seq.length());
    parallel_for(seq.length(), [&](std::size_t i) {
        const MaskImage* mask = seq.masks ? &(*seq.masks)[i] : nullptr;
        out.frames[i] = relight_frame(seq.frames[i], (*seq.normals)[i], env, mask);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Analytic sphere scenes

struct CheckerAlbedo {
    Rgb color_a{0.8, 0.8, 0.8};
    Rgb color_b{0.3, 0.3, 0.3};
    int cell = 4;

    friend bool operator==(const CheckerAlbedo&, const CheckerAlbedo&) = default;
};

/// An orthographically viewed sphere moving along a per-frame trajectory of
/// pixel-space centers, textured by a checker that travels with it.
struct SyntheticScene {
    int width = 64;
    int height = 64;
    double radius = 16.0;
    std::vector<std::array<double, 2>> centers;
    CheckerAlbedo albedo;

    std::size_t frame_count() const noexcept { return centers.size(); }

    void validate() const {
        require(width > 0 && height > 0, Errc::dimension_too_small, "scene image must be non-empty");
        require(radius > 0.0, Errc::invalid_range, "sphere radius must be positive");
        require(!centers.empty(), Errc::invalid_range, "scene needs at least one frame");
        require(albedo.cell >= 1, Errc::invalid_range, "checker cell size must be >= 1");
        for (const Rgb* c : {&albedo.color_a, &albedo.color_b}) {
            for (double v : *c) require(v >= 0.0 && v <= 1.0, Errc::invalid_range, "albedo outside [0, 1]");
        }
        for (const auto& [cx, cy] : centers) {
            require(cx - radius >= 0.0 && cx + radius <= width - 1 && cy - radius >= 0.0 && cy + radius <= height - 1,
                    Errc::sphere_out_of_bounds,
                    "sphere at (" + std::to_string(cx) + ", " + std::to_string(cy) + ") with radius " +
                        std::to_string(radius) + " leaves the image");
        }
    }

    friend bool operator==(const SyntheticScene&, const SyntheticScene&) = default;
};

/// Albedo frames (the uniform-lit ground truth), analytic normals
/// n = ((x - cx)/R, (cy - y)/R, sqrt(1 - r^2/R^2)) and exact disc masks.
/// Background pixels carry albedo 0, mask 0 and the flat normal (0, 0, 1).
inline FrameSequence render_scene(const SyntheticScene& scene) {
    scene.validate();
    FrameSequence seq;
    std::vector<NormalImage> normals;
    std::vector<MaskImage> masks;
    const double r2max = scene.radius * scene.radius;
    for (const auto& [cx, cy] : scene.centers) {
        RgbImage albedo(scene.width, scene.height);
        NormalImage normal(scene.width, scene.height, Vec3{0.0, 0.0, 1.0});
        MaskImage mask(scene.width, scene.height, 0);
        for (int y = 0; y < scene.height; ++y) {
            for (int x = 0; x < scene.width; ++x) {
                const double dx = x - cx;
                const double dy = cy - y;
                const double r2 = dx * dx + dy * dy;
                if (r2 >= r2max) continue;
                normal.at(x, y) = {dx / scene.radius, dy / scene.radius, std::sqrt(1.0 - r2 / r2max)};
                mask.at(x, y) = 1;
                const auto i = static_cast<long>(std::floor(dx / scene.albedo.cell));
                const auto j = static_cast<long>(std::floor(dy / scene.albedo.cell));
                albedo.at(x, y) = ((i + j) & 1) == 0 ? scene.albedo.color_a : scene.albedo.color_b;
            }
        }
        seq.frames.push_back(std::move(albedo));
        normals.push_back(std::move(normal));
        masks.push_back(std::move(mask));
    }
    seq.normals = std::move(normals);
    seq.masks = std::move(masks);
    return seq;
}

/// Per-frame shading (irradiance / 255) the renderer applies to a scene.
inline std::vector<RgbImage> scene_shading(const SyntheticScene& scene, const EnvironmentMap& env) {
    const FrameSequence geometry = render_scene(scene);
    std::vector<RgbImage> out;
    for (const auto& n : *geometry.normals) {
        RgbImage s(n.width(), n.height());
        for (std::size_t i = 0; i < n.size(); ++i) s[i] = shading_for_normal(env, n[i]);
        out.push_back(std::move(s));
    }
    return out;
}

struct SceneOptions {
    int width = 64;
    int height = 64;
    int frames = 16;
    double min_radius_fraction = 0.2;
    double max_radius_fraction = 0.3;
};

/// Random sphere with a linear trajectory and a random two-color checker.
inline SyntheticScene random_scene(std::uint64_t seed, const SceneOptions& opt = {}) {
    require(opt.frames >= 1, Errc::invalid_range, "scene needs at least one frame");
    require(opt.min_radius_fraction > 0.0 && opt.min_radius_fraction <= opt.max_radius_fraction &&
                opt.max_radius_fraction < 0.5,
            Errc::invalid_range, "radius fractions must satisfy 0 < min <= max < 0.5");
    Rng rng(seed);
    SyntheticScene s;
    s.width = opt.width;
    s.height = opt.height;
    const double extent = std::min(opt.width, opt.height) - 1;
    s.radius = std::floor(extent * rng.uniform(opt.min_radius_fraction, opt.max_radius_fraction));
    require(s.radius >= 1.0, Errc::dimension_too_small, "image too small for a sphere");
    auto random_center = [&] {
        return std::array<double, 2>{std::round(rng.uniform(s.radius, opt.width - 1 - s.radius)),
                                     std::round(rng.uniform(s.radius, opt.height - 1 - s.radius))};
    };
    const auto start = random_center();
    const auto end = random_center();
    for (int f = 0; f < opt.frames; ++f) {
        const double a = opt.frames == 1 ? 0.0 : static_cast<double>(f) / (opt.frames - 1);
        s.centers.push_back({start[0] + a * (end[0] - start[0]), start[1] + a * (end[1] - start[1])});
    }
    for (double& c : s.albedo.color_a) c = rng.uniform(0.45, 0.95);
    for (double& c : s.albedo.color_b) c = rng.uniform(0.1, 0.5);
    s.albedo.cell = static_cast<int>(rng.between(2, std::max(2, static_cast<int>(s.radius / 2))));
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// Uniform-lit transform

inline constexpr double kShadingFloor = 0.02;

enum class UniformLitKind { identity, analytic_oracle, external_frames };

/// Maps a relit sequence back to its uniform-lit appearance.
///
/// analytic_oracle divides by the known shading of a scene rendered under a
/// known map; pixels with any shading channel <= 0.02 pass through.
/// external_frames loads frames precomputed elsewhere (a sequence directory).
/// identity passes the input through.
struct UniformLitTransform {
    UniformLitKind kind = UniformLitKind::identity;
    std::optional<SyntheticScene> scene;
    std::optional<EnvironmentMap> env;
    std::filesystem::path external_dir;

    static UniformLitTransform identity() { return {}; }

    static UniformLitTransform analytic_oracle(SyntheticScene scene, EnvironmentMap env) {
        scene.validate();
        return {UniformLitKind::analytic_oracle, std::move(scene), std::move(env), {}};
    }

    static UniformLitTransform external(std::filesystem::path dir) {
        return {UniformLitKind::external_frames, std::nullopt, std::nullopt, std::move(dir)};
    }
};

inline FrameSequence uniform_lit(const UniformLitTransform& transform, const FrameSequence& seq) {
    switch (transform.kind) {
    case UniformLitKind::identity:
        return seq;
    case UniformLitKind::external_frames: {
        FrameSequence loaded = io::read_sequence(transform.external_dir);
        require_same_shape(loaded, seq, "external uniform-lit frames do not match the input");
        if (!loaded.masks) loaded.masks = seq.masks;
        if (!loaded.normals) loaded.normals = seq.normals;
        return loaded;
    }
    case UniformLitKind::analytic_oracle:
        break;
    }
    const SyntheticScene& scene = *transform.scene;
    require(seq.length() == scene.frame_count() && seq.width() == scene.width && seq.height() == scene.height,
            Errc::oracle_mismatch, "sequence shape differs from the oracle's scene");
    const std::vector<RgbImage> shading = scene_shading(scene, *transform.env);
    FrameSequence out = seq;
    parallel_for(seq.length(), [&](std::size_t f) {
        RgbImage& frame = out.frames[f];
        const RgbImage& s = shading[f];
        for (std::size_t i = 0; i < frame.size(); ++i) {
            if (s[i][0] > kShadingFloor && s[i][1] > kShadingFloor && s[i][2] > kShadingFloor) {
                for (int ch = 0; ch < 3; ++ch) frame[i][ch] = std::min(seq.frames[f][i][ch] / s[i][ch], 1.0);
            }
        }
    });
    return out;
}

} // namespace relight_forge
