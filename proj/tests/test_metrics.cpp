// Copyright 2026 The relight-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "oracles.hpp"
#include "support.hpp"
#include "relight_forge/metrics.hpp"

namespace rf = relight_forge;
namespace metrics = relight_forge::metrics;
using rf::Errc;
using support::error_code;

namespace {

rf::FrameSequence constant_seq(double v, int frames = 2, int w = 16, int h = 16) {
    rf::FrameSequence s;
    s.frames.assign(static_cast<std::size_t>(frames), rf::RgbImage(w, h, {v, v, v}));
    return s;
}

rf::FrameSequence random_seq(std::uint64_t seed, int frames = 2, int w = 24, int h = 20) {
    rf::Rng rng(seed);
    rf::FrameSequence s;
    for (int f = 0; f < frames; ++f) {
        rf::RgbImage img(w, h);
        for (auto& px : img.pixels()) px = {rng.uniform(), rng.uniform(), rng.uniform()};
        s.frames.push_back(std::move(img));
    }
    return s;
}

// Left half masked-in.
metrics::MaskTrack half_mask(const rf::FrameSequence& s) {
    metrics::MaskTrack m;
    for (std::size_t f = 0; f < s.length(); ++f) {
        rf::MaskImage img(s.width(), s.height());
        for (int y = 0; y < s.height(); ++y) {
            for (int x = 0; x < s.width() / 2; ++x) img.at(x, y) = 1;
        }
        m.push_back(std::move(img));
    }
    return m;
}

rf::SyntheticScene sphere_scene() {
    rf::SyntheticScene s;
    s.width = 48;
    s.height = 48;
    s.radius = 16;
    for (int f = 0; f < 3; ++f) s.centers.push_back({22.0 + f, 24.0});
    s.albedo = {{0.8, 0.6, 0.4}, {0.3, 0.5, 0.7}, 4};
    return s;
}

// Foreground pixels that are well lit under every listed environment.
metrics::MaskTrack well_lit_mask(const rf::SyntheticScene& scene, const rf::FrameSequence& albedo,
                                 const std::vector<rf::EnvironmentMap>& envs) {
    metrics::MaskTrack m = *albedo.masks;
    for (const auto& env : envs) {
        const auto shading = rf::scene_shading(scene, env);
        for (std::size_t f = 0; f < m.size(); ++f) {
            for (std::size_t i = 0; i < m[f].size(); ++i) {
                const auto& s = shading[f][i];
                if (!(s[0] > 0.05 && s[1] > 0.05 && s[2] > 0.05)) m[f][i] = 0;
            }
        }
    }
    return m;
}

} // namespace

TEST(Psnr, IdenticalIsInfinite) {
    const auto a = random_seq(1);
    EXPECT_EQ(metrics::psnr(a, a), metrics::kInf);
}

TEST(Psnr, ConstantOffsetMatchesClosedForm) {
    // MSE 0.01 on [0, 1] data is 20 dB.
    EXPECT_NEAR(metrics::psnr(constant_seq(0.5), constant_seq(0.6)), 20.0, 1e-9);
    EXPECT_NEAR(metrics::psnr(constant_seq(0.2), constant_seq(0.21)), 40.0, 1e-9);
}

TEST(Psnr, Symmetric) {
    const auto a = random_seq(2), b = random_seq(3);
    EXPECT_EQ(metrics::psnr(a, b), metrics::psnr(b, a));
    const auto m = half_mask(a);
    EXPECT_EQ(metrics::psnr(a, b, &m), metrics::psnr(b, a, &m));
}

TEST(Psnr, ShapeMismatchRejected) {
    EXPECT_EQ(error_code([] { metrics::psnr(constant_seq(0, 2), constant_seq(0, 3)); }), Errc::dimension_mismatch);
    EXPECT_EQ(error_code([] { metrics::psnr(constant_seq(0, 2, 16, 16), constant_seq(0, 2, 16, 17)); }),
              Errc::dimension_mismatch);
}

TEST(Ssim, IdenticalIsOne) {
    const auto a = random_seq(4);
    EXPECT_EQ(metrics::ssim(a, a), 1.0);
    const auto m = half_mask(a);
    EXPECT_EQ(metrics::ssim(a, a, &m), 1.0);
}

TEST(Ssim, Symmetric) {
    const auto a = random_seq(5), b = random_seq(6);
    EXPECT_EQ(metrics::ssim(a, b), metrics::ssim(b, a));
    const auto m = half_mask(a);
    EXPECT_EQ(metrics::ssim(a, b, &m), metrics::ssim(b, a, &m));
}

TEST(Ssim, ConstantFramesMatchLuminanceTerm) {
    for (auto [x, y] : {std::pair{0.5, 0.6}, {0.1, 0.9}, {0.0, 0.3}}) {
        EXPECT_NEAR(metrics::ssim(constant_seq(x), constant_seq(y)), oracle::ssim_constant(x, y), 1e-9);
    }
}

TEST(Ssim, BoundedAndOrdered) {
    const auto a = random_seq(7);
    auto near = a;
    for (auto& f : near.frames) {
        for (auto& px : f.pixels()) px[0] = std::min(1.0, px[0] + 0.02);
    }
    const double s_near = metrics::ssim(a, near);
    const double s_far = metrics::ssim(a, random_seq(8));
    EXPECT_LT(s_near, 1.0);
    EXPECT_GT(s_near, s_far);
    EXPECT_GE(s_far, -1.0);
}

TEST(Ssim, FramesSmallerThanWindowRejected) {
    EXPECT_EQ(error_code([] { metrics::ssim(constant_seq(0, 1, 10, 20), constant_seq(0, 1, 10, 20)); }),
              Errc::frame_too_small);
}

TEST(Masked, InvariantToChangesOutsideMask) {
    const auto a = random_seq(9);
    const auto b = random_seq(10);
    const auto m = half_mask(a);
    auto b2 = b;
    rf::Rng rng(11);
    for (std::size_t f = 0; f < b2.length(); ++f) {
        for (std::size_t i = 0; i < b2.frames[f].size(); ++i) {
            if (m[f][i] == 0) b2.frames[f][i] = {rng.uniform(), rng.uniform(), rng.uniform()};
        }
    }
    EXPECT_EQ(metrics::psnr(a, b, &m), metrics::psnr(a, b2, &m));
    EXPECT_EQ(metrics::ssim(a, b, &m), metrics::ssim(a, b2, &m));
}

TEST(Masked, DifferenceOnlyOutsideMaskIsPerfect) {
    const auto a = random_seq(12);
    auto b = a;
    const auto m = half_mask(a);
    for (std::size_t f = 0; f < b.length(); ++f) {
        for (std::size_t i = 0; i < b.frames[f].size(); ++i) {
            if (m[f][i] == 0) b.frames[f][i] = {1, 0, 1};
        }
    }
    EXPECT_EQ(metrics::psnr(a, b, &m), metrics::kInf);
    EXPECT_EQ(metrics::ssim(a, b, &m), 1.0);
}

TEST(Masked, EmptyMaskRejected) {
    const auto a = random_seq(13);
    metrics::MaskTrack m(a.length(), rf::MaskImage(a.width(), a.height()));
    EXPECT_EQ(error_code([&] { metrics::psnr(a, a, &m); }), Errc::empty_mask);
    EXPECT_EQ(error_code([&] { metrics::ssim(a, a, &m); }), Errc::empty_mask);
}

TEST(Masked, MaskShapeMismatchRejected) {
    const auto a = random_seq(14);
    metrics::MaskTrack m(a.length(), rf::MaskImage(a.width() + 1, a.height(), 1));
    EXPECT_EQ(error_code([&] { metrics::psnr(a, a, &m); }), Errc::dimension_mismatch);
}

TEST(Compare, ReportsPixelCount) {
    const auto a = random_seq(15);
    const auto m = half_mask(a);
    const auto r = metrics::compare(a, a, &m);
    EXPECT_TRUE(r.masked);
    EXPECT_EQ(r.pixel_count, a.length() * static_cast<std::size_t>(a.width() / 2 * a.height()));
    EXPECT_FALSE(metrics::compare(a, a).masked);
}

TEST(IntrinsicConsistency, IdenticalInputIsPerfect) {
    const auto scene = sphere_scene();
    const auto albedo = rf::render_scene(scene);
    const auto env = rf::synthesize_map(rf::sample_light_set(3, {4, 8}, {80, 255}));
    const auto relit = rf::relight_sequence(albedo, env);
    const auto u = rf::UniformLitTransform::analytic_oracle(scene, env);
    const auto r = metrics::intrinsic_consistency(relit, relit, *albedo.masks, u);
    EXPECT_EQ(r.psnr, metrics::kInf);
    EXPECT_EQ(r.ssim, 1.0);
}

TEST(IntrinsicConsistency, RelitUnderOtherEnvironmentRestoresToSameAlbedo) {
    const auto scene = sphere_scene();
    const auto albedo = rf::render_scene(scene);
    const auto env_a = rf::synthesize_map(rf::sample_light_set(4, {4, 8}, {80, 255}));
    const auto env_b = rf::synthesize_map(rf::sample_light_set(5, {4, 8}, {80, 255}));
    const auto src = rf::relight_sequence(albedo, env_a);
    const auto gen = rf::relight_sequence(albedo, env_b);
    const auto mask = well_lit_mask(scene, albedo, {env_a, env_b});
    const auto r = metrics::intrinsic_consistency(src, gen, mask, rf::UniformLitTransform::analytic_oracle(scene, env_a),
                                                  rf::UniformLitTransform::analytic_oracle(scene, env_b));
    EXPECT_GE(r.psnr, 40.0);
    EXPECT_GT(r.ssim, 0.99);
    // The raw frames differ, so the restoration is doing the work.
    EXPECT_LT(metrics::psnr(src, gen, &mask), 40.0);
}

TEST(IntrinsicConsistency, AlbedoShiftLowersScoreMonotonically) {
    const auto scene = sphere_scene();
    const auto albedo = rf::render_scene(scene);
    const auto env = rf::synthesize_map(rf::sample_light_set(6, {4, 8}, {80, 255}));
    const auto src = rf::relight_sequence(albedo, env);
    const auto mask = well_lit_mask(scene, albedo, {env});
    const auto u = rf::UniformLitTransform::analytic_oracle(scene, env);
    double previous = metrics::kInf;
    for (double shift : {0.02, 0.05, 0.1}) {
        rf::FrameSequence shifted = albedo;
        for (auto& f : shifted.frames) {
            for (auto& px : f.pixels()) {
                for (double& c : px) c = std::min(1.0, c + shift);
            }
        }
        const auto gen = rf::relight_sequence(shifted, env);
        const double p = metrics::intrinsic_consistency(src, gen, mask, u).psnr;
        EXPECT_LT(p, previous) << "shift " << shift;
        previous = p;
    }
}

TEST(IntrinsicConsistency, IdentityTransformIsMaskedComparison) {
    const auto a = random_seq(16), b = random_seq(17);
    const auto m = half_mask(a);
    const auto r = metrics::intrinsic_consistency(a, b, m, rf::UniformLitTransform::identity());
    const auto direct = metrics::compare(metrics::apply_mask(a, m), metrics::apply_mask(b, m), &m);
    EXPECT_EQ(r.psnr, direct.psnr);
    EXPECT_EQ(r.ssim, direct.ssim);
    EXPECT_EQ(r.psnr, metrics::psnr(a, b, &m));
}

TEST(IntrinsicConsistency, EmptyMaskRejected) {
    const auto a = random_seq(18);
    metrics::MaskTrack m(a.length(), rf::MaskImage(a.width(), a.height()));
    EXPECT_EQ(error_code([&] { metrics::intrinsic_consistency(a, a, m, rf::UniformLitTransform::identity()); }),
              Errc::empty_mask);
}

TEST(Report, FormatValue) {
    EXPECT_EQ(metrics::format_value(20.0), "20.000000");
    EXPECT_EQ(metrics::format_value(metrics::kInf), "inf");
    EXPECT_EQ(metrics::format_value(0.1234567), "0.123457");
}

TEST(Report, RowsCsv) {
    metrics::BenchRow row{"g0:0->1", "paired_3d", {metrics::kInf, 1.0, 12, true}, 0.25, std::nullopt};
    EXPECT_EQ(metrics::rows_csv({row}),
              "pair_id,psnr,ssim,lpips,clip_t,masked,pixel_count\n"
              "g0:0->1,inf,1.000000,0.250000,unavailable,true,12\n");
}

TEST(Report, SummaryMeansPerSubset) {
    std::vector<metrics::BenchRow> rows;
    rows.push_back({"a", "paired_3d", {10.0, 0.5, 1, true}, 0.1, std::nullopt});
    rows.push_back({"b", "paired_3d", {20.0, 0.7, 1, true}, 0.3, std::nullopt});
    rows.push_back({"c", "unpaired", {metrics::kInf, 1.0, 1, true}, std::nullopt, 0.9});
    const auto j = metrics::summary_json(rows, {{"unpaired", "intrinsic_consistency"}});
    const auto& p = j.at("subsets").at("paired_3d");
    EXPECT_EQ(p.at("count"), 2);
    EXPECT_DOUBLE_EQ(p.at("psnr").get<double>(), 15.0);
    EXPECT_DOUBLE_EQ(p.at("ssim").get<double>(), 0.6);
    EXPECT_DOUBLE_EQ(p.at("lpips").get<double>(), 0.2);
    EXPECT_EQ(p.at("clip_t"), "unavailable");
    EXPECT_EQ(p.at("metric"), "paired");
    const auto& u = j.at("subsets").at("unpaired");
    EXPECT_EQ(u.at("psnr"), "inf");
    EXPECT_EQ(u.at("metric"), "intrinsic_consistency");
}

TEST(Report, ScoreFileMean) {
    support::TempDir dir;
    std::ofstream(dir / "s.txt") << "0.5\n\n1.5\n  \n";
    EXPECT_DOUBLE_EQ(metrics::read_score_file(dir / "s.txt"), 1.0);
    std::ofstream(dir / "bad.txt") << "0.5\nnope\n";
    EXPECT_EQ(error_code([&] { metrics::read_score_file(dir / "bad.txt"); }), Errc::format);
    std::ofstream(dir / "empty.txt") << "\n";
    EXPECT_EQ(error_code([&] { metrics::read_score_file(dir / "empty.txt"); }), Errc::format);
}
