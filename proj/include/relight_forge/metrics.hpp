// Copyright 2026 The relight-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "relight_forge/error.hpp"
#include "relight_forge/frame_sequence.hpp"
#include "relight_forge/io.hpp"
#include "relight_forge/relight.hpp"

namespace relight_forge::metrics {

using MaskTrack = std::vector<MaskImage>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

struct MetricReport {
    double psnr = 0.0; // +inf when the scored pixels match exactly
    double ssim = 0.0;
    std::size_t pixel_count = 0;
    bool masked = false;
};

namespace detail {

inline void check_inputs(const FrameSequence& a, const FrameSequence& b, const MaskTrack* mask) {
    require_same_shape(a, b, "metric inputs differ in shape");
    require(a.length() > 0, Errc::dimension_mismatch, "metric inputs are empty");
    if (mask) {
        require(mask->size() == a.length(), Errc::dimension_mismatch, "mask track length differs from frames");
        for (const auto& m : *mask) require_same_shape(a.frames.front(), m, "mask dimensions differ from frames");
    }
}

inline double luma(const Rgb& c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; }

inline const std::array<double, kSsimWindow * kSsimWindow>& gaussian_window() {
    static const auto window = [] {
        std::array<double, kSsimWindow * kSsimWindow> w{};
        constexpr int half = kSsimWindow / 2;
        double total = 0.0;
        for (int y = 0; y < kSsimWindow; ++y) {
            for (int x = 0; x < kSsimWindow; ++x) {
                const double dx = x - half;
                const double dy = y - half;
                const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * kSsimSigma * kSsimSigma));
                w[static_cast<std::size_t>(y * kSsimWindow + x)] = v;
                total += v;
            }
        }
        for (double& v : w) v /= total;
        return w;
    }();
    return window;
}

} // namespace detail

inline std::size_t mask_count(const MaskTrack& mask) {
    std::size_t n = 0;
    for (const auto& m : mask) {
        for (auto v : m.pixels()) n += v != 0;
    }
    return n;
}

/// 10 log10(1 / MSE) per frame (dynamic range 1), averaged over frames.
/// With a mask, each frame's MSE covers only masked-in pixels and frames with
/// no masked-in pixel are skipped.
inline double psnr(const FrameSequence& a, const FrameSequence& b, const MaskTrack* mask = nullptr) {
    detail::check_inputs(a, b, mask);
    double total = 0.0;
    std::size_t scored = 0;
    for (std::size_t f = 0; f < a.length(); ++f) {
        double sq = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < a.frames[f].size(); ++i) {
            if (mask && (*mask)[f][i] == 0) continue;
            for (int ch = 0; ch < 3; ++ch) {
                const double d = a.frames[f][i][ch] - b.frames[f][i][ch];
                sq += d * d;
            }
            n += 3;
        }
        if (n == 0) continue;
        const double mse = sq / static_cast<double>(n);
        total += mse == 0.0 ? kInf : 10.0 * std::log10(1.0 / mse);
        ++scored;
    }
    require(scored > 0, Errc::empty_mask, "mask selects no pixels");
    return total / static_cast<double>(scored);
}

/// Mean SSIM over 11x11 Gaussian windows (sigma 1.5) on luma, using only
/// windows that fit inside the frame. With a mask, only windows whose center
/// pixel is masked-in are averaged, and each window's statistics use the
/// Gaussian weights of its masked-in pixels only, so pixels outside the mask
/// never influence the score. Frame scores are averaged over frames.
inline double ssim(const FrameSequence& a, const FrameSequence& b, const MaskTrack* mask = nullptr) {
    detail::check_inputs(a, b, mask);
    const int w = a.width();
    const int h = a.height();
    require(w >= kSsimWindow && h >= kSsimWindow, Errc::frame_too_small,
            "SSIM needs frames of at least 11x11, got " + std::to_string(w) + "x" + std::to_string(h));
    const auto& window = detail::gaussian_window();
    constexpr int half = kSsimWindow / 2;
    double total = 0.0;
    std::size_t scored = 0;
    std::vector<double> la(static_cast<std::size_t>(w * h));
    std::vector<double> lb(la.size());
    for (std::size_t f = 0; f < a.length(); ++f) {
        for (std::size_t i = 0; i < la.size(); ++i) {
            la[i] = detail::luma(a.frames[f][i]);
            lb[i] = detail::luma(b.frames[f][i]);
        }
        const MaskImage* m = mask ? &(*mask)[f] : nullptr;
        double frame_total = 0.0;
        std::size_t windows = 0;
        for (int cy = half; cy < h - half; ++cy) {
            for (int cx = half; cx < w - half; ++cx) {
                if (m && m->at(cx, cy) == 0) continue;
                double wsum = 0.0, ma = 0.0, mb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
                for (int dy = 0; dy < kSsimWindow; ++dy) {
                    for (int dx = 0; dx < kSsimWindow; ++dx) {
                        const int x = cx - half + dx;
                        const int y = cy - half + dy;
                        if (m && m->at(x, y) == 0) continue;
                        const double g = window[static_cast<std::size_t>(dy * kSsimWindow + dx)];
                        const auto idx = static_cast<std::size_t>(y * w + x);
                        const double va = la[idx];
                        const double vb = lb[idx];
                        wsum += g;
                        ma += g * va;
                        mb += g * vb;
                        saa += g * (va * va);
                        sbb += g * (vb * vb);
                        sab += g * (va * vb);
                    }
                }
                if (m) {
                    ma /= wsum;
                    mb /= wsum;
                    saa /= wsum;
                    sbb /= wsum;
                    sab /= wsum;
                }
                const double var_a = saa - ma * ma;
                const double var_b = sbb - mb * mb;
                const double cov = sab - ma * mb;
                const double num = (2.0 * ma * mb + kSsimC1) * (2.0 * cov + kSsimC2);
                const double den = (ma * ma + mb * mb + kSsimC1) * (var_a + var_b + kSsimC2);
                frame_total += num / den;
                ++windows;
            }
        }
        if (windows == 0) continue;
        total += frame_total / static_cast<double>(windows);
        ++scored;
    }
    require(scored > 0, Errc::empty_mask, "mask selects no SSIM window center");
    return total / static_cast<double>(scored);
}

inline MetricReport compare(const FrameSequence& a, const FrameSequence& b, const MaskTrack* mask = nullptr) {
    MetricReport r;
    r.psnr = psnr(a, b, mask);
    r.ssim = ssim(a, b, mask);
    r.masked = mask != nullptr;
    r.pixel_count = mask ? mask_count(*mask) : a.length() * static_cast<std::size_t>(a.width() * a.height());
    return r;
}

inline FrameSequence apply_mask(FrameSequence seq, const MaskTrack& mask) {
    for (std::size_t f = 0; f < seq.length(); ++f) {
        for (std::size_t i = 0; i < seq.frames[f].size(); ++i) {
            if (mask[f][i] == 0) seq.frames[f][i] = {0.0, 0.0, 0.0};
        }
    }
    return seq;
}

/// Foreground preservation without ground truth: restore both videos to
/// uniform-lit appearance, mask the foreground, and score the similarity.
/// The two-transform form covers restorers that need per-video knowledge
/// (the analytic oracle knows each video's environment map).
inline MetricReport intrinsic_consistency(const FrameSequence& src, const FrameSequence& gen, const MaskTrack& mask,
                                          const UniformLitTransform& u_src, const UniformLitTransform& u_gen) {
    detail::check_inputs(src, gen, &mask);
    require(mask_count(mask) > 0, Errc::empty_mask, "foreground mask is empty");
    const FrameSequence a = apply_mask(uniform_lit(u_src, src), mask);
    const FrameSequence b = apply_mask(uniform_lit(u_gen, gen), mask);
    require_same_shape(a, b, "restored sequences differ in shape");
    MetricReport r = compare(a, b, &mask);
    r.masked = true;
    return r;
}

inline MetricReport intrinsic_consistency(const FrameSequence& src, const FrameSequence& gen, const MaskTrack& mask,
                                          const UniformLitTransform& u) {
    return intrinsic_consistency(src, gen, mask, u, u);
}

// ---------------------------------------------------------------------------
// Reports

inline constexpr const char* kUnavailable = "unavailable";

struct BenchRow {
    std::string pair_id;
    std::string subset;
    MetricReport report;
    std::optional<double> lpips;
    std::optional<double> clip_t;
};

inline std::string format_value(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_value(*v) : kUnavailable; }

inline std::string rows_csv(const std::vector<BenchRow>& rows) {
    std::string out = "pair_id,psnr,ssim,lpips,clip_t,masked,pixel_count\n";
    for (const auto& r : rows) {
        out += r.pair_id + "," + format_value(r.report.psnr) + "," + format_value(r.report.ssim) + "," +
               format_optional(r.lpips) + "," + format_optional(r.clip_t) + "," + (r.report.masked ? "true" : "false") +
               "," + std::to_string(r.report.pixel_count) + "\n";
    }
    return out;
}

inline io::Json json_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

/// Arithmetic mean of values; nullopt when any is missing or none are given.
inline std::optional<double> mean_of(const std::vector<std::optional<double>>& values) {
    if (values.empty()) return std::nullopt;
    double total = 0.0;
    for (const auto& v : values) {
        if (!v) return std::nullopt;
        total += *v;
    }
    return total / static_cast<double>(values.size());
}

/// Per-subset means of every column, in subset-name order.
inline io::Json summary_json(const std::vector<BenchRow>& rows, const std::map<std::string, std::string>& subset_metric) {
    std::map<std::string, std::vector<const BenchRow*>> by_subset;
    for (const auto& r : rows) by_subset[r.subset].push_back(&r);
    io::Json subsets = io::Json::object();
    for (const auto& [name, members] : by_subset) {
        std::vector<std::optional<double>> p, s, l, c;
        for (const BenchRow* r : members) {
            p.emplace_back(r->report.psnr);
            s.emplace_back(r->report.ssim);
            l.push_back(r->lpips);
            c.push_back(r->clip_t);
        }
        auto opt_json = [](const std::optional<double>& v) { return v ? json_number(*v) : io::Json(kUnavailable); };
        const auto metric = subset_metric.find(name);
        subsets[name] = io::Json{{"metric", metric != subset_metric.end() ? metric->second : "paired"},
                                 {"count", members.size()},
                                 {"psnr", opt_json(mean_of(p))},
                                 {"ssim", opt_json(mean_of(s))},
                                 {"lpips", opt_json(mean_of(l))},
                                 {"clip_t", opt_json(mean_of(c))}};
    }
    return io::Json{{"version", "v1"}, {"subsets", subsets}};
}

/// External per-frame score file: one float per line; returns the mean.
inline double read_score_file(const std::filesystem::path& path) {
    std::istringstream in(io::read_file(path));
    double total = 0.0;
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            total += std::stod(line);
        } catch (const std::exception&) {
            fail(Errc::format, path.string() + ": not a number: " + line);
        }
        ++n;
    }
    require(n > 0, Errc::format, path.string() + ": no scores");
    return total / static_cast<double>(n);
}

} // namespace relight_forge::metrics
