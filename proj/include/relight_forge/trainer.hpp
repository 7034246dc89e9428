// Copyright 2026 The relight-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "relight_forge/dataset.hpp"
#include "relight_forge/error.hpp"
#include "relight_forge/frame_sequence.hpp"
#include "relight_forge/rng.hpp"

namespace relight_forge::trainer {

using dataset::Domain;

enum class TargetMode { epsilon, velocity };

inline const char* target_mode_name(TargetMode m) { return m == TargetMode::epsilon ? "epsilon" : "velocity"; }

inline TargetMode parse_target_mode(const std::string& s) {
    if (s == "epsilon") return TargetMode::epsilon;
    if (s == "velocity") return TargetMode::velocity;
    fail(Errc::config, "unknown target mode '" + s + "'");
}

// ---------------------------------------------------------------------------
// Latent grids and the toy codec

/// channels x frames x height x width grid, channel-major.
struct Latent {
    int channels = 0;
    int frames = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Latent() = default;
    Latent(int c, int t, int h, int w, double fill = 0.0)
        : channels(c), frames(t), height(h), width(w),
          data(static_cast<std::size_t>(c) * static_cast<std::size_t>(t) * static_cast<std::size_t>(h) *
                   static_cast<std::size_t>(w),
               fill) {}

    std::size_t pixels() const noexcept {
        return static_cast<std::size_t>(frames) * static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    }
    double& at(int c, std::size_t p) { return data[static_cast<std::size_t>(c) * pixels() + p]; }
    double at(int c, std::size_t p) const { return data[static_cast<std::size_t>(c) * pixels() + p]; }

    bool same_grid(const Latent& o) const noexcept {
        return frames == o.frames && height == o.height && width == o.width;
    }
    bool same_shape(const Latent& o) const noexcept { return channels == o.channels && same_grid(o); }

    friend bool operator==(const Latent&, const Latent&) = default;
};

/// Stand-in for a video VAE: average pooling by `factor` to encode, nearest
/// neighbour upsampling to decode.
class ToyLatentCodec {
public:
    explicit ToyLatentCodec(int factor = 4) : factor_(factor) {
        require(factor >= 1, Errc::config, "codec downsample factor must be positive");
    }

    int factor() const noexcept { return factor_; }

    Latent encode(const FrameSequence& seq) const { return encode_impl(seq, nullptr); }

    /// Encodes seq with every masked-out pixel zeroed first.
    Latent encode_masked(const FrameSequence& seq, const std::vector<MaskImage>& mask) const {
        require(mask.size() == seq.length(), Errc::shape_mismatch, "mask track length differs from frames");
        for (const auto& m : mask) require_same_shape(seq.frames.front(), m, "mask shape differs from frames");
        return encode_impl(seq, &mask);
    }

    FrameSequence decode(const Latent& z, double fps = 24.0) const {
        require(z.channels == 3, Errc::shape_mismatch, "decode expects a 3-channel latent");
        FrameSequence seq;
        seq.fps = fps;
        for (int t = 0; t < z.frames; ++t) {
            RgbImage img(z.width * factor_, z.height * factor_);
            for (int y = 0; y < img.height(); ++y) {
                for (int x = 0; x < img.width(); ++x) {
                    const std::size_t p = (static_cast<std::size_t>(t) * z.height + y / factor_) * z.width + x / factor_;
                    for (int c = 0; c < 3; ++c) img.at(x, y)[c] = std::clamp(z.at(c, p), 0.0, 1.0);
                }
            }
            seq.frames.push_back(std::move(img));
        }
        return seq;
    }

private:
    Latent encode_impl(const FrameSequence& seq, const std::vector<MaskImage>* mask) const {
        require(seq.length() > 0, Errc::shape_mismatch, "cannot encode an empty sequence");
        const int w = seq.width();
        const int h = seq.height();
        require(w % factor_ == 0 && h % factor_ == 0, Errc::shape_mismatch,
                "frame size " + std::to_string(w) + "x" + std::to_string(h) + " is not divisible by the codec factor " +
                    std::to_string(factor_));
        Latent z(3, static_cast<int>(seq.length()), h / factor_, w / factor_);
        const double n = static_cast<double>(factor_) * factor_;
        for (int t = 0; t < z.frames; ++t) {
            const RgbImage& img = seq.frames[static_cast<std::size_t>(t)];
            auto value = [&](int x, int y, int c) {
                if (mask && (*mask)[static_cast<std::size_t>(t)].at(x, y) == 0) return 0.0;
                return img.at(x, y)[c];
            };
            for (int by = 0; by < z.height; ++by) {
                for (int bx = 0; bx < z.width; ++bx) {
                    const std::size_t p = (static_cast<std::size_t>(t) * z.height + by) * z.width + bx;
                    for (int c = 0; c < 3; ++c) {
                        // Mean as offset from the first sample: exact for constant blocks.
                        const double first = value(bx * factor_, by * factor_, c);
                        double dev = 0.0;
                        for (int y = 0; y < factor_; ++y) {
                            for (int x = 0; x < factor_; ++x) dev += value(bx * factor_ + x, by * factor_ + y, c) - first;
                        }
                        z.at(c, p) = first + dev / n;
                    }
                }
            }
        }
        return z;
    }

    int factor_;
};

// ---------------------------------------------------------------------------
// Parameters

struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}

    double& operator()(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

struct ModelConfig {
    int latent_channels = 3;
    int hidden = 64;
    int time_frequencies = 4;
    int cond_dim = 8;
    /// Number of plain condition codes; the embedding table holds twice as
    /// many rows, the upper half reserved for synthetic-style codes.
    int condition_codes = 8;

    int input_dim() const { return 2 * latent_channels + 2 * time_frequencies + cond_dim; }
    int style_offset() const { return condition_codes; }
    int table_rows() const { return 2 * condition_codes; }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Per-latent-pixel map: y = W2 tanh(W1 x + b1) + b2 with
/// x = [noisy block, source block, time embedding, condition embedding].
struct ModelParams {
    ModelConfig config;
    Matrix w1;
    std::vector<double> b1;
    Matrix w2;
    std::vector<double> b2;
    Matrix cond_table;

    static ModelParams zeros(const ModelConfig& cfg) {
        require(cfg.latent_channels >= 1 && cfg.hidden >= 1 && cfg.time_frequencies >= 0 && cfg.cond_dim >= 0 &&
                    cfg.condition_codes >= 1,
                Errc::config, "invalid model configuration");
        ModelParams p;
        p.config = cfg;
        p.w1 = Matrix(cfg.hidden, cfg.input_dim());
        p.b1.assign(static_cast<std::size_t>(cfg.hidden), 0.0);
        p.w2 = Matrix(cfg.latent_channels, cfg.hidden);
        p.b2.assign(static_cast<std::size_t>(cfg.latent_channels), 0.0);
        p.cond_table = Matrix(cfg.table_rows(), cfg.cond_dim);
        return p;
    }

    static ModelParams init(const ModelConfig& cfg, std::uint64_t seed) {
        ModelParams p = zeros(cfg);
        Rng rng(seed);
        const double s1 = 1.0 / std::sqrt(static_cast<double>(cfg.input_dim()));
        const double s2 = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
        for (double& v : p.w1.v) v = rng.uniform(-s1, s1);
        for (double& v : p.w2.v) v = rng.uniform(-s2, s2);
        for (double& v : p.cond_table.v) v = rng.uniform(-0.5, 0.5);
        return p;
    }

    /// Visits every tensor as (name, values) in a fixed order.
    template <typename Self, typename Fn>
    static void visit(Self& self, Fn&& fn) {
        fn("w1", self.w1.v);
        fn("b1", self.b1);
        fn("w2", self.w2.v);
        fn("b2", self.b2);
        fn("cond_table", self.cond_table.v);
    }

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Low-rank deltas on both weight matrices: W_eff = W + (alpha / rank) B A.
struct AdapterParams {
    int rank = 16;
    double alpha = 16.0;
    bool active = true;
    Matrix a1; // rank x input_dim
    Matrix b1; // hidden x rank
    Matrix a2; // rank x hidden
    Matrix b2; // channels x rank

    double scale() const { return alpha / rank; }

    static AdapterParams zeros(const ModelConfig& cfg, int rank, double alpha) {
        require(rank >= 1, Errc::config, "adapter rank must be >= 1");
        AdapterParams a;
        a.rank = rank;
        a.alpha = alpha;
        a.a1 = Matrix(rank, cfg.input_dim());
        a.b1 = Matrix(cfg.hidden, rank);
        a.a2 = Matrix(rank, cfg.hidden);
        a.b2 = Matrix(cfg.latent_channels, rank);
        return a;
    }

    /// Down-projections uniform(-0.01, 0.01), up-projections zero, so the
    /// initial delta vanishes.
    static AdapterParams init(const ModelConfig& cfg, int rank, double alpha, std::uint64_t seed) {
        AdapterParams a = zeros(cfg, rank, alpha);
        Rng rng(seed);
        for (double& v : a.a1.v) v = rng.uniform(-0.01, 0.01);
        for (double& v : a.a2.v) v = rng.uniform(-0.01, 0.01);
        return a;
    }

    template <typename Self, typename Fn>
    static void visit(Self& self, Fn&& fn) {
        fn("a1", self.a1.v);
        fn("b1", self.b1.v);
        fn("a2", self.a2.v);
        fn("b2", self.b2.v);
    }

    friend bool operator==(const AdapterParams&, const AdapterParams&) = default;
};

inline void require_compatible(const ModelParams& p, const AdapterParams& a) {
    require(a.a1.cols == p.w1.cols && a.b1.rows == p.w1.rows && a.a2.cols == p.w2.cols && a.b2.rows == p.w2.rows &&
                a.a1.rows == a.rank && a.b1.cols == a.rank && a.a2.rows == a.rank && a.b2.cols == a.rank,
            Errc::shape_mismatch, "adapter shapes do not match the model");
}

/// Folds an adapter into the base weights.
inline ModelParams merge_adapter(const ModelParams& p, const AdapterParams& a) {
    require_compatible(p, a);
    ModelParams out = p;
    const double s = a.scale();
    auto fold = [&](Matrix& w, const Matrix& up, const Matrix& down) {
        for (int r = 0; r < w.rows; ++r) {
            for (int c = 0; c < w.cols; ++c) {
                double acc = 0.0;
                for (int k = 0; k < a.rank; ++k) acc += up(r, k) * down(k, c);
                w(r, c) += s * acc;
            }
        }
    };
    fold(out.w1, a.b1, a.a1);
    fold(out.w2, a.b2, a.a2);
    return out;
}

/// 64-bit FNV-1a over the raw bytes of every tensor.
template <typename Params>
std::uint64_t checksum(const Params& params) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    Params::visit(params, [&](const char*, const std::vector<double>& values) {
        for (double v : values) {
            unsigned char bytes[sizeof(double)];
            std::memcpy(bytes, &v, sizeof v);
            for (unsigned char b : bytes) {
                h ^= b;
                h *= 0x100000001b3ULL;
            }
        }
    });
    return h;
}

// ---------------------------------------------------------------------------
// Samples

/// Model input: channels [0, C) hold E(V_tar)(1 - t) + eps t, channels
/// [C, 2C) hold E(V_src * M_fg).
struct TrainingSample {
    Latent x;
    double t = 0.0;
    Latent eps;
    int cond = 0;
    Domain domain = Domain::synthetic;
};

/// Encoded training pair: the clean target latent and the masked source latent.
struct EncodedPair {
    std::string pair_id;
    Latent target;
    Latent source;
    int cond = 0;
    Domain domain = Domain::synthetic;
};

inline EncodedPair encode_pair(const dataset::LoadedPair& pair, const ToyLatentCodec& codec) {
    return {pair.record.pair_id(), codec.encode(pair.tar), codec.encode_masked(pair.src, pair.mask),
            pair.record.condition_code, pair.record.domain};
}

inline TrainingSample make_sample(const Latent& target, const Latent& source, double t, const Latent& eps, int cond,
                                  Domain domain) {
    require(t >= 0.0 && t <= 1.0, Errc::config, "timestep must lie in [0, 1]");
    require(eps.same_shape(target), Errc::shape_mismatch, "noise shape differs from the target latent");
    require(source.same_shape(target), Errc::shape_mismatch, "source latent shape differs from the target latent");
    const int c = target.channels;
    TrainingSample s{Latent(2 * c, target.frames, target.height, target.width), t, eps, cond, domain};
    const std::size_t n = target.data.size();
    for (std::size_t i = 0; i < n; ++i) {
        s.x.data[i] = target.data[i] * (1.0 - t) + eps.data[i] * t;
        s.x.data[n + i] = source.data[i];
    }
    return s;
}

inline TrainingSample make_sample(const EncodedPair& pair, double t, const Latent& eps) {
    return make_sample(pair.target, pair.source, t, eps, pair.cond, pair.domain);
}

inline TrainingSample make_sample(const dataset::LoadedPair& pair, double t, const Latent& eps,
                                  const ToyLatentCodec& codec) {
    require_same_shape(pair.src, pair.tar, "pair members differ in shape");
    return make_sample(encode_pair(pair, codec), t, eps);
}

inline Latent normal_latent(Rng& rng, int c, int t, int h, int w) {
    Latent z(c, t, h, w);
    for (double& v : z.data) v = rng.normal();
    return z;
}

/// Regression target for a sample built from `target`.
inline Latent regression_target(const TrainingSample& s, const Latent& target, TargetMode mode) {
    if (mode == TargetMode::epsilon) return s.eps;
    Latent v = s.eps;
    for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] -= target.data[i];
    return v;
}

// ---------------------------------------------------------------------------
// Forward and backward

namespace detail {

inline std::vector<double> time_embedding(double t, int frequencies) {
    std::vector<double> e;
    e.reserve(static_cast<std::size_t>(2 * frequencies));
    for (int k = 0; k < frequencies; ++k) {
        const double w = std::numbers::pi * std::ldexp(1.0, k);
        e.push_back(std::sin(w * t));
        e.push_back(std::cos(w * t));
    }
    return e;
}

struct Gradients {
    ModelParams* base = nullptr;
    AdapterParams* adapter = nullptr;
};

/// Forward pass over every latent pixel; when `target` is given, also
/// accumulates d(mean squared error)/d(params) into `grads` and returns the
/// loss. Output goes to `out` when non-null.
inline double run(const ModelParams& p, const AdapterParams* adapter, const TrainingSample& s, const Latent* target,
                  Gradients grads, Latent* out) {
    const ModelConfig& cfg = p.config;
    const int C = cfg.latent_channels;
    const int H = cfg.hidden;
    const int D = cfg.input_dim();
    require(s.x.channels == 2 * C, Errc::shape_mismatch, "sample has the wrong channel count for the model");
    require(s.cond >= 0 && s.cond < cfg.table_rows(), Errc::config,
            "condition code " + std::to_string(s.cond) + " outside the embedding table");
    const bool use_adapter = adapter != nullptr && adapter->active;
    if (use_adapter) require_compatible(p, *adapter);
    const int R = use_adapter ? adapter->rank : 0;
    const double sc = use_adapter ? adapter->scale() : 0.0;

    const std::size_t P = s.x.pixels();
    if (out) *out = Latent(C, s.x.frames, s.x.height, s.x.width);
    if (target) require(target->channels == C && target->same_grid(s.x), Errc::shape_mismatch, "target shape");

    std::vector<double> xin(static_cast<std::size_t>(D));
    const std::vector<double> temb = time_embedding(s.t, cfg.time_frequencies);
    std::copy(temb.begin(), temb.end(), xin.begin() + 2 * C);
    for (int k = 0; k < cfg.cond_dim; ++k) xin[static_cast<std::size_t>(2 * C + 2 * cfg.time_frequencies + k)] = p.cond_table(s.cond, k);

    std::vector<double> a1(static_cast<std::size_t>(R)), h(static_cast<std::size_t>(H)), a2(static_cast<std::size_t>(R));
    std::vector<double> y(static_cast<std::size_t>(C)), gy(static_cast<std::size_t>(C));
    std::vector<double> ub2(static_cast<std::size_t>(R)), gh(static_cast<std::size_t>(H)), gpre(static_cast<std::size_t>(H));
    std::vector<double> ub1(static_cast<std::size_t>(R)), gx(static_cast<std::size_t>(D));
    const double inv_n = 1.0 / (static_cast<double>(C) * static_cast<double>(P));
    double loss = 0.0;

    for (std::size_t px = 0; px < P; ++px) {
        for (int i = 0; i < 2 * C; ++i) xin[static_cast<std::size_t>(i)] = s.x.at(i, px);

        for (int r = 0; r < R; ++r) {
            double acc = 0.0;
            for (int i = 0; i < D; ++i) acc += adapter->a1(r, i) * xin[static_cast<std::size_t>(i)];
            a1[static_cast<std::size_t>(r)] = acc;
        }
        for (int j = 0; j < H; ++j) {
            double acc = p.b1[static_cast<std::size_t>(j)];
            for (int i = 0; i < D; ++i) acc += p.w1(j, i) * xin[static_cast<std::size_t>(i)];
            if (use_adapter) {
                double delta = 0.0;
                for (int r = 0; r < R; ++r) delta += adapter->b1(j, r) * a1[static_cast<std::size_t>(r)];
                acc += sc * delta;
            }
            h[static_cast<std::size_t>(j)] = std::tanh(acc);
        }
        for (int r = 0; r < R; ++r) {
            double acc = 0.0;
            for (int j = 0; j < H; ++j) acc += adapter->a2(r, j) * h[static_cast<std::size_t>(j)];
            a2[static_cast<std::size_t>(r)] = acc;
        }
        for (int c = 0; c < C; ++c) {
            double acc = p.b2[static_cast<std::size_t>(c)];
            for (int j = 0; j < H; ++j) acc += p.w2(c, j) * h[static_cast<std::size_t>(j)];
            if (use_adapter) {
                double delta = 0.0;
                for (int r = 0; r < R; ++r) delta += adapter->b2(c, r) * a2[static_cast<std::size_t>(r)];
                acc += sc * delta;
            }
            y[static_cast<std::size_t>(c)] = acc;
            if (out) out->at(c, px) = acc;
        }
        if (!target) continue;

        for (int c = 0; c < C; ++c) {
            const double d = y[static_cast<std::size_t>(c)] - target->at(c, px);
            loss += d * d;
            gy[static_cast<std::size_t>(c)] = 2.0 * d * inv_n;
        }
        if (!grads.base && !grads.adapter) continue;

        // Output layer.
        std::fill(gh.begin(), gh.end(), 0.0);
        for (int c = 0; c < C; ++c) {
            const double g = gy[static_cast<std::size_t>(c)];
            for (int j = 0; j < H; ++j) gh[static_cast<std::size_t>(j)] += p.w2(c, j) * g;
            if (grads.base) {
                grads.base->b2[static_cast<std::size_t>(c)] += g;
                for (int j = 0; j < H; ++j) grads.base->w2(c, j) += g * h[static_cast<std::size_t>(j)];
            }
        }
        if (use_adapter) {
            for (int r = 0; r < R; ++r) {
                double acc = 0.0;
                for (int c = 0; c < C; ++c) acc += adapter->b2(c, r) * gy[static_cast<std::size_t>(c)];
                ub2[static_cast<std::size_t>(r)] = acc;
            }
            for (int j = 0; j < H; ++j) {
                double acc = 0.0;
                for (int r = 0; r < R; ++r) acc += adapter->a2(r, j) * ub2[static_cast<std::size_t>(r)];
                gh[static_cast<std::size_t>(j)] += sc * acc;
            }
            if (grads.adapter) {
                for (int c = 0; c < C; ++c) {
                    for (int r = 0; r < R; ++r) grads.adapter->b2(c, r) += sc * gy[static_cast<std::size_t>(c)] * a2[static_cast<std::size_t>(r)];
                }
                for (int r = 0; r < R; ++r) {
                    for (int j = 0; j < H; ++j) grads.adapter->a2(r, j) += sc * ub2[static_cast<std::size_t>(r)] * h[static_cast<std::size_t>(j)];
                }
            }
        }

        // Hidden layer.
        for (int j = 0; j < H; ++j) {
            const double hj = h[static_cast<std::size_t>(j)];
            gpre[static_cast<std::size_t>(j)] = gh[static_cast<std::size_t>(j)] * (1.0 - hj * hj);
        }
        const int cond_begin = 2 * C + 2 * cfg.time_frequencies;
        const bool want_input_grad = grads.base != nullptr && cfg.cond_dim > 0;
        if (want_input_grad) std::fill(gx.begin(), gx.end(), 0.0);
        for (int j = 0; j < H; ++j) {
            const double g = gpre[static_cast<std::size_t>(j)];
            if (grads.base) {
                grads.base->b1[static_cast<std::size_t>(j)] += g;
                for (int i = 0; i < D; ++i) grads.base->w1(j, i) += g * xin[static_cast<std::size_t>(i)];
                for (int i = cond_begin; i < D; ++i) gx[static_cast<std::size_t>(i)] += p.w1(j, i) * g;
            }
        }
        if (use_adapter) {
            for (int r = 0; r < R; ++r) {
                double acc = 0.0;
                for (int j = 0; j < H; ++j) acc += adapter->b1(j, r) * gpre[static_cast<std::size_t>(j)];
                ub1[static_cast<std::size_t>(r)] = acc;
            }
            if (grads.adapter) {
                for (int j = 0; j < H; ++j) {
                    for (int r = 0; r < R; ++r) grads.adapter->b1(j, r) += sc * gpre[static_cast<std::size_t>(j)] * a1[static_cast<std::size_t>(r)];
                }
                for (int r = 0; r < R; ++r) {
                    for (int i = 0; i < D; ++i) grads.adapter->a1(r, i) += sc * ub1[static_cast<std::size_t>(r)] * xin[static_cast<std::size_t>(i)];
                }
            }
            if (want_input_grad) {
                for (int i = cond_begin; i < D; ++i) {
                    double acc = 0.0;
                    for (int r = 0; r < R; ++r) acc += adapter->a1(r, i) * ub1[static_cast<std::size_t>(r)];
                    gx[static_cast<std::size_t>(i)] += sc * acc;
                }
            }
        }
        if (want_input_grad) {
            for (int k = 0; k < cfg.cond_dim; ++k) grads.base->cond_table(s.cond, k) += gx[static_cast<std::size_t>(cond_begin + k)];
        }
    }
    return loss * inv_n;
}

} // namespace detail

/// F(X, cond, t). The adapter contributes only when given and active.
inline Latent forward(const ModelParams& p, const AdapterParams* adapter, const TrainingSample& s) {
    Latent out;
    detail::run(p, adapter, s, nullptr, {}, &out);
    return out;
}

struct LossAndGrads {
    double loss = 0.0;
    ModelParams base_grad;
    std::optional<AdapterParams> adapter_grad;
};

/// Mean squared error between F and the mode's target (eps, or eps - E(V_tar)
/// for velocity) with exact gradients for every base tensor and, when an
/// active adapter is given, for its factors.
inline LossAndGrads loss_and_grads(const ModelParams& p, const AdapterParams* adapter, const TrainingSample& s,
                                   const Latent& clean_target, TargetMode mode) {
    LossAndGrads r;
    r.base_grad = ModelParams::zeros(p.config);
    if (adapter && adapter->active) {
        r.adapter_grad = AdapterParams::zeros(p.config, adapter->rank, adapter->alpha);
        r.adapter_grad->active = adapter->active;
    }
    const Latent target = regression_target(s, clean_target, mode);
    r.loss = detail::run(p, adapter, s, &target, {&r.base_grad, r.adapter_grad ? &*r.adapter_grad : nullptr}, nullptr);
    return r;
}

inline double loss_only(const ModelParams& p, const AdapterParams* adapter, const TrainingSample& s,
                        const Latent& clean_target, TargetMode mode) {
    const Latent target = regression_target(s, clean_target, mode);
    return detail::run(p, adapter, s, &target, {}, nullptr);
}

// ---------------------------------------------------------------------------
// Training

enum class Arm { only_3d, only_real, mixed_no_adapter, mixed_with_adapter };

inline constexpr Arm kAllArms[] = {Arm::only_3d, Arm::only_real, Arm::mixed_no_adapter, Arm::mixed_with_adapter};

inline const char* arm_name(Arm a) {
    switch (a) {
    case Arm::only_3d: return "only_3d";
    case Arm::only_real: return "only_real";
    case Arm::mixed_no_adapter: return "mixed_no_adapter";
    case Arm::mixed_with_adapter: return "mixed_with_adapter";
    }
    return "unknown";
}

inline Arm parse_arm(const std::string& s) {
    for (Arm a : kAllArms) {
        if (s == arm_name(a)) return a;
    }
    fail(Errc::config, "unknown arm '" + s + "'");
}

struct TrainLogRow {
    int step = 0;
    double loss = 0.0;
    Domain domain = Domain::synthetic;
    bool adapter_active = false;
};

struct TrainStats {
    std::vector<TrainLogRow> log;
    std::size_t adapter_evaluations = 0;
};

inline std::string log_csv(const TrainStats& stats) {
    std::string out = "step,loss,domain,adapter_active\n";
    char buf[64];
    for (const auto& r : stats.log) {
        std::snprintf(buf, sizeof buf, "%.9g", r.loss);
        out += std::to_string(r.step) + "," + buf + "," + dataset::domain_name(r.domain) + "," +
               (r.adapter_active ? "true" : "false") + "\n";
    }
    return out;
}

/// Mean of the first and last `window` logged losses.
inline std::pair<double, double> smoothed_loss_ends(const TrainStats& stats, std::size_t window) {
    const auto& log = stats.log;
    require(!log.empty(), Errc::config, "empty training log");
    window = std::min(window, log.size());
    double head = 0.0, tail = 0.0;
    for (std::size_t i = 0; i < window; ++i) {
        head += log[i].loss;
        tail += log[log.size() - 1 - i].loss;
    }
    return {head / window, tail / window};
}

struct Stage1Config {
    int steps = 500;
    double lr = 1e-2;
    std::uint64_t seed = 0;
    TargetMode mode = TargetMode::epsilon;
};

struct Stage2Config {
    int steps = 1000;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    TargetMode mode = TargetMode::epsilon;
    Arm arm = Arm::mixed_with_adapter;
    dataset::DomainRatio ratio{1, 1};
};

namespace detail {

inline void sgd(std::vector<double>& params, const std::vector<double>& grads, double lr) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

template <typename Params>
void sgd_all(Params& params, const Params& grads, double lr) {
    std::vector<std::vector<double>*> dst;
    std::vector<const std::vector<double>*> src;
    Params::visit(params, [&](const char*, std::vector<double>& v) { dst.push_back(&v); });
    Params::visit(grads, [&](const char*, const std::vector<double>& v) { src.push_back(&v); });
    for (std::size_t i = 0; i < dst.size(); ++i) sgd(*dst[i], *src[i], lr);
}

inline TrainingSample draw_sample(const EncodedPair& pair, Rng& rng, bool zero_source, int cond_offset) {
    const double t = rng.uniform();
    const Latent eps = normal_latent(rng, pair.target.channels, pair.target.frames, pair.target.height, pair.target.width);
    TrainingSample s = make_sample(pair, t, eps);
    if (zero_source) {
        const std::size_t n = pair.target.data.size();
        std::fill(s.x.data.begin() + static_cast<std::ptrdiff_t>(n), s.x.data.end(), 0.0);
    }
    s.cond += cond_offset;
    return s;
}

inline void require_codes(const ModelParams& p, const std::vector<EncodedPair>& pairs) {
    for (const auto& e : pairs) {
        require(e.cond >= 0 && e.cond < p.config.condition_codes, Errc::config,
                "condition code " + std::to_string(e.cond) + " exceeds the model's code count");
    }
}

} // namespace detail

struct PriorConfig {
    int steps = 2000;
    double lr = 1e-2;
    std::uint64_t seed = 0;
    TargetMode mode = TargetMode::epsilon;
};

/// Stand-in for a pretrained video generator: fits the base as an
/// unconditional denoiser (source block zeroed) on realistic-domain targets
/// only, so it has never seen a synthetic render.
inline ModelParams pretrain_prior(ModelParams base, const std::vector<EncodedPair>& pairs, const PriorConfig& cfg,
                                  TrainStats* stats = nullptr) {
    require(cfg.steps >= 0 && cfg.lr > 0.0, Errc::config, "prior pretraining needs steps >= 0 and lr > 0");
    std::vector<const EncodedPair*> realistic;
    for (const auto& p : pairs) {
        if (p.domain == Domain::realistic) realistic.push_back(&p);
    }
    require(!realistic.empty() || cfg.steps == 0, Errc::empty_domain, "prior pretraining needs realistic pairs");
    detail::require_codes(base, pairs);
    Rng rng(cfg.seed);
    for (int step = 0; step < cfg.steps; ++step) {
        const EncodedPair& pair = *realistic[rng.below(realistic.size())];
        const TrainingSample s = detail::draw_sample(pair, rng, true, 0);
        const LossAndGrads g = loss_and_grads(base, nullptr, s, pair.target, cfg.mode);
        detail::sgd_all(base, g.base_grad, cfg.lr);
        if (stats) stats->log.push_back({step, g.loss, Domain::realistic, false});
    }
    return base;
}

/// Adapter-only training on synthetic pairs: the base is frozen, source
/// blocks are zeroed and condition codes are shifted into the reserved
/// synthetic-style range.
inline AdapterParams train_stage1(const ModelParams& base, AdapterParams adapter, const std::vector<EncodedPair>& pairs,
                                  const Stage1Config& cfg, TrainStats* stats = nullptr) {
    require(cfg.steps >= 0 && cfg.lr > 0.0, Errc::config, "stage 1 needs steps >= 0 and lr > 0");
    std::vector<const EncodedPair*> synthetic;
    for (const auto& p : pairs) {
        if (p.domain == Domain::synthetic) synthetic.push_back(&p);
    }
    require(!synthetic.empty() || cfg.steps == 0, Errc::empty_domain, "stage 1 needs synthetic pairs");
    detail::require_codes(base, pairs);
    require_compatible(base, adapter);
    adapter.active = true;
    Rng rng(cfg.seed);
    for (int step = 0; step < cfg.steps; ++step) {
        const EncodedPair& pair = *synthetic[rng.below(synthetic.size())];
        const TrainingSample s = detail::draw_sample(pair, rng, true, base.config.style_offset());
        const LossAndGrads g = loss_and_grads(base, &adapter, s, pair.target, cfg.mode);
        detail::sgd_all(adapter, *g.adapter_grad, cfg.lr);
        if (stats) {
            stats->log.push_back({step, g.loss, Domain::synthetic, true});
            ++stats->adapter_evaluations;
        }
    }
    return adapter;
}

/// Full fine-tuning of the base with the adapter frozen. In the
/// mixed_with_adapter arm the adapter is applied only to synthetic samples;
/// other arms never evaluate it. Domain draws follow the arm's ratio.
inline ModelParams train_stage2(ModelParams base, const AdapterParams* adapter, const std::vector<EncodedPair>& pairs,
                                const Stage2Config& cfg, TrainStats* stats = nullptr) {
    require(cfg.steps >= 0 && cfg.lr > 0.0, Errc::config, "stage 2 needs steps >= 0 and lr > 0");
    detail::require_codes(base, pairs);
    dataset::DomainRatio ratio = cfg.ratio;
    if (cfg.arm == Arm::only_3d) ratio = {1, 0};
    if (cfg.arm == Arm::only_real) ratio = {0, 1};
    const bool with_adapter = cfg.arm == Arm::mixed_with_adapter;
    AdapterParams frozen;
    if (with_adapter) {
        require(adapter != nullptr, Errc::config, "mixed_with_adapter needs a trained adapter");
        require_compatible(base, *adapter);
        frozen = *adapter;
        frozen.active = true;
    }
    std::vector<Domain> domains;
    for (const auto& p : pairs) domains.push_back(p.domain);
    dataset::MixedIndexSampler sampler(domains, cfg.seed, ratio);
    Rng rng(mix_seed(cfg.seed, 1));
    for (int step = 0; step < cfg.steps; ++step) {
        const EncodedPair& pair = pairs[sampler.next()];
        const TrainingSample s = detail::draw_sample(pair, rng, false, 0);
        const bool use = with_adapter && pair.domain == Domain::synthetic;
        const LossAndGrads g = loss_and_grads(base, use ? &frozen : nullptr, s, pair.target, cfg.mode);
        detail::sgd_all(base, g.base_grad, cfg.lr);
        if (stats) {
            stats->log.push_back({step, g.loss, pair.domain, use});
            stats->adapter_evaluations += use ? 1 : 0;
        }
    }
    return base;
}

// ---------------------------------------------------------------------------
// Inference

inline constexpr double kEpsilonDivisorFloor = 1e-3;

/// Uniform Euler integration from t = 1 to t = 0. predict(x_t, t) returns
/// the model output at (x_t, t). Epsilon mode reconstructs
/// x0 = (x_t - t' eps) / (1 - t') with t' = min(t, 1 - 1e-3) and moves along
/// the straight path, x_next = (1 - t_next) x0 + t_next eps; velocity mode
/// steps x <- x - dt v.
template <typename Predict>
Latent integrate(Latent x, int steps, TargetMode mode, Predict&& predict) {
    require(steps >= 1, Errc::step_count, "sampling needs at least one step");
    for (int i = 0; i < steps; ++i) {
        const double t = 1.0 - static_cast<double>(i) / steps;
        const double t_next = 1.0 - static_cast<double>(i + 1) / steps;
        const Latent pred = predict(static_cast<const Latent&>(x), t);
        require(pred.same_shape(x), Errc::shape_mismatch, "predictor output shape differs from the state");
        if (mode == TargetMode::velocity) {
            const double dt = t - t_next;
            for (std::size_t k = 0; k < x.data.size(); ++k) x.data[k] -= dt * pred.data[k];
            continue;
        }
        const double te = std::min(t, 1.0 - kEpsilonDivisorFloor);
        for (std::size_t k = 0; k < x.data.size(); ++k) {
            const double x0 = (x.data[k] - te * pred.data[k]) / (1.0 - te);
            x.data[k] = (1.0 - t_next) * x0 + t_next * pred.data[k];
        }
    }
    return x;
}

struct InferConfig {
    int steps = 8;
    TargetMode mode = TargetMode::epsilon;
    std::uint64_t seed = 0;
    /// Paste the masked source foreground over the generated frames.
    bool composite = false;
};

/// Generates a relit sequence from the masked source. The adapter is never
/// applied at inference.
inline FrameSequence sample_infer(const ModelParams& params, const FrameSequence& src, const std::vector<MaskImage>& mask,
                                  int cond, const InferConfig& cfg, const ToyLatentCodec& codec = ToyLatentCodec{}) {
    require(cfg.steps >= 1, Errc::step_count, "inference needs at least one step");
    require(cond >= 0 && cond < params.config.table_rows(), Errc::config, "condition code outside the embedding table");
    const Latent source = codec.encode_masked(src, mask);
    Rng rng(cfg.seed);
    const Latent init = normal_latent(rng, source.channels, source.frames, source.height, source.width);
    const Latent z0 = integrate(init, cfg.steps, cfg.mode, [&](const Latent& xt, double t) {
        TrainingSample s = make_sample(xt, source, 0.0, xt, cond, Domain::realistic);
        s.t = t;
        return forward(params, nullptr, s);
    });
    FrameSequence out = codec.decode(z0, src.fps);
    out.masks = mask;
    if (cfg.composite) {
        for (std::size_t f = 0; f < out.length(); ++f) {
            for (std::size_t i = 0; i < out.frames[f].size(); ++i) {
                if (mask[f][i] != 0) out.frames[f][i] = src.frames[f][i];
            }
        }
    }
    return out;
}

} // namespace relight_forge::trainer
