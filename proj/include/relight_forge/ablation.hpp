// Copyright 2026 The relight-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "relight_forge/dataset.hpp"
#include "relight_forge/io.hpp"
#include "relight_forge/metrics.hpp"
#include "relight_forge/trainer.hpp"

namespace relight_forge::ablation {

namespace fs = std::filesystem;
using trainer::Arm;

/// Encodes every enumerated pair of a manifest; each sequence is read and
/// encoded once.
inline std::vector<trainer::EncodedPair> encode_manifest(const dataset::DatasetManifest& m, const fs::path& root,
                                                         const trainer::ToyLatentCodec& codec) {
    std::map<std::string, trainer::Latent> targets;
    std::map<std::pair<std::string, std::string>, trainer::Latent> sources;
    std::map<std::string, std::vector<MaskImage>> masks;
    auto mask_of = [&](const std::string& path) -> const std::vector<MaskImage>& {
        auto it = masks.find(path);
        if (it == masks.end()) it = masks.emplace(path, io::read_masks(root / path)).first;
        return it->second;
    };
    std::vector<trainer::EncodedPair> out;
    for (const auto& rec : dataset::enumerate_pairs(m)) {
        auto t = targets.find(rec.tar.path);
        if (t == targets.end()) t = targets.emplace(rec.tar.path, codec.encode(io::read_sequence(root / rec.tar.path))).first;
        const auto key = std::make_pair(rec.src.path, rec.mask_path);
        auto s = sources.find(key);
        if (s == sources.end()) {
            s = sources.emplace(key, codec.encode_masked(io::read_sequence(root / rec.src.path), mask_of(rec.mask_path))).first;
        }
        require(t->second.same_shape(s->second), Errc::shape_mismatch, "pair " + rec.pair_id() + " members differ in shape");
        out.push_back({rec.pair_id(), t->second, s->second, rec.condition_code, rec.domain});
    }
    return out;
}

struct AblationConfig {
    std::uint64_t seed = 0;
    int holdout_groups = 4;
    int prior_steps = 2000;
    double prior_lr = 1e-2;
    int stage1_steps = 500;
    double stage1_lr = 1e-1;
    int stage2_steps = 2000;
    double stage2_lr = 1e-2;
    trainer::TargetMode mode = trainer::TargetMode::velocity;
    int infer_steps = 8;
    trainer::ModelConfig model{};
    int adapter_rank = 16;
    double adapter_alpha = 16.0;
    int codec_factor = 2;
    dataset::DomainRatio ratio{1, 1};
    std::vector<Arm> arms{std::begin(trainer::kAllArms), std::end(trainer::kAllArms)};
};

struct Evaluation {
    double psnr = 0.0; // mean over pairs of masked foreground PSNR
    double ssim = 0.0;
    std::size_t pairs = 0;
};

/// Masked foreground PSNR/SSIM of generated targets against ground truth.
inline Evaluation evaluate(const trainer::ModelParams& params, const std::vector<dataset::LoadedPair>& pairs,
                           const AblationConfig& cfg) {
    require(!pairs.empty(), Errc::empty_domain, "no evaluation pairs");
    const trainer::ToyLatentCodec codec(cfg.codec_factor);
    Evaluation e;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = pairs[i];
        trainer::InferConfig ic;
        ic.steps = cfg.infer_steps;
        ic.mode = cfg.mode;
        ic.seed = mix_seed(cfg.seed, 100 + i);
        const FrameSequence gen = trainer::sample_infer(params, p.src, p.mask, p.record.condition_code, ic, codec);
        e.psnr += metrics::psnr(gen, p.tar, &p.mask);
        e.ssim += metrics::ssim(gen, p.tar, &p.mask);
    }
    e.pairs = pairs.size();
    e.psnr /= static_cast<double>(pairs.size());
    e.ssim /= static_cast<double>(pairs.size());
    return e;
}

struct ArmResult {
    Arm arm = Arm::only_3d;
    trainer::ModelParams params;
    trainer::TrainStats stats;
    Evaluation eval;
};

struct AblationResult {
    trainer::ModelParams initial; // after prior pretraining
    trainer::AdapterParams adapter;
    trainer::TrainStats prior;
    trainer::TrainStats stage1;
    std::vector<ArmResult> arms;

    const ArmResult& arm(Arm a) const {
        for (const auto& r : arms) {
            if (r.arm == a) return r;
        }
        fail(Errc::config, std::string("arm not run: ") + trainer::arm_name(a));
    }
};

/// Pretrains a shared prior, then trains every configured arm from it with
/// the same seeds and scores each on the pairs of the last `holdout_groups`
/// synthetic groups, which no arm sees during training.
inline AblationResult run(const dataset::DatasetManifest& m, const fs::path& root, const AblationConfig& cfg) {
    const auto [train_m, test_m] = dataset::split_holdout(m, cfg.holdout_groups);
    const trainer::ToyLatentCodec codec(cfg.codec_factor);
    const std::vector<trainer::EncodedPair> train = encode_manifest(train_m, root, codec);
    std::vector<dataset::LoadedPair> test;
    for (const auto& rec : dataset::enumerate_pairs(test_m)) test.push_back(dataset::load_pair(rec, root));

    AblationResult r;
    r.initial = trainer::ModelParams::init(cfg.model, mix_seed(cfg.seed, 1));
    trainer::PriorConfig prior{cfg.prior_steps, cfg.prior_lr, mix_seed(cfg.seed, 5), cfg.mode};
    r.initial = trainer::pretrain_prior(std::move(r.initial), train, prior, &r.prior);
    r.adapter = trainer::AdapterParams::init(cfg.model, cfg.adapter_rank, cfg.adapter_alpha, mix_seed(cfg.seed, 2));
    const bool needs_adapter = std::find(cfg.arms.begin(), cfg.arms.end(), Arm::mixed_with_adapter) != cfg.arms.end();
    if (needs_adapter) {
        trainer::Stage1Config s1{cfg.stage1_steps, cfg.stage1_lr, mix_seed(cfg.seed, 3), cfg.mode};
        r.adapter = trainer::train_stage1(r.initial, r.adapter, train, s1, &r.stage1);
    }
    for (Arm arm : cfg.arms) {
        ArmResult a;
        a.arm = arm;
        trainer::Stage2Config s2{cfg.stage2_steps, cfg.stage2_lr, mix_seed(cfg.seed, 4), cfg.mode, arm, cfg.ratio};
        a.params = trainer::train_stage2(r.initial, &r.adapter, train, s2, &a.stats);
        a.eval = evaluate(a.params, test, cfg);
        r.arms.push_back(std::move(a));
    }
    return r;
}

/// One row per arm, in run order.
inline std::string table_csv(const AblationResult& r) {
    std::string out = "arm,psnr,ssim,lpips,clip_t,eval_pairs\n";
    for (const auto& a : r.arms) {
        out += std::string(trainer::arm_name(a.arm)) + "," + metrics::format_value(a.eval.psnr) + "," +
               metrics::format_value(a.eval.ssim) + "," + metrics::kUnavailable + "," + metrics::kUnavailable + "," +
               std::to_string(a.eval.pairs) + "\n";
    }
    return out;
}

} // namespace relight_forge::ablation
