// Copyright 2026 The relight-forge Authors
// SPDX-License-Identifier: Apache-2.0

// relight-forge: command-line front end over the relight_forge library.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "relight_forge/ablation.hpp"
#include "relight_forge/checkpoint.hpp"
#include "relight_forge/cli.hpp"
#include "relight_forge/dataset.hpp"
#include "relight_forge/io.hpp"
#include "relight_forge/metrics.hpp"
#include "relight_forge/relight.hpp"
#include "relight_forge/trainer.hpp"

namespace rf = relight_forge;
namespace fs = std::filesystem;
using rf::io::Json;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    std::string out;
};

/// Every option of the subcommand (and the global seed) as resolved after
/// flags, config file and defaults. The output path is left out so runs into
/// different directories produce identical files.
Json resolved_config(const CLI::App& root, const CLI::App& sub, const Globals& g) {
    Json options = Json::object();
    for (const CLI::Option* o : sub.get_options()) {
        const std::string name = o->get_single_name();
        if (name == "help" || name.empty()) continue;
        if (o->count() > 0) {
            const auto r = o->reduced_results();
            options[name] = r.size() == 1 ? Json(r.front()) : Json(r);
        } else {
            options[name] = o->get_default_str();
        }
    }
    (void)root;
    return Json{{"subcommand", sub.get_name()}, {"seed", g.seed}, {"options", options}};
}

rf::trainer::TargetMode mode_of(const std::string& s) { return rf::trainer::parse_target_mode(s); }

rf::dataset::DomainRatio parse_ratio(const std::string& s) {
    const auto colon = s.find(':');
    rf::require(colon != std::string::npos, rf::Errc::config, "ratio must look like S:R, got '" + s + "'");
    try {
        const long a = std::stol(s.substr(0, colon));
        const long b = std::stol(s.substr(colon + 1));
        rf::require(a >= 0 && b >= 0, rf::Errc::config, "ratio terms must be non-negative");
        return {static_cast<unsigned>(a), static_cast<unsigned>(b)};
    } catch (const std::logic_error&) {
        rf::fail(rf::Errc::config, "ratio must look like S:R, got '" + s + "'");
    }
}

struct ModelFlags {
    rf::trainer::ModelConfig model;
    int codec_factor = 2;

    void bind(CLI::App* app) {
        app->add_option("--hidden", model.hidden, "Hidden units per latent pixel");
        app->add_option("--time-frequencies", model.time_frequencies, "Sin/cos time embedding frequencies");
        app->add_option("--cond-dim", model.cond_dim, "Condition embedding width");
        app->add_option("--condition-codes", model.condition_codes, "Plain condition codes");
        app->add_option("--codec-factor", codec_factor, "Toy codec downsample factor");
    }
};

std::vector<rf::trainer::EncodedPair> encode_dataset(const std::string& manifest, int codec_factor) {
    const fs::path path(manifest);
    const auto m = rf::dataset::read_manifest(path);
    rf::dataset::validate(m, path.parent_path(), true);
    return rf::ablation::encode_manifest(m, path.parent_path(), rf::trainer::ToyLatentCodec(codec_factor));
}

rf::trainer::ModelParams base_or_init(const std::string& stem, const rf::trainer::ModelConfig& cfg, std::uint64_t seed) {
    if (!stem.empty()) return rf::checkpoint::load_model(stem);
    return rf::trainer::ModelParams::init(cfg, rf::mix_seed(seed, 1));
}

void write_log(const fs::path& path, const rf::trainer::TrainStats& stats) {
    rf::io::write_file(path, rf::trainer::log_csv(stats));
}

/// Runs body inside a locked, staged output directory and echoes the
/// resolved configuration to run.json on success.
int run_subcommand(const CLI::App& root, const CLI::App& sub, const Globals& g,
                   const std::function<void(const fs::path&)>& body) {
    rf::cli::OutputDir out(g.out);
    body(out.staging());
    rf::io::write_json(out.staging() / "run.json", resolved_config(root, sub, g));
    out.commit();
    std::cout << sub.get_name() << ": wrote " << g.out << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"relight-forge: environment maps, relighting, datasets, training and benchmarks"};
    app.require_subcommand(1);
    app.fallthrough();
    app.option_defaults()->always_capture_default();
    app.set_config("--config", "", "TOML-style config file; flags override its values");
    Globals g;
    app.add_option("--seed", g.seed, "Seed for every random stream")->capture_default_str();
    app.add_option("--out", g.out, "Output directory");

    // envmap ----------------------------------------------------------------
    auto* envmap = app.add_subcommand("envmap", "Synthesize a random environment map");
    int map_w = rf::kDefaultMapWidth, map_h = rf::kDefaultMapHeight;
    rf::CountRange count;
    rf::IntensityRange intensity;
    envmap->add_option("--width", map_w, "Map width in texels");
    envmap->add_option("--height", map_h, "Map height in texels");
    envmap->add_option("--min-lights", count.min, "Fewest lights");
    envmap->add_option("--max-lights", count.max, "Most lights");
    envmap->add_option("--min-intensity", intensity.min, "Lowest per-channel intensity");
    envmap->add_option("--max-intensity", intensity.max, "Highest per-channel intensity");

    // scene-gen -------------------------------------------------------------
    auto* scene_gen = app.add_subcommand("scene-gen", "Render a random sphere scene (albedo, normals, mask)");
    rf::SceneOptions scene_opt;
    std::string scene_env;
    scene_gen->add_option("--width", scene_opt.width, "Frame width");
    scene_gen->add_option("--height", scene_opt.height, "Frame height");
    scene_gen->add_option("--frames", scene_opt.frames, "Frame count");
    scene_gen->add_option("--envmap", scene_env, "Optional envmap.rlf; also writes the relit sequence");

    // degrade ---------------------------------------------------------------
    auto* degrade = app.add_subcommand("degrade", "Relight a sequence under a random map (realistic pipeline)");
    std::string degrade_input, degrade_restored;
    rf::dataset::DegradeOptions degrade_opt;
    degrade->add_option("--input", degrade_input, "Sequence directory with normals and masks")->required();
    degrade->add_option("--uniform-lit", degrade_restored, "Precomputed uniform-lit sequence (default: identity)");
    degrade->add_option("--map-width", degrade_opt.map_width, "Map width");
    degrade->add_option("--map-height", degrade_opt.map_height, "Map height");
    degrade->add_option("--min-lights", degrade_opt.light_count.min, "Fewest lights");
    degrade->add_option("--max-lights", degrade_opt.light_count.max, "Most lights");
    degrade->add_option("--min-intensity", degrade_opt.intensity.min, "Lowest per-channel intensity");
    degrade->add_option("--max-intensity", degrade_opt.intensity.max, "Highest per-channel intensity");

    // dataset-build ---------------------------------------------------------
    auto* dataset_build = app.add_subcommand("dataset-build", "Generate the desk-scale corpus and its manifest");
    rf::dataset::CorpusOptions corpus;
    dataset_build->add_option("--synthetic-groups", corpus.synthetic_groups, "Synthetic groups");
    dataset_build->add_option("--env-presets", corpus.env_presets, "Environment presets (members per group)");
    dataset_build->add_option("--realistic-pairs", corpus.realistic_pairs, "Realistic degraded/original pairs");
    dataset_build->add_option("--width", corpus.width, "Frame width");
    dataset_build->add_option("--height", corpus.height, "Frame height");
    dataset_build->add_option("--frames", corpus.frames, "Frames per sequence");
    dataset_build->add_option("--map-width", corpus.map_width, "Map width");
    dataset_build->add_option("--map-height", corpus.map_height, "Map height");
    dataset_build->add_option("--min-intensity", corpus.intensity.min, "Lowest per-channel intensity");
    dataset_build->add_option("--max-intensity", corpus.intensity.max, "Highest per-channel intensity");

    // dataset-validate ------------------------------------------------------
    auto* dataset_validate = app.add_subcommand("dataset-validate", "Check a manifest and the paths it references");
    std::string validate_manifest;
    bool skip_paths = false;
    dataset_validate->add_option("--manifest", validate_manifest, "Manifest JSON")->required();
    dataset_validate->add_flag("--skip-paths", skip_paths, "Only check structure");

    // pretrain --------------------------------------------------------------
    auto* pretrain = app.add_subcommand("pretrain", "Fit the base as an unconditional denoiser on realistic targets");
    std::string pre_manifest, pre_mode = "velocity";
    rf::trainer::PriorConfig prior;
    ModelFlags pre_model;
    pretrain->add_option("--manifest", pre_manifest, "Manifest JSON")->required();
    pretrain->add_option("--steps", prior.steps, "SGD steps");
    pretrain->add_option("--lr", prior.lr, "Learning rate");
    pretrain->add_option("--target-mode", pre_mode, "epsilon or velocity");
    pre_model.bind(pretrain);

    // train-stage1 ----------------------------------------------------------
    auto* stage1 = app.add_subcommand("train-stage1", "Train the low-rank adapter on synthetic pairs");
    std::string s1_manifest, s1_base, s1_mode = "epsilon";
    rf::trainer::Stage1Config s1;
    int rank = 16;
    double alpha = 16.0;
    ModelFlags s1_model;
    stage1->add_option("--manifest", s1_manifest, "Manifest JSON")->required();
    stage1->add_option("--base", s1_base, "Base checkpoint stem (default: seeded init)");
    stage1->add_option("--steps", s1.steps, "SGD steps");
    stage1->add_option("--lr", s1.lr, "Learning rate");
    stage1->add_option("--rank", rank, "Adapter rank");
    stage1->add_option("--alpha", alpha, "Adapter alpha");
    stage1->add_option("--target-mode", s1_mode, "epsilon or velocity");
    s1_model.bind(stage1);

    // train-stage2 ----------------------------------------------------------
    auto* stage2 = app.add_subcommand("train-stage2", "Fine-tune the base with the frozen adapter");
    std::string s2_manifest, s2_base, s2_adapter, s2_mode = "epsilon", s2_arm = "mixed_with_adapter", s2_ratio = "1:1";
    rf::trainer::Stage2Config s2;
    ModelFlags s2_model;
    stage2->add_option("--manifest", s2_manifest, "Manifest JSON")->required();
    stage2->add_option("--base", s2_base, "Base checkpoint stem (default: seeded init)");
    stage2->add_option("--adapter", s2_adapter, "Adapter checkpoint stem (mixed_with_adapter)");
    stage2->add_option("--arm", s2_arm, "only_3d, only_real, mixed_no_adapter or mixed_with_adapter");
    stage2->add_option("--ratio", s2_ratio, "Synthetic:realistic draw ratio");
    stage2->add_option("--steps", s2.steps, "SGD steps");
    stage2->add_option("--lr", s2.lr, "Learning rate");
    stage2->add_option("--target-mode", s2_mode, "epsilon or velocity");
    s2_model.bind(stage2);

    // infer -----------------------------------------------------------------
    auto* infer = app.add_subcommand("infer", "Generate a relit sequence from a masked source");
    std::string infer_model, infer_input, infer_mask, infer_mode = "epsilon";
    int infer_cond = 0, infer_factor = 2;
    rf::trainer::InferConfig ic;
    infer->add_option("--model", infer_model, "Model checkpoint stem")->required();
    infer->add_option("--input", infer_input, "Source sequence directory")->required();
    infer->add_option("--mask", infer_mask, "Mask sequence directory (default: the input's masks)");
    infer->add_option("--cond", infer_cond, "Condition code of the target lighting");
    infer->add_option("--steps", ic.steps, "Integration steps");
    infer->add_option("--target-mode", infer_mode, "epsilon or velocity");
    infer->add_option("--codec-factor", infer_factor, "Toy codec downsample factor");
    infer->add_flag("--composite", ic.composite, "Paste the source foreground over the output");

    // bench -----------------------------------------------------------------
    auto* bench = app.add_subcommand("bench", "Score predictions against a benchmark manifest");
    std::string bench_manifest, bench_predictions;
    bench->add_option("--manifest", bench_manifest, "Benchmark manifest JSON")->required();
    bench->add_option("--predictions", bench_predictions, "Directory of <pair_id>/ prediction sequences")->required();

    // ablation --------------------------------------------------------------
    auto* ablation = app.add_subcommand("ablation", "Train and score the four curriculum arms");
    std::string abl_manifest, abl_mode = "velocity", abl_ratio = "1:1";
    rf::ablation::AblationConfig acfg;
    ablation->add_option("--manifest", abl_manifest, "Manifest JSON")->required();
    ablation->add_option("--holdout-groups", acfg.holdout_groups, "Synthetic groups held out for scoring");
    ablation->add_option("--prior-steps", acfg.prior_steps, "Prior pretraining steps");
    ablation->add_option("--prior-lr", acfg.prior_lr, "Prior pretraining learning rate");
    ablation->add_option("--stage1-steps", acfg.stage1_steps, "Adapter steps");
    ablation->add_option("--stage1-lr", acfg.stage1_lr, "Adapter learning rate");
    ablation->add_option("--stage2-steps", acfg.stage2_steps, "Steps per arm");
    ablation->add_option("--stage2-lr", acfg.stage2_lr, "Learning rate per arm");
    ablation->add_option("--target-mode", abl_mode, "epsilon or velocity");
    ablation->add_option("--infer-steps", acfg.infer_steps, "Integration steps at evaluation");
    ablation->add_option("--rank", acfg.adapter_rank, "Adapter rank");
    ablation->add_option("--alpha", acfg.adapter_alpha, "Adapter alpha");
    ablation->add_option("--ratio", abl_ratio, "Synthetic:realistic draw ratio for mixed arms");
    ablation->add_option("--hidden", acfg.model.hidden, "Hidden units per latent pixel");
    ablation->add_option("--codec-factor", acfg.codec_factor, "Toy codec downsample factor");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*envmap) {
            return run_subcommand(app, *envmap, g, [&](const fs::path& dir) {
                const rf::LightSet lights = rf::sample_light_set(g.seed, count, intensity);
                const rf::EnvironmentMap map = rf::synthesize_map(lights, map_w, map_h);
                rf::io::write_ppm(dir / "envmap.ppm", map.texels(), 1.0);
                rf::io::write_tensor(dir / "envmap.rlf", rf::io::envmap_tensor(map));
                rf::io::write_json(dir / "lights.json", rf::io::light_set_json(lights));
            });
        }
        if (*scene_gen) {
            return run_subcommand(app, *scene_gen, g, [&](const fs::path& dir) {
                const rf::SyntheticScene scene = rf::random_scene(g.seed, scene_opt);
                const rf::FrameSequence albedo = rf::render_scene(scene);
                rf::io::write_sequence(dir / "albedo", albedo);
                Json centers = Json::array();
                for (const auto& c : scene.centers) centers.push_back({c[0], c[1]});
                rf::io::write_json(dir / "scene.json", Json{{"width", scene.width},
                                                            {"height", scene.height},
                                                            {"radius", scene.radius},
                                                            {"centers", centers},
                                                            {"color_a", scene.albedo.color_a},
                                                            {"color_b", scene.albedo.color_b},
                                                            {"cell", scene.albedo.cell}});
                if (!scene_env.empty()) {
                    const auto env = rf::io::envmap_from_tensor(rf::io::read_tensor(scene_env));
                    rf::io::write_sequence(dir / "relit", rf::relight_sequence(albedo, env));
                }
            });
        }
        if (*degrade) {
            return run_subcommand(app, *degrade, g, [&](const fs::path& dir) {
                const rf::dataset::RealisticInput input{
                    rf::io::read_sequence(degrade_input),
                    degrade_restored.empty() ? rf::UniformLitTransform::identity()
                                             : rf::UniformLitTransform::external(degrade_restored),
                    g.seed};
                const auto pair = rf::dataset::degrade(input, degrade_opt);
                rf::io::write_sequence(dir / "degraded", pair.degraded);
                rf::io::write_sequence(dir / "original", pair.original);
                rf::io::write_json(dir / "lights.json", rf::io::light_set_json(pair.lights));
            });
        }
        if (*dataset_build) {
            corpus.seed = g.seed;
            return run_subcommand(app, *dataset_build, g, [&](const fs::path& dir) {
                const auto m = rf::dataset::build_corpus(dir, corpus);
                rf::io::write_json(dir / "bench.json", rf::cli::to_json(rf::cli::bench_from_dataset(m)));
            });
        }
        if (*dataset_validate) {
            return run_subcommand(app, *dataset_validate, g, [&](const fs::path& dir) {
                const fs::path path(validate_manifest);
                const auto m = rf::dataset::read_manifest(path);
                rf::dataset::validate(m, path.parent_path(), !skip_paths);
                const auto pairs = rf::dataset::enumerate_pairs(m);
                std::size_t synthetic = 0;
                for (const auto& p : pairs) synthetic += p.domain == rf::dataset::Domain::synthetic;
                const Json report{{"valid", true},
                                  {"groups", m.groups.size()},
                                  {"pairs", pairs.size()},
                                  {"synthetic_pairs", synthetic},
                                  {"realistic_pairs", pairs.size() - synthetic}};
                rf::io::write_json(dir / "validation.json", report);
                std::cout << "manifest valid: " << m.groups.size() << " groups, " << pairs.size() << " pairs\n";
            });
        }
        if (*pretrain) {
            return run_subcommand(app, *pretrain, g, [&](const fs::path& dir) {
                prior.seed = rf::mix_seed(g.seed, 5);
                prior.mode = mode_of(pre_mode);
                const auto pairs = encode_dataset(pre_manifest, pre_model.codec_factor);
                rf::trainer::TrainStats stats;
                const auto p = rf::trainer::pretrain_prior(rf::trainer::ModelParams::init(pre_model.model, rf::mix_seed(g.seed, 1)),
                                                           pairs, prior, &stats);
                rf::checkpoint::save_model(dir / "prior", p, {{"stage", "prior"}, {"steps", prior.steps}});
                write_log(dir / "log.csv", stats);
            });
        }
        if (*stage1) {
            return run_subcommand(app, *stage1, g, [&](const fs::path& dir) {
                s1.seed = rf::mix_seed(g.seed, 3);
                s1.mode = mode_of(s1_mode);
                const auto pairs = encode_dataset(s1_manifest, s1_model.codec_factor);
                const auto base = base_or_init(s1_base, s1_model.model, g.seed);
                rf::trainer::TrainStats stats;
                const auto adapter = rf::trainer::train_stage1(
                    base, rf::trainer::AdapterParams::init(base.config, rank, alpha, rf::mix_seed(g.seed, 2)), pairs, s1, &stats);
                rf::checkpoint::save_adapter(dir / "adapter", adapter, base.config, {{"stage", 1}, {"steps", s1.steps}});
                rf::checkpoint::save_model(dir / "base", base, {{"stage", 0}});
                write_log(dir / "log.csv", stats);
            });
        }
        if (*stage2) {
            return run_subcommand(app, *stage2, g, [&](const fs::path& dir) {
                s2.seed = rf::mix_seed(g.seed, 4);
                s2.mode = mode_of(s2_mode);
                s2.arm = rf::trainer::parse_arm(s2_arm);
                s2.ratio = parse_ratio(s2_ratio);
                const auto pairs = encode_dataset(s2_manifest, s2_model.codec_factor);
                const auto base = base_or_init(s2_base, s2_model.model, g.seed);
                std::optional<rf::trainer::AdapterParams> adapter;
                if (!s2_adapter.empty()) adapter = rf::checkpoint::load_adapter(s2_adapter);
                rf::trainer::TrainStats stats;
                const auto trained = rf::trainer::train_stage2(base, adapter ? &*adapter : nullptr, pairs, s2, &stats);
                rf::checkpoint::save_model(dir / "model", trained,
                                           {{"stage", 2}, {"steps", s2.steps}, {"arm", rf::trainer::arm_name(s2.arm)}});
                write_log(dir / "log.csv", stats);
            });
        }
        if (*infer) {
            return run_subcommand(app, *infer, g, [&](const fs::path& dir) {
                ic.seed = g.seed;
                ic.mode = mode_of(infer_mode);
                const auto params = rf::checkpoint::load_model(infer_model);
                const auto src = rf::io::read_sequence(infer_input);
                std::vector<rf::MaskImage> mask;
                if (!infer_mask.empty()) {
                    mask = rf::io::read_masks(infer_mask);
                } else {
                    rf::require(src.has_masks(), rf::Errc::missing_track, "input has no masks; pass --mask");
                    mask = *src.masks;
                }
                rf::io::write_sequence(dir, rf::trainer::sample_infer(params, src, mask, infer_cond, ic,
                                                                      rf::trainer::ToyLatentCodec(infer_factor)));
            });
        }
        if (*bench) {
            return run_subcommand(app, *bench, g, [&](const fs::path& dir) {
                const fs::path path(bench_manifest);
                const auto m = rf::cli::read_bench_manifest(path);
                const auto rows = rf::cli::run_bench(m, path.parent_path(), bench_predictions);
                std::map<std::string, std::vector<rf::metrics::BenchRow>> by_subset;
                for (const auto& r : rows) by_subset[r.subset].push_back(r);
                for (const auto& [subset, members] : by_subset) {
                    rf::io::write_file(dir / (subset + ".csv"), rf::metrics::rows_csv(members));
                }
                rf::io::write_json(dir / "summary.json", rf::metrics::summary_json(rows, rf::cli::subset_metrics()));
            });
        }
        if (*ablation) {
            return run_subcommand(app, *ablation, g, [&](const fs::path& dir) {
                acfg.seed = g.seed;
                acfg.mode = mode_of(abl_mode);
                acfg.ratio = parse_ratio(abl_ratio);
                const fs::path path(abl_manifest);
                const auto m = rf::dataset::read_manifest(path);
                rf::dataset::validate(m, path.parent_path(), true);
                const auto r = rf::ablation::run(m, path.parent_path(), acfg);
                const fs::path ckpt = dir / "checkpoints";
                rf::checkpoint::save_model(ckpt / "prior", r.initial, {{"stage", "prior"}});
                rf::checkpoint::save_adapter(ckpt / "adapter", r.adapter, r.initial.config, {{"stage", 1}});
                write_log(dir / "logs" / "prior.csv", r.prior);
                write_log(dir / "logs" / "stage1.csv", r.stage1);
                for (const auto& a : r.arms) {
                    const std::string name = rf::trainer::arm_name(a.arm);
                    rf::checkpoint::save_model(ckpt / name, a.params, {{"stage", 2}, {"arm", name}});
                    write_log(dir / "logs" / (name + ".csv"), a.stats);
                }
                const std::string table = rf::ablation::table_csv(r);
                rf::io::write_file(dir / "table.csv", table);
                std::cout << table;
            });
        }
    } catch (const rf::Error& e) {
        std::cerr << "relight-forge: " << e.what() << "\n";
        return rf::cli::exit_code(e.code());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "relight-forge: io: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "relight-forge: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
