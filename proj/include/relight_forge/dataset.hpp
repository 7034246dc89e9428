// Copyright 2026 The relight-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "relight_forge/envmap.hpp"
#include "relight_forge/error.hpp"
#include "relight_forge/frame_sequence.hpp"
#include "relight_forge/io.hpp"
#include "relight_forge/relight.hpp"
#include "relight_forge/rng.hpp"

namespace relight_forge::dataset {

namespace fs = std::filesystem;
using io::Json;

inline constexpr const char* kManifestVersion = "v1";

enum class Domain { synthetic, realistic };

inline const char* domain_name(Domain d) { return d == Domain::synthetic ? "synthetic" : "realistic"; }

inline Domain parse_domain(const std::string& s) {
    if (s == "synthetic") return Domain::synthetic;
    if (s == "realistic") return Domain::realistic;
    fail(Errc::invalid_manifest, "unknown domain '" + s + "'");
}

/// A sequence directory (relative to the manifest) and the condition code
/// naming its lighting preset.
struct SequenceRef {
    std::string id;
    std::string path;
    int condition_code = 0;

    friend bool operator==(const SequenceRef&, const SequenceRef&) = default;
};

/// Videos sharing one foreground. Synthetic groups vary the environment per
/// member; realistic groups are exactly {degraded, original}.
struct Group {
    std::string group_id;
    Domain domain = Domain::synthetic;
    std::vector<SequenceRef> members;
    std::string mask_path;

    friend bool operator==(const Group&, const Group&) = default;
};

struct DatasetManifest {
    std::string version = kManifestVersion;
    std::vector<Group> groups;

    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct PairRecord {
    std::string group_id;
    Domain domain = Domain::synthetic;
    SequenceRef src;
    SequenceRef tar;
    std::size_t src_index = 0;
    std::size_t tar_index = 0;
    int condition_code = 0;
    std::string mask_path;

    std::string pair_id() const {
        return group_id + ":" + std::to_string(src_index) + "->" + std::to_string(tar_index);
    }

    friend bool operator==(const PairRecord&, const PairRecord&) = default;
};

// ---------------------------------------------------------------------------
// Manifest JSON (schema v1, documented in docs/manifest.md)

inline Json to_json(const DatasetManifest& m) {
    Json groups = Json::array();
    for (const auto& g : m.groups) {
        Json members = Json::array();
        for (const auto& s : g.members) {
            members.push_back(Json{{"id", s.id}, {"path", s.path}, {"condition_code", s.condition_code}});
        }
        groups.push_back(Json{{"group_id", g.group_id},
                              {"domain", domain_name(g.domain)},
                              {"mask", g.mask_path},
                              {"members", members}});
    }
    return Json{{"version", m.version}, {"groups", groups}};
}

inline std::string serialize(const DatasetManifest& m) { return to_json(m).dump(2) + "\n"; }

inline DatasetManifest manifest_from_json(const Json& doc) {
    DatasetManifest m;
    try {
        m.version = doc.at("version").get<std::string>();
        require(m.version == kManifestVersion, Errc::invalid_manifest, "unsupported manifest version " + m.version);
        for (const auto& gj : doc.at("groups")) {
            Group g;
            g.group_id = gj.at("group_id").get<std::string>();
            g.domain = parse_domain(gj.at("domain").get<std::string>());
            g.mask_path = gj.at("mask").get<std::string>();
            for (const auto& sj : gj.at("members")) {
                g.members.push_back({sj.at("id").get<std::string>(), sj.at("path").get<std::string>(),
                                     sj.at("condition_code").get<int>()});
            }
            m.groups.push_back(std::move(g));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::invalid_manifest, e.what());
    }
    return m;
}

inline DatasetManifest parse(std::string_view text) {
    try {
        return manifest_from_json(Json::parse(text));
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::invalid_manifest, e.what());
    }
}

inline DatasetManifest read_manifest(const fs::path& path) { return parse(io::read_file(path)); }

inline void write_manifest(const fs::path& path, const DatasetManifest& m) { io::write_file(path, serialize(m)); }

/// Structural checks, plus existence of every referenced path under root
/// when check_paths is set.
inline void validate(const DatasetManifest& m, const fs::path& root = {}, bool check_paths = false) {
    require(m.version == kManifestVersion, Errc::invalid_manifest, "unsupported manifest version " + m.version);
    std::set<std::string> ids;
    for (const auto& g : m.groups) {
        require(!g.group_id.empty(), Errc::invalid_manifest, "empty group_id");
        require(ids.insert(g.group_id).second, Errc::invalid_manifest, "duplicate group_id " + g.group_id);
        if (g.domain == Domain::synthetic) {
            require(g.members.size() >= 2, Errc::undersized_group,
                    "synthetic group " + g.group_id + " has fewer than 2 members");
        } else {
            require(g.members.size() == 2, Errc::undersized_group,
                    "realistic group " + g.group_id + " must have exactly 2 members (degraded, original)");
        }
        for (const auto& s : g.members) {
            require(s.condition_code >= 0, Errc::invalid_manifest, "negative condition code in " + g.group_id);
        }
        if (check_paths) {
            require(fs::exists(root / g.mask_path), Errc::invalid_manifest, "missing mask path " + g.mask_path);
            for (const auto& s : g.members) {
                require(fs::exists(root / s.path / "sequence.json"), Errc::invalid_manifest,
                        "missing sequence " + s.path);
            }
        }
    }
}

struct PairOptions {
    bool ordered = true;
};

/// Synthetic groups of size k yield all k(k-1) ordered pairs (or k(k-1)/2
/// with ordered = false); realistic groups yield degraded -> original.
/// Output is ordered by (group, src index, tar index).
inline std::vector<PairRecord> enumerate_pairs(const DatasetManifest& m, PairOptions opt = {}) {
    validate(m);
    std::vector<PairRecord> pairs;
    for (const auto& g : m.groups) {
        auto emit = [&](std::size_t i, std::size_t j) {
            pairs.push_back({g.group_id, g.domain, g.members[i], g.members[j], i, j, g.members[j].condition_code,
                             g.mask_path});
        };
        if (g.domain == Domain::realistic) {
            emit(0, 1);
            continue;
        }
        for (std::size_t i = 0; i < g.members.size(); ++i) {
            for (std::size_t j = 0; j < g.members.size(); ++j) {
                if (i == j || (!opt.ordered && j < i)) continue;
                emit(i, j);
            }
        }
    }
    return pairs;
}

// ---------------------------------------------------------------------------
// Mixed-domain sampling

struct DomainRatio {
    unsigned synthetic = 1;
    unsigned realistic = 1;
};

/// Infinite deterministic index stream over items tagged by domain. Domains
/// follow a fixed interleaved schedule at the configured ratio (1:1 is strict
/// alternation starting with synthetic); the item within a domain is drawn
/// uniformly from the seed.
class MixedIndexSampler {
public:
    MixedIndexSampler(const std::vector<Domain>& domains, std::uint64_t seed, DomainRatio ratio = {})
        : ratio_(ratio), rng_(seed) {
        require(ratio.synthetic + ratio.realistic > 0, Errc::config, "domain ratio must not be 0:0");
        for (std::size_t i = 0; i < domains.size(); ++i) {
            (domains[i] == Domain::synthetic ? synthetic_ : realistic_).push_back(i);
        }
        require(ratio.synthetic == 0 || !synthetic_.empty(), Errc::empty_domain,
                "ratio requires synthetic pairs but none exist");
        require(ratio.realistic == 0 || !realistic_.empty(), Errc::empty_domain,
                "ratio requires realistic pairs but none exist");
    }

    /// Domain of draw number i.
    Domain scheduled_domain(std::uint64_t i) const {
        const std::uint64_t n = ratio_.synthetic + ratio_.realistic;
        const std::uint64_t p = i % n;
        const std::uint64_t a = ratio_.synthetic;
        const bool syn = ((p + 1) * a + n - 1) / n != (p * a + n - 1) / n;
        return syn ? Domain::synthetic : Domain::realistic;
    }

    std::size_t next() {
        const auto& pool = scheduled_domain(draws_++) == Domain::synthetic ? synthetic_ : realistic_;
        return pool[rng_.below(pool.size())];
    }

    std::uint64_t draws() const noexcept { return draws_; }

private:
    DomainRatio ratio_;
    Rng rng_;
    std::vector<std::size_t> synthetic_;
    std::vector<std::size_t> realistic_;
    std::uint64_t draws_ = 0;
};

/// MixedIndexSampler over pair records.
class MixedSampler {
public:
    MixedSampler(std::vector<PairRecord> pairs, std::uint64_t seed, DomainRatio ratio = {})
        : pairs_(std::move(pairs)), indices_(domains_of(pairs_), seed, ratio) {}

    Domain scheduled_domain(std::uint64_t i) const { return indices_.scheduled_domain(i); }
    const PairRecord& next() { return pairs_[indices_.next()]; }
    std::uint64_t draws() const noexcept { return indices_.draws(); }

private:
    static std::vector<Domain> domains_of(const std::vector<PairRecord>& pairs) {
        std::vector<Domain> d;
        for (const auto& p : pairs) d.push_back(p.domain);
        return d;
    }

    std::vector<PairRecord> pairs_;
    MixedIndexSampler indices_;
};

// ---------------------------------------------------------------------------
// Loading pairs

struct LoadedPair {
    PairRecord record;
    FrameSequence src;
    FrameSequence tar;
    std::vector<MaskImage> mask;
};

inline LoadedPair load_pair(const PairRecord& record, const fs::path& root) {
    LoadedPair p{record, io::read_sequence(root / record.src.path), io::read_sequence(root / record.tar.path),
                 io::read_masks(root / record.mask_path)};
    require_same_shape(p.src, p.tar, "pair " + record.pair_id() + " members differ in shape");
    require(p.mask.size() == p.src.length(), Errc::dimension_mismatch, "pair " + record.pair_id() + " mask length");
    for (const auto& m : p.mask) require_same_shape(p.src.frames.front(), m, "pair " + record.pair_id() + " mask shape");
    return p;
}

// ---------------------------------------------------------------------------
// Realistic-pipeline degradation

struct RealisticInput {
    FrameSequence sequence;
    UniformLitTransform transform;
    std::uint64_t seed = 0;
};

struct DegradeOptions {
    int map_width = kDefaultMapWidth;
    int map_height = kDefaultMapHeight;
    CountRange light_count{};
    IntensityRange intensity{};
};

struct RealisticPair {
    FrameSequence degraded;
    FrameSequence original;
    LightSet lights;
    std::uint64_t seed = 0;
};

/// Restore to uniform-lit, relight under a fresh random map drawn from the
/// input's seed. The degraded video is the model input, the original the
/// ground truth.
inline RealisticPair degrade(const RealisticInput& input, const DegradeOptions& opt = {}) {
    require(input.sequence.has_normals(), Errc::missing_track, "realistic input lacks a normals track");
    require(input.sequence.has_masks(), Errc::missing_track, "realistic input lacks a mask track");
    const FrameSequence restored = uniform_lit(input.transform, input.sequence);
    LightSet lights = sample_light_set(input.seed, opt.light_count, opt.intensity);
    const EnvironmentMap env = synthesize_map(lights, opt.map_width, opt.map_height);
    return {relight_sequence(restored, env), input.sequence, std::move(lights), input.seed};
}

inline std::vector<RealisticPair> build_realistic_pairs(const std::vector<RealisticInput>& inputs,
                                                        const DegradeOptions& opt = {}) {
    std::vector<RealisticPair> out;
    out.reserve(inputs.size());
    for (const auto& in : inputs) out.push_back(degrade(in, opt));
    return out;
}

// ---------------------------------------------------------------------------
// Desk-scale corpus

struct CorpusOptions {
    std::uint64_t seed = 0;
    int synthetic_groups = 16;
    int env_presets = 4;
    int realistic_pairs = 16;
    int width = 32;
    int height = 32;
    int frames = 4;
    int map_width = kDefaultMapWidth;
    int map_height = kDefaultMapHeight;
    CountRange light_count{};
    IntensityRange intensity{64.0, 255.0};
};

/// Condition code of realistic targets (as-captured lighting); synthetic
/// targets use their environment preset index.
inline int realistic_condition_code(const CorpusOptions& opt) { return opt.env_presets; }

inline std::string index_name(const char* prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%02d", prefix, i);
    return buf;
}

/// Writes environment presets, synthetic groups (one sphere scene rendered
/// under every preset) and realistic degraded/original pairs under root, and
/// returns the manifest (also written to root/manifest.json).
inline DatasetManifest build_corpus(const fs::path& root, const CorpusOptions& opt) {
    require(opt.synthetic_groups >= 0 && opt.realistic_pairs >= 0, Errc::config, "negative corpus size");
    require(opt.env_presets >= 2 || opt.synthetic_groups == 0, Errc::config,
            "synthetic groups need at least 2 environment presets");
    SceneOptions scene_opt;
    scene_opt.width = opt.width;
    scene_opt.height = opt.height;
    scene_opt.frames = opt.frames;

    std::vector<EnvironmentMap> presets;
    for (int e = 0; e < opt.env_presets; ++e) {
        const LightSet lights = sample_light_set(mix_seed(opt.seed, 1000 + e), opt.light_count, opt.intensity);
        presets.push_back(synthesize_map(lights, opt.map_width, opt.map_height));
        const fs::path dir = root / "envs" / index_name("env", e);
        io::write_ppm(dir / "envmap.ppm", presets.back().texels(), 1.0);
        io::write_tensor(dir / "envmap.rlf", io::envmap_tensor(presets.back()));
        io::write_json(dir / "lights.json", io::light_set_json(lights));
    }

    DatasetManifest m;
    for (int g = 0; g < opt.synthetic_groups; ++g) {
        const std::string gid = index_name("syn", g);
        const fs::path gdir = fs::path("synthetic") / gid;
        const FrameSequence albedo = render_scene(random_scene(mix_seed(opt.seed, 2000 + g), scene_opt));
        io::write_sequence(root / gdir / "albedo", albedo);
        Group group{gid, Domain::synthetic, {}, (gdir / "albedo").generic_string()};
        for (int e = 0; e < opt.env_presets; ++e) {
            const fs::path rel = gdir / index_name("env", e);
            io::write_sequence(root / rel, relight_sequence(albedo, presets[static_cast<std::size_t>(e)]));
            group.members.push_back({gid + "/" + index_name("env", e), rel.generic_string(), e});
        }
        m.groups.push_back(std::move(group));
    }

    DegradeOptions degrade_opt{opt.map_width, opt.map_height, opt.light_count, opt.intensity};
    const int real_code = realistic_condition_code(opt);
    for (int r = 0; r < opt.realistic_pairs; ++r) {
        const std::string gid = index_name("real", r);
        const fs::path gdir = fs::path("realistic") / gid;
        RealisticInput input{render_scene(random_scene(mix_seed(opt.seed, 3000 + r), scene_opt)),
                             UniformLitTransform::identity(), mix_seed(opt.seed, 4000 + r)};
        const RealisticPair pair = degrade(input, degrade_opt);
        io::write_sequence(root / gdir / "original", pair.original);
        io::write_sequence(root / gdir / "degraded", pair.degraded);
        io::write_json(root / gdir / "lights.json", io::light_set_json(pair.lights));
        m.groups.push_back({gid,
                            Domain::realistic,
                            {{gid + "/degraded", (gdir / "degraded").generic_string(), real_code},
                             {gid + "/original", (gdir / "original").generic_string(), real_code}},
                            (gdir / "original").generic_string()});
    }
    write_manifest(root / "manifest.json", m);
    return m;
}

/// Moves the last holdout synthetic groups into a separate manifest.
inline std::pair<DatasetManifest, DatasetManifest> split_holdout(const DatasetManifest& m, int holdout) {
    std::vector<std::size_t> synthetic;
    for (std::size_t i = 0; i < m.groups.size(); ++i) {
        if (m.groups[i].domain == Domain::synthetic) synthetic.push_back(i);
    }
    require(holdout >= 0 && static_cast<std::size_t>(holdout) < synthetic.size(), Errc::config,
            "holdout must leave at least one synthetic training group");
    std::set<std::size_t> held(synthetic.end() - holdout, synthetic.end());
    DatasetManifest train, test;
    for (std::size_t i = 0; i < m.groups.size(); ++i) (held.count(i) ? test : train).groups.push_back(m.groups[i]);
    return {train, test};
}

} // namespace relight_forge::dataset
