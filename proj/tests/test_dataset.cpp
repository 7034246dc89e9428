// Copyright 2026 The relight-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <set>

#include "support.hpp"
#include "relight_forge/dataset.hpp"

namespace rf = relight_forge;
namespace ds = relight_forge::dataset;
using rf::Errc;
using support::error_code;

namespace {

ds::Group synthetic_group(const std::string& id, int size) {
    ds::Group g{id, ds::Domain::synthetic, {}, id + "/albedo"};
    for (int i = 0; i < size; ++i) g.members.push_back({id + "/m" + std::to_string(i), id + "/m" + std::to_string(i), i});
    return g;
}

ds::Group realistic_group(const std::string& id) {
    return {id, ds::Domain::realistic, {{id + "/degraded", id + "/degraded", 9}, {id + "/original", id + "/original", 9}},
            id + "/original"};
}

ds::DatasetManifest manifest_of(std::initializer_list<int> sizes, int realistic = 0) {
    ds::DatasetManifest m;
    int i = 0;
    for (int k : sizes) m.groups.push_back(synthetic_group("s" + std::to_string(i++), k));
    for (int r = 0; r < realistic; ++r) m.groups.push_back(realistic_group("r" + std::to_string(r)));
    return m;
}

// Independent brute-force enumeration: every (i, j) with i != j.
std::set<std::tuple<std::string, std::size_t, std::size_t>> brute_pairs(const ds::DatasetManifest& m) {
    std::set<std::tuple<std::string, std::size_t, std::size_t>> out;
    for (const auto& g : m.groups) {
        if (g.domain == ds::Domain::realistic) {
            out.insert({g.group_id, 0, 1});
            continue;
        }
        for (std::size_t i = 0; i < g.members.size(); ++i) {
            for (std::size_t j = 0; j < g.members.size(); ++j) {
                if (i != j) out.insert({g.group_id, i, j});
            }
        }
    }
    return out;
}

ds::CorpusOptions tiny_corpus(std::uint64_t seed = 0) {
    ds::CorpusOptions o;
    o.seed = seed;
    o.synthetic_groups = 2;
    o.env_presets = 3;
    o.realistic_pairs = 2;
    o.width = 16;
    o.height = 16;
    o.frames = 2;
    o.map_width = 16;
    o.map_height = 8;
    return o;
}

} // namespace

TEST(Pairs, CountMatchesKTimesKMinusOne) {
    EXPECT_EQ(ds::enumerate_pairs(manifest_of({2})).size(), 2u);
    EXPECT_EQ(ds::enumerate_pairs(manifest_of({5})).size(), 20u);
    EXPECT_EQ(ds::enumerate_pairs(manifest_of({2, 3, 4, 5})).size(), 2u + 6u + 12u + 20u);
    EXPECT_EQ(ds::enumerate_pairs(manifest_of({3}, 2)).size(), 6u + 2u);
}

TEST(Pairs, MatchesBruteForce) {
    const auto m = manifest_of({2, 3, 6, 4}, 3);
    std::set<std::tuple<std::string, std::size_t, std::size_t>> got;
    for (const auto& p : ds::enumerate_pairs(m)) {
        EXPECT_NE(p.src_index, p.tar_index);
        EXPECT_NE(p.src, p.tar);
        EXPECT_TRUE(got.insert({p.group_id, p.src_index, p.tar_index}).second) << "duplicate " << p.pair_id();
    }
    EXPECT_EQ(got, brute_pairs(m));
}

TEST(Pairs, RecordCarriesTargetCondition) {
    for (const auto& p : ds::enumerate_pairs(manifest_of({4}, 1))) {
        EXPECT_EQ(p.condition_code, p.tar.condition_code);
        if (p.domain == ds::Domain::realistic) {
            EXPECT_EQ(p.src.id, "r0/degraded");
            EXPECT_EQ(p.tar.id, "r0/original");
        }
    }
}

TEST(Pairs, UnorderedHalvesSyntheticCount) {
    ds::PairOptions opt;
    opt.ordered = false;
    EXPECT_EQ(ds::enumerate_pairs(manifest_of({5}), opt).size(), 10u);
    for (const auto& p : ds::enumerate_pairs(manifest_of({4}), opt)) EXPECT_LT(p.src_index, p.tar_index);
}

TEST(Pairs, PairIdFormat) {
    const auto pairs = ds::enumerate_pairs(manifest_of({2}));
    EXPECT_EQ(pairs[0].pair_id(), "s0:0->1");
    EXPECT_EQ(pairs[1].pair_id(), "s0:1->0");
}

TEST(Manifest, UndersizedGroupsRejected) {
    EXPECT_EQ(error_code([] { ds::enumerate_pairs(manifest_of({1})); }), Errc::undersized_group);
    auto m = manifest_of({}, 1);
    m.groups[0].members.pop_back();
    EXPECT_EQ(error_code([&] { ds::validate(m); }), Errc::undersized_group);
}

TEST(Manifest, DuplicateGroupIdRejected) {
    auto m = manifest_of({2, 2});
    m.groups[1].group_id = m.groups[0].group_id;
    EXPECT_EQ(error_code([&] { ds::validate(m); }), Errc::invalid_manifest);
}

TEST(Manifest, SerializeParseSerializeIsByteIdentical) {
    const auto m = manifest_of({2, 5, 3}, 2);
    const std::string text = ds::serialize(m);
    const auto parsed = ds::parse(text);
    EXPECT_EQ(parsed, m);
    EXPECT_EQ(ds::serialize(parsed), text);
}

TEST(Manifest, MalformedDocumentsRejected) {
    EXPECT_EQ(error_code([] { ds::parse("{"); }), Errc::invalid_manifest);
    EXPECT_EQ(error_code([] { ds::parse(R"({"version":"v1"})"); }), Errc::invalid_manifest);
    EXPECT_EQ(error_code([] { ds::parse(R"({"version":"v9","groups":[]})"); }), Errc::invalid_manifest);
    EXPECT_EQ(error_code([] {
                  ds::parse(R"({"version":"v1","groups":[{"group_id":"g","domain":"moon","mask":"m","members":[]}]})");
              }),
              Errc::invalid_manifest);
}

TEST(Manifest, PathCheckReportsMissingSequences) {
    support::TempDir dir;
    EXPECT_EQ(error_code([&] { ds::validate(manifest_of({2}), dir.path(), true); }), Errc::invalid_manifest);
}

TEST(Sampler, OneToOneAlternatesStrictly) {
    const auto pairs = ds::enumerate_pairs(manifest_of({3, 4}, 3));
    ds::MixedSampler s(pairs, 7);
    for (int i = 0; i < 10000; ++i) {
        const auto expected = i % 2 == 0 ? ds::Domain::synthetic : ds::Domain::realistic;
        EXPECT_EQ(s.next().domain, expected) << "draw " << i;
    }
    EXPECT_EQ(s.draws(), 10000u);
}

TEST(Sampler, RatioHoldsOverEveryPeriod) {
    ds::MixedIndexSampler s({ds::Domain::synthetic, ds::Domain::realistic}, 0, {3, 2});
    for (std::uint64_t start = 0; start < 50; start += 5) {
        int syn = 0;
        for (std::uint64_t i = start; i < start + 5; ++i) syn += s.scheduled_domain(i) == ds::Domain::synthetic;
        EXPECT_EQ(syn, 3);
    }
}

TEST(Sampler, SyntheticOnlyNeverDrawsRealistic) {
    const auto pairs = ds::enumerate_pairs(manifest_of({3}, 2));
    ds::MixedSampler s(pairs, 1, {1, 0});
    for (int i = 0; i < 1000; ++i) EXPECT_EQ(s.next().domain, ds::Domain::synthetic);
}

TEST(Sampler, DeterministicForSeed) {
    const auto pairs = ds::enumerate_pairs(manifest_of({3, 5}, 4));
    ds::MixedSampler a(pairs, 42), b(pairs, 42), c(pairs, 43);
    bool differs = false;
    for (int i = 0; i < 500; ++i) {
        const auto& pa = a.next();
        EXPECT_EQ(pa, b.next());
        differs |= !(pa == c.next());
    }
    EXPECT_TRUE(differs);
}

TEST(Sampler, CoversEveryPair) {
    const auto pairs = ds::enumerate_pairs(manifest_of({3}, 2));
    ds::MixedSampler s(pairs, 3);
    std::set<std::string> seen;
    for (int i = 0; i < 2000; ++i) seen.insert(s.next().pair_id());
    EXPECT_EQ(seen.size(), pairs.size());
}

TEST(Sampler, EmptyDomainRejected) {
    EXPECT_EQ(error_code([] { ds::MixedSampler(ds::enumerate_pairs(manifest_of({3})), 0); }), Errc::empty_domain);
    EXPECT_EQ(error_code([] { ds::MixedSampler(ds::enumerate_pairs(manifest_of({}, 2)), 0); }), Errc::empty_domain);
    EXPECT_NO_THROW(ds::MixedSampler(ds::enumerate_pairs(manifest_of({3})), 0, {1, 0}));
    EXPECT_EQ(error_code([] { ds::MixedSampler(ds::enumerate_pairs(manifest_of({3}, 1)), 0, {0, 0}); }), Errc::config);
}

TEST(Degrade, DeterministicAndVisiblyDifferent) {
    rf::SceneOptions so;
    so.width = 32;
    so.height = 32;
    so.frames = 3;
    const ds::RealisticInput input{rf::render_scene(rf::random_scene(5, so)), rf::UniformLitTransform::identity(), 11};
    const auto a = ds::degrade(input);
    const auto b = ds::degrade(input);
    EXPECT_EQ(a.degraded.frames, b.degraded.frames);
    EXPECT_EQ(a.original.frames, input.sequence.frames);
    std::size_t fg = 0, changed = 0;
    for (std::size_t f = 0; f < a.original.length(); ++f) {
        for (std::size_t i = 0; i < a.original.frames[f].size(); ++i) {
            if ((*input.sequence.masks)[f][i] == 0) continue;
            ++fg;
            changed += a.degraded.frames[f][i] != a.original.frames[f][i];
        }
    }
    ASSERT_GT(fg, 0u);
    EXPECT_GE(static_cast<double>(changed), 0.01 * static_cast<double>(fg));
    ds::RealisticInput other = input;
    other.seed = 12;
    EXPECT_NE(ds::degrade(other).degraded.frames, a.degraded.frames);
}

TEST(Degrade, RequiresNormalsAndMasks) {
    ds::RealisticInput input{rf::render_scene(rf::random_scene(1)), rf::UniformLitTransform::identity(), 0};
    input.sequence.normals.reset();
    EXPECT_EQ(error_code([&] { ds::degrade(input); }), Errc::missing_track);
}

TEST(Corpus, BuildsValidManifest) {
    support::TempDir dir;
    const auto opt = tiny_corpus();
    const auto m = ds::build_corpus(dir.path(), opt);
    EXPECT_NO_THROW(ds::validate(m, dir.path(), true));
    EXPECT_EQ(ds::read_manifest(dir / "manifest.json"), m);
    const auto pairs = ds::enumerate_pairs(m);
    EXPECT_EQ(pairs.size(), 2u * 3u * 2u + 2u);
    for (const auto& p : pairs) {
        if (p.domain == ds::Domain::realistic) {
            EXPECT_EQ(p.condition_code, ds::realistic_condition_code(opt));
        }
    }
    const auto loaded = ds::load_pair(pairs.front(), dir.path());
    EXPECT_EQ(loaded.src.length(), 2u);
    EXPECT_EQ(loaded.tar.width(), 16);
    EXPECT_EQ(loaded.mask.size(), 2u);
}

TEST(Corpus, DeterministicForSeed) {
    support::TempDir dir;
    const auto a = ds::build_corpus(dir / "a", tiny_corpus(3));
    const auto b = ds::build_corpus(dir / "b", tiny_corpus(3));
    EXPECT_EQ(a, b);
    const auto pa = ds::load_pair(ds::enumerate_pairs(a).back(), dir / "a");
    const auto pb = ds::load_pair(ds::enumerate_pairs(b).back(), dir / "b");
    EXPECT_EQ(pa.src.frames, pb.src.frames);
    EXPECT_EQ(pa.tar.frames, pb.tar.frames);
}

TEST(Corpus, HoldoutSplitsSyntheticGroups) {
    const auto m = manifest_of({2, 3, 4}, 2);
    const auto [train, test] = ds::split_holdout(m, 1);
    EXPECT_EQ(train.groups.size(), 4u);
    ASSERT_EQ(test.groups.size(), 1u);
    EXPECT_EQ(test.groups[0].group_id, "s2");
    EXPECT_EQ(error_code([&] { ds::split_holdout(m, 3); }), Errc::config);
}
