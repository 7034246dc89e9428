// Copyright 2026 The relight-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <system_error>
#include <vector>

#include <fcntl.h>
#include <unistd.h>

#include "relight_forge/dataset.hpp"
#include "relight_forge/error.hpp"
#include "relight_forge/io.hpp"
#include "relight_forge/metrics.hpp"

namespace relight_forge::cli {

namespace fs = std::filesystem;
using io::Json;

inline constexpr const char* kLockName = ".relight-forge.lock";
inline constexpr const char* kStagingName = ".relight-forge.partial";

/// Exit code for a failure: 3 for I/O, 2 for any other library error.
inline int exit_code(Errc code) { return code == Errc::io ? 3 : 2; }

/// Output directory guarded by a sentinel lock file. Outputs are written to a
/// staging directory and moved into place by commit(); without a commit the
/// staging directory (and the output directory, if this run created it) is
/// removed, so a failed run leaves nothing behind.
class OutputDir {
public:
    explicit OutputDir(fs::path root) : root_(std::move(root)) {
        require(!root_.empty(), Errc::config, "--out is required");
        std::error_code ec;
        created_root_ = !fs::exists(root_, ec);
        fs::create_directories(root_, ec);
        require(!ec, Errc::io, "cannot create output directory " + root_.string() + ": " + ec.message());
        const fs::path lock = root_ / kLockName;
        const int fd = ::open(lock.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) {
            cleanup_root();
            fail(errno == EEXIST ? Errc::locked : Errc::io,
                 errno == EEXIST ? "output directory " + root_.string() + " is locked by another run (" + lock.string() + ")"
                                 : "cannot create lock file " + lock.string());
        }
        ::close(fd);
        locked_ = true;
        fs::remove_all(staging(), ec);
        fs::create_directories(staging(), ec);
        require(!ec, Errc::io, "cannot create staging directory: " + ec.message());
    }

    OutputDir(const OutputDir&) = delete;
    OutputDir& operator=(const OutputDir&) = delete;

    ~OutputDir() {
        std::error_code ec;
        if (!committed_) fs::remove_all(staging(), ec);
        if (locked_) fs::remove(root_ / kLockName, ec);
        if (!committed_) cleanup_root();
    }

    /// Where outputs are written before commit().
    fs::path staging() const { return root_ / kStagingName; }
    const fs::path& root() const noexcept { return root_; }

    /// Moves every staged entry into the output directory, replacing entries
    /// of the same name.
    void commit() {
        std::vector<fs::path> entries;
        for (const auto& e : fs::directory_iterator(staging())) entries.push_back(e.path());
        std::sort(entries.begin(), entries.end());
        for (const auto& src : entries) {
            const fs::path dst = root_ / src.filename();
            std::error_code ec;
            fs::remove_all(dst, ec);
            fs::rename(src, dst, ec);
            require(!ec, Errc::io, "cannot move " + src.string() + " into place: " + ec.message());
        }
        fs::remove(staging());
        committed_ = true;
    }

private:
    void cleanup_root() {
        if (!created_root_) return;
        std::error_code ec;
        if (fs::is_empty(root_, ec)) fs::remove(root_, ec);
    }

    fs::path root_;
    bool created_root_ = false;
    bool locked_ = false;
    bool committed_ = false;
};

// ---------------------------------------------------------------------------
// Benchmark manifest (docs/manifest.md)

inline constexpr const char* kPaired3d = "paired_3d";
inline constexpr const char* kPairedRealistic = "paired_realistic";
inline constexpr const char* kUnpaired = "unpaired";

enum class RestoreKind { identity, external };

struct BenchEntry {
    std::string pair_id;
    std::string subset;
    std::string src;
    std::optional<std::string> tar;
    std::string mask;
    RestoreKind restore = RestoreKind::identity;
    /// Uniform-lit frames of the source, for external restoration.
    std::string restored_src;

    bool paired() const { return subset != kUnpaired; }
};

struct BenchManifest {
    std::vector<BenchEntry> entries;
};

inline Json to_json(const BenchManifest& m) {
    Json entries = Json::array();
    for (const auto& e : m.entries) {
        Json j{{"pair_id", e.pair_id}, {"subset", e.subset}, {"src", e.src}};
        if (e.tar) j["tar"] = *e.tar;
        j["mask"] = e.mask;
        j["uniform_lit"] = e.restore == RestoreKind::identity ? Json{{"kind", "identity"}}
                                                              : Json{{"kind", "external"}, {"src", e.restored_src}};
        entries.push_back(std::move(j));
    }
    return Json{{"version", "v1"}, {"entries", entries}};
}

inline BenchManifest bench_from_json(const Json& doc) {
    BenchManifest m;
    try {
        require(doc.at("version").get<std::string>() == "v1", Errc::invalid_manifest, "unsupported bench manifest version");
        std::map<std::string, int> seen;
        for (const auto& j : doc.at("entries")) {
            BenchEntry e;
            e.pair_id = j.at("pair_id").get<std::string>();
            e.subset = j.at("subset").get<std::string>();
            e.src = j.at("src").get<std::string>();
            e.mask = j.at("mask").get<std::string>();
            if (j.contains("tar")) e.tar = j.at("tar").get<std::string>();
            require(e.subset == kPaired3d || e.subset == kPairedRealistic || e.subset == kUnpaired, Errc::invalid_manifest,
                    "unknown subset '" + e.subset + "' for " + e.pair_id);
            require(!e.paired() || e.tar.has_value(), Errc::invalid_manifest, "paired entry " + e.pair_id + " lacks tar");
            require(!e.pair_id.empty() && e.pair_id.find('/') == std::string::npos, Errc::invalid_manifest,
                    "pair_id must be non-empty and free of '/'");
            require(++seen[e.pair_id] == 1, Errc::invalid_manifest, "duplicate pair_id " + e.pair_id);
            const Json restore = j.value("uniform_lit", Json{{"kind", "identity"}});
            const std::string kind = restore.at("kind").get<std::string>();
            if (kind == "external") {
                e.restore = RestoreKind::external;
                e.restored_src = restore.at("src").get<std::string>();
            } else {
                require(kind == "identity", Errc::invalid_manifest, "unknown uniform_lit kind '" + kind + "'");
            }
            m.entries.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& ex) {
        fail(Errc::invalid_manifest, ex.what());
    }
    return m;
}

inline BenchManifest read_bench_manifest(const fs::path& path) {
    try {
        return bench_from_json(io::read_json(path));
    } catch (const nlohmann::json::exception& ex) {
        fail(Errc::invalid_manifest, ex.what());
    }
}

/// Paired entries for every enumerated pair of a dataset: synthetic pairs go
/// to paired_3d, realistic pairs to paired_realistic. Pair ids replace the
/// ':' and '->' separators so they are portable directory names.
inline BenchManifest bench_from_dataset(const dataset::DatasetManifest& m) {
    BenchManifest b;
    for (const auto& p : dataset::enumerate_pairs(m)) {
        BenchEntry e;
        e.pair_id = p.group_id + "_" + std::to_string(p.src_index) + "_" + std::to_string(p.tar_index);
        e.subset = p.domain == dataset::Domain::synthetic ? kPaired3d : kPairedRealistic;
        e.src = p.src.path;
        e.tar = p.tar.path;
        e.mask = p.mask_path;
        b.entries.push_back(std::move(e));
    }
    return b;
}

/// Prediction directory of one entry.
inline fs::path prediction_dir(const fs::path& predictions, const BenchEntry& e) { return predictions / e.pair_id; }

inline std::vector<std::string> missing_predictions(const BenchManifest& m, const fs::path& predictions) {
    std::vector<std::string> missing;
    for (const auto& e : m.entries) {
        if (!fs::exists(prediction_dir(predictions, e) / "sequence.json")) missing.push_back(e.pair_id);
    }
    return missing;
}

inline std::optional<double> optional_score(const fs::path& path) {
    if (!fs::exists(path)) return std::nullopt;
    return metrics::read_score_file(path);
}

/// Scores every entry. Paired subsets compare the prediction with the ground
/// truth on the foreground; unpaired subsets report intrinsic consistency
/// between source and prediction. Fails with missing_prediction, listing
/// every absent pair_id, before any entry is scored.
inline std::vector<metrics::BenchRow> run_bench(const BenchManifest& m, const fs::path& root, const fs::path& predictions) {
    const auto missing = missing_predictions(m, predictions);
    if (!missing.empty()) {
        std::string list;
        for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
        fail(Errc::missing_prediction, "no prediction for " + std::to_string(missing.size()) + " pair(s): " + list);
    }
    std::vector<metrics::BenchRow> rows;
    for (const auto& e : m.entries) {
        const fs::path pred_dir = prediction_dir(predictions, e);
        const FrameSequence pred = io::read_sequence(pred_dir);
        const auto mask = io::read_masks(root / e.mask);
        metrics::BenchRow row{e.pair_id, e.subset, {}, optional_score(pred_dir / "lpips.txt"),
                              optional_score(pred_dir / "clip_t.txt")};
        if (e.paired()) {
            row.report = metrics::compare(pred, io::read_sequence(root / *e.tar), &mask);
        } else {
            const FrameSequence src = io::read_sequence(root / e.src);
            const bool external = e.restore == RestoreKind::external;
            const auto u_src = external ? UniformLitTransform::external(root / e.restored_src) : UniformLitTransform::identity();
            const auto u_gen = external ? UniformLitTransform::external(pred_dir / "uniform_lit") : UniformLitTransform::identity();
            row.report = metrics::intrinsic_consistency(src, pred, mask, u_src, u_gen);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline const std::map<std::string, std::string>& subset_metrics() {
    static const std::map<std::string, std::string> m{
        {kPaired3d, "paired"}, {kPairedRealistic, "paired"}, {kUnpaired, "intrinsic_consistency"}};
    return m;
}

} // namespace relight_forge::cli
