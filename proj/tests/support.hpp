// Copyright 2026 The relight-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "relight_forge/error.hpp"

namespace support {

/// Code of the relight_forge::Error thrown by fn; records a failure if none is.
template <typename Fn>
relight_forge::Errc error_code(Fn&& fn) {
    try {
        fn();
    } catch (const relight_forge::Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected a relight_forge::Error";
    return relight_forge::Errc::config;
}

/// Fresh directory removed on destruction, named after the running test.
class TempDir {
public:
    TempDir() {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        std::string name = "relight_forge_" + std::to_string(::getpid());
        if (info) name += std::string("_") + info->test_suite_name() + "_" + info->name();
        path_ = std::filesystem::temp_directory_path() / name;
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

/// FNV-1a digest over every regular file below root: relative path and bytes,
/// in sorted path order.
inline std::string tree_digest(const std::filesystem::path& root, const std::vector<std::string>& skip_names = {}) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        if (std::find(skip_names.begin(), skip_names.end(), e.path().filename().string()) != skip_names.end()) continue;
        files.push_back(std::filesystem::relative(e.path(), root));
    }
    std::sort(files.begin(), files.end());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](const std::string& bytes) {
        for (unsigned char c : bytes) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        h ^= 0xff;
        h *= 0x100000001b3ULL;
    };
    for (const auto& f : files) {
        mix(f.generic_string());
        std::ifstream in(root / f, std::ios::binary);
        mix(std::string(std::istreambuf_iterator<char>(in), {}));
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx:%zu", static_cast<unsigned long long>(h), files.size());
    return buf;
}

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

/// Runs the relight-forge binary named by RELIGHT_FORGE_CLI with args
/// (already shell-quoted where needed); scratch receives the captured streams.
inline CliResult run_cli(const std::string& args, const std::filesystem::path& scratch) {
    const char* cli = std::getenv("RELIGHT_FORGE_CLI");
    CliResult r;
    if (!cli) return r;
    std::filesystem::create_directories(scratch);
    const auto out = scratch / "stdout.txt";
    const auto err = scratch / "stderr.txt";
    const std::string cmd =
        "'" + std::string(cli) + "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

} // namespace support
