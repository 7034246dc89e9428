// Copyright 2026 The relight-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "relight_forge/error.hpp"
#include "relight_forge/io.hpp"
#include "relight_forge/trainer.hpp"

namespace relight_forge::checkpoint {

namespace fs = std::filesystem;
using io::Json;

// A checkpoint is a pair of files sharing a stem: <stem>.rlf holds every
// tensor concatenated into one flat float32 RLF1 payload, <stem>.json holds
// the shapes, offsets and run metadata.

inline Json config_json(const trainer::ModelConfig& c) {
    return Json{{"latent_channels", c.latent_channels},
                {"hidden", c.hidden},
                {"time_frequencies", c.time_frequencies},
                {"cond_dim", c.cond_dim},
                {"condition_codes", c.condition_codes}};
}

inline trainer::ModelConfig config_from_json(const Json& j) {
    trainer::ModelConfig c;
    c.latent_channels = j.at("latent_channels").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.time_frequencies = j.at("time_frequencies").get<int>();
    c.cond_dim = j.at("cond_dim").get<int>();
    c.condition_codes = j.at("condition_codes").get<int>();
    return c;
}

namespace detail {

template <typename Params>
void write(const fs::path& stem, const Params& params, Json header) {
    io::Tensor flat;
    Json tensors = Json::array();
    Params::visit(params, [&](const char* name, const std::vector<double>& values) {
        tensors.push_back(Json{{"name", name}, {"offset", flat.data.size()}, {"count", values.size()}});
        for (double v : values) flat.data.push_back(static_cast<float>(v));
    });
    flat.dims = {static_cast<std::uint32_t>(flat.data.size())};
    header["format"] = "RLF1";
    header["payload"] = stem.filename().string() + ".rlf";
    header["tensors"] = tensors;
    io::write_tensor(fs::path(stem.string() + ".rlf"), flat);
    io::write_json(fs::path(stem.string() + ".json"), header);
}

template <typename Params>
void read_into(const fs::path& stem, const Json& header, Params& params) {
    const io::Tensor flat = io::read_tensor(fs::path(stem.string() + ".rlf"));
    require(flat.dims.size() == 1, Errc::format, "checkpoint payload must be one-dimensional");
    const Json& tensors = header.at("tensors");
    std::size_t index = 0;
    Params::visit(params, [&](const char* name, std::vector<double>& values) {
        require(index < tensors.size(), Errc::format, "checkpoint header lacks tensor " + std::string(name));
        const Json& t = tensors[index++];
        require(t.at("name").get<std::string>() == name, Errc::format, "checkpoint tensor order differs at " + std::string(name));
        const auto offset = t.at("offset").get<std::size_t>();
        const auto count = t.at("count").get<std::size_t>();
        require(count == values.size() && offset + count <= flat.data.size(), Errc::shape_mismatch,
                "checkpoint tensor " + std::string(name) + " has the wrong size");
        for (std::size_t i = 0; i < count; ++i) values[i] = flat.data[offset + i];
    });
}

inline Json read_header(const fs::path& stem, const char* kind) {
    Json header = io::read_json(fs::path(stem.string() + ".json"));
    require(header.value("kind", "") == kind, Errc::format, stem.string() + " is not a " + kind + " checkpoint");
    return header;
}

} // namespace detail

/// `meta` is merged into the header (step count, arm, seeds, ...).
inline void save_model(const fs::path& stem, const trainer::ModelParams& p, const Json& meta = Json::object()) {
    Json header = meta;
    header["kind"] = "model";
    header["config"] = config_json(p.config);
    detail::write(stem, p, std::move(header));
}

inline trainer::ModelParams load_model(const fs::path& stem) {
    try {
        const Json header = detail::read_header(stem, "model");
        trainer::ModelParams p = trainer::ModelParams::zeros(config_from_json(header.at("config")));
        detail::read_into(stem, header, p);
        return p;
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::format, stem.string() + ": " + e.what());
    }
}

inline void save_adapter(const fs::path& stem, const trainer::AdapterParams& a, const trainer::ModelConfig& cfg,
                         const Json& meta = Json::object()) {
    Json header = meta;
    header["kind"] = "adapter";
    header["config"] = config_json(cfg);
    header["rank"] = a.rank;
    header["alpha"] = a.alpha;
    detail::write(stem, a, std::move(header));
}

inline trainer::AdapterParams load_adapter(const fs::path& stem) {
    try {
        const Json header = detail::read_header(stem, "adapter");
        const auto cfg = config_from_json(header.at("config"));
        trainer::AdapterParams a =
            trainer::AdapterParams::zeros(cfg, header.at("rank").get<int>(), header.at("alpha").get<double>());
        detail::read_into(stem, header, a);
        return a;
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::format, stem.string() + ": " + e.what());
    }
}

} // namespace relight_forge::checkpoint
