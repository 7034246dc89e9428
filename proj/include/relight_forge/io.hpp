// Copyright 2026 The relight-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "relight_forge/envmap.hpp"
#include "relight_forge/error.hpp"
#include "relight_forge/frame_sequence.hpp"
#include "relight_forge/image.hpp"
#include "relight_forge/normal_map.hpp"

namespace relight_forge::io {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Raw files

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), Errc::io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const fs::path& path, std::string_view bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), Errc::io, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), Errc::io, "short write to " + path.string());
}

inline Json read_json(const fs::path& path) {
    try {
        return Json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::format, path.string() + ": " + e.what());
    }
}

inline void write_json(const fs::path& path, const Json& doc) { write_file(path, doc.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Binary P6 PPM, 8 bits per channel

/// Quantizes value * scale to a byte, rounding half to even.
inline std::uint8_t quantize_byte(double value, double scale) {
    const double v = std::nearbyint(std::clamp(value * scale, 0.0, 255.0));
    return static_cast<std::uint8_t>(v);
}

/// Encodes an image whose channels span [0, 255 / scale]. Frames use 255,
/// environment maps (already in [0, 255]) use 1.
inline std::string encode_ppm(const RgbImage& image, double scale = 255.0) {
    std::string out = "P6\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
    out.reserve(out.size() + image.size() * 3);
    for (const auto& px : image.pixels()) {
        for (double c : px) out.push_back(static_cast<char>(quantize_byte(c, scale)));
    }
    return out;
}

namespace detail {

inline void skip_ppm_space(std::string_view s, std::size_t& pos) {
    while (pos < s.size()) {
        if (s[pos] == '#') {
            while (pos < s.size() && s[pos] != '\n') ++pos;
        } else if (std::isspace(static_cast<unsigned char>(s[pos]))) {
            ++pos;
        } else {
            break;
        }
    }
}

inline long parse_ppm_int(std::string_view s, std::size_t& pos) {
    skip_ppm_space(s, pos);
    const std::size_t start = pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    require(pos > start && pos - start < 10, Errc::format, "malformed PPM header");
    return std::stol(std::string(s.substr(start, pos - start)));
}

} // namespace detail

/// Decodes a P6 file into channels divided by 255.
inline RgbImage decode_ppm(std::string_view bytes) {
    require(bytes.size() >= 2 && bytes.substr(0, 2) == "P6", Errc::format, "not a binary P6 PPM");
    std::size_t pos = 2;
    const long w = detail::parse_ppm_int(bytes, pos);
    const long h = detail::parse_ppm_int(bytes, pos);
    const long maxval = detail::parse_ppm_int(bytes, pos);
    require(maxval == 255, Errc::format, "only 8-bit PPM is supported");
    require(pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos])), Errc::format,
            "malformed PPM header");
    ++pos;
    require(w > 0 && h > 0, Errc::format, "PPM dimensions must be positive");
    const auto n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    require(bytes.size() - pos >= n * 3, Errc::format, "truncated PPM payload");
    RgbImage image(static_cast<int>(w), static_cast<int>(h));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            image[i][c] = static_cast<unsigned char>(bytes[pos + i * 3 + c]) / 255.0;
        }
    }
    return image;
}

inline void write_ppm(const fs::path& path, const RgbImage& image, double scale = 255.0) {
    write_file(path, encode_ppm(image, scale));
}

inline RgbImage read_ppm(const fs::path& path) { return decode_ppm(read_file(path)); }

// ---------------------------------------------------------------------------
// RLF1 tensor file: "RLF1", u32 ndim, u32 dims[ndim], float32 payload, all
// little-endian.

struct Tensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> data;

    std::size_t element_count() const {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline std::uint32_t get_u32(std::string_view s, std::size_t pos) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[pos + i])) << (8 * i);
    return v;
}

} // namespace detail

inline std::string encode_tensor(const Tensor& t) {
    require(t.data.size() == t.element_count(), Errc::shape_mismatch, "tensor payload does not match dims");
    std::string out = "RLF1";
    detail::put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) detail::put_u32(out, d);
    out.reserve(out.size() + t.data.size() * 4);
    for (float f : t.data) {
        std::uint32_t bits = 0;
        std::memcpy(&bits, &f, sizeof bits);
        detail::put_u32(out, bits);
    }
    return out;
}

inline Tensor decode_tensor(std::string_view bytes) {
    require(bytes.size() >= 8 && bytes.substr(0, 4) == "RLF1", Errc::format, "missing RLF1 magic");
    Tensor t;
    const std::uint32_t ndim = detail::get_u32(bytes, 4);
    require(ndim <= 16 && bytes.size() >= 8 + 4ull * ndim, Errc::format, "truncated RLF1 header");
    for (std::uint32_t i = 0; i < ndim; ++i) t.dims.push_back(detail::get_u32(bytes, 8 + 4 * i));
    const std::size_t offset = 8 + 4ull * ndim;
    const std::size_t n = t.element_count();
    require(bytes.size() == offset + 4 * n, Errc::format, "RLF1 payload size does not match dims");
    t.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t bits = detail::get_u32(bytes, offset + 4 * i);
        std::memcpy(&t.data[i], &bits, sizeof bits);
    }
    return t;
}

inline void write_tensor(const fs::path& path, const Tensor& t) { write_file(path, encode_tensor(t)); }
inline Tensor read_tensor(const fs::path& path) { return decode_tensor(read_file(path)); }

// ---------------------------------------------------------------------------
// Environment maps and light sets

/// Map as an (height, width, 3) tensor.
inline Tensor envmap_tensor(const EnvironmentMap& map) {
    Tensor t{{static_cast<std::uint32_t>(map.height()), static_cast<std::uint32_t>(map.width()), 3u}, {}};
    t.data.reserve(t.element_count());
    for (const auto& px : map.texels().pixels()) {
        for (double c : px) t.data.push_back(static_cast<float>(c));
    }
    return t;
}

inline EnvironmentMap envmap_from_tensor(const Tensor& t) {
    require(t.dims.size() == 3 && t.dims[2] == 3, Errc::format, "environment map tensor must be (H, W, 3)");
    EnvironmentMap map(static_cast<int>(t.dims[1]), static_cast<int>(t.dims[0]));
    for (int r = 0; r < map.height(); ++r) {
        for (int c = 0; c < map.width(); ++c) {
            const std::size_t base = (static_cast<std::size_t>(r) * map.width() + c) * 3;
            for (int ch = 0; ch < 3; ++ch) map.at(c, r)[ch] = t.data[base + ch];
        }
    }
    return map;
}

inline Json light_set_json(const LightSet& lights) {
    Json arr = Json::array();
    for (const auto& l : lights.lights()) {
        arr.push_back(Json{{"azimuth_turns", l.direction.azimuth.turns()},
                           {"azimuth", l.direction.azimuth.radians()},
                           {"polar", l.direction.polar},
                           {"color", {l.color[0], l.color[1], l.color[2]}}});
    }
    return Json{{"seed", lights.seed()}, {"count", lights.size()}, {"lights", arr}};
}

inline LightSet light_set_from_json(const Json& doc) {
    try {
        std::vector<PointLight> lights;
        for (const auto& l : doc.at("lights")) {
            PointLight p;
            p.direction.azimuth = Azimuth::from_turns(l.at("azimuth_turns").get<double>());
            p.direction.polar = l.at("polar").get<double>();
            require(p.direction.polar >= 0.0 && p.direction.polar <= std::numbers::pi, Errc::invalid_range,
                    "polar angle out of range");
            for (int c = 0; c < 3; ++c) p.color[c] = l.at("color").at(c).get<double>();
            lights.push_back(p);
        }
        return LightSet(std::move(lights), doc.at("seed").get<std::uint64_t>());
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::format, std::string("light set JSON: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Frame-sequence directories:
//   <dir>/sequence.json, <dir>/frames/frame_%05d.ppm, and optional sibling
//   normals/ and masks/ directories with identical naming.

inline std::string frame_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%05zu.ppm", index);
    return buf;
}

inline RgbImage mask_to_rgb(const MaskImage& mask) {
    RgbImage out(mask.width(), mask.height());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const double v = mask[i] ? 1.0 : 0.0;
        out[i] = {v, v, v};
    }
    return out;
}

inline MaskImage rgb_to_mask(const RgbImage& image) {
    MaskImage out(image.width(), image.height());
    for (std::size_t i = 0; i < image.size(); ++i) out[i] = image[i][0] >= 0.5 ? 1 : 0;
    return out;
}

inline void write_sequence(const fs::path& dir, const FrameSequence& seq) {
    seq.validate();
    fs::create_directories(dir / "frames");
    for (std::size_t i = 0; i < seq.length(); ++i) write_ppm(dir / "frames" / frame_name(i), seq.frames[i]);
    if (seq.normals) {
        for (std::size_t i = 0; i < seq.length(); ++i) {
            const auto& n = (*seq.normals)[i];
            RgbImage enc(n.width(), n.height());
            for (std::size_t p = 0; p < n.size(); ++p) enc[p] = encode_normal(n[p]);
            write_ppm(dir / "normals" / frame_name(i), enc);
        }
    }
    if (seq.masks) {
        for (std::size_t i = 0; i < seq.length(); ++i) write_ppm(dir / "masks" / frame_name(i), mask_to_rgb((*seq.masks)[i]));
    }
    Json tracks{{"frames", "frames"},
                {"normals", seq.normals ? Json("normals") : Json(nullptr)},
                {"masks", seq.masks ? Json("masks") : Json(nullptr)}};
    write_json(dir / "sequence.json", Json{{"version", "v1"},
                                          {"fps", seq.fps},
                                          {"width", seq.width()},
                                          {"height", seq.height()},
                                          {"frame_count", seq.length()},
                                          {"tracks", tracks}});
}

inline FrameSequence read_sequence(const fs::path& dir) {
    const Json desc = read_json(dir / "sequence.json");
    FrameSequence seq;
    std::size_t count = 0;
    int width = 0;
    int height = 0;
    Json tracks;
    try {
        seq.fps = desc.at("fps").get<double>();
        count = desc.at("frame_count").get<std::size_t>();
        width = desc.at("width").get<int>();
        height = desc.at("height").get<int>();
        tracks = desc.at("tracks");
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::format, (dir / "sequence.json").string() + ": " + e.what());
    }
    auto track_dir = [&](const char* key) -> std::optional<fs::path> {
        if (!tracks.contains(key) || tracks[key].is_null()) return std::nullopt;
        return dir / tracks[key].get<std::string>();
    };
    auto frames_dir = track_dir("frames");
    require(frames_dir.has_value(), Errc::missing_track, "sequence has no frames track: " + dir.string());
    for (std::size_t i = 0; i < count; ++i) {
        seq.frames.push_back(read_ppm(*frames_dir / frame_name(i)));
        require(seq.frames.back().width() == width && seq.frames.back().height() == height, Errc::dimension_mismatch,
                "frame dimensions disagree with sequence.json in " + dir.string());
    }
    if (auto nd = track_dir("normals")) {
        std::vector<NormalImage> normals;
        for (std::size_t i = 0; i < count; ++i) {
            const RgbImage enc = read_ppm(*nd / frame_name(i));
            NormalImage n(enc.width(), enc.height());
            for (std::size_t p = 0; p < enc.size(); ++p) n[p] = decode_normal(enc[p]);
            normals.push_back(std::move(n));
        }
        seq.normals = std::move(normals);
    }
    if (auto md = track_dir("masks")) {
        std::vector<MaskImage> masks;
        for (std::size_t i = 0; i < count; ++i) masks.push_back(rgb_to_mask(read_ppm(*md / frame_name(i))));
        seq.masks = std::move(masks);
    }
    seq.validate();
    return seq;
}

/// Reads only the mask track of a sequence directory.
inline std::vector<MaskImage> read_masks(const fs::path& dir) {
    FrameSequence seq = read_sequence(dir);
    require(seq.masks.has_value(), Errc::missing_track, "sequence has no mask track: " + dir.string());
    return std::move(*seq.masks);
}

} // namespace relight_forge::io
