// Copyright 2026 The relight-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace relight_forge {

enum class Errc {
    dimension_too_small,
    invalid_range,
    empty_light_set,
    dimension_mismatch,
    degenerate_normal,
    missing_track,
    sphere_out_of_bounds,
    oracle_mismatch,
    empty_mask,
    frame_too_small,
    undersized_group,
    invalid_manifest,
    empty_domain,
    shape_mismatch,
    step_count,
    config,
    io,
    format,
    missing_prediction,
    locked,
};

inline std::string_view errc_name(Errc code) {
    switch (code) {
    case Errc::dimension_too_small: return "dimension-too-small";
    case Errc::invalid_range: return "invalid-range";
    case Errc::empty_light_set: return "empty-light-set";
    case Errc::dimension_mismatch: return "dimension-mismatch";
    case Errc::degenerate_normal: return "degenerate-normal";
    case Errc::missing_track: return "missing-track";
    case Errc::sphere_out_of_bounds: return "sphere-out-of-bounds";
    case Errc::oracle_mismatch: return "oracle-mismatch";
    case Errc::empty_mask: return "empty-mask";
    case Errc::frame_too_small: return "frame-too-small";
    case Errc::undersized_group: return "undersized-group";
    case Errc::invalid_manifest: return "invalid-manifest";
    case Errc::empty_domain: return "empty-domain";
    case Errc::shape_mismatch: return "shape-mismatch";
    case Errc::step_count: return "step-count";
    case Errc::config: return "config";
    case Errc::io: return "io";
    case Errc::format: return "format";
    case Errc::missing_prediction: return "missing-prediction";
    case Errc::locked: return "locked";
    }
    return "unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit-code mapping) can branch without string matching.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, Errc code, const std::string& what) {
    if (!ok) fail(code, what);
}

} // namespace relight_forge
