#pragma once

#include "raycalib/calibrator.hpp"
#include "raycalib/lensfun.hpp"
#include "raycalib/metrics.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace raycalib {

using Json = nlohmann::json;

/// {"model", "width", "height", "fx", "fy", "cx", "cy", "dist"}
Json spec_to_json(const CameraSpec &spec);
CameraSpec spec_from_json(const Json &j);

/// Spec fields plus gn_costs, active_bounds and the remaining diagnostics.
Json result_to_json(const CalibrationResult &result);
Json report_to_json(const EvalReport &report);
Json lensfun_fit_to_json(const LensfunFit &fit);

/// Two-space indented text with a trailing newline.
std::string dump_json(const Json &j);
Json read_json_file(const std::filesystem::path &path);
void write_text_file(const std::filesystem::path &path, const std::string &text);

CameraSpec read_spec(const std::filesystem::path &path);
void write_spec(const CameraSpec &spec, const std::filesystem::path &path);

} // namespace raycalib
