#pragma once

#include "raycalib/camera_model.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace raycalib {

enum class LensfunModelKind {
    Poly3,
    Poly5,
    PTLens,
    FisheyeEquisolid,
    FisheyeEquidistant,
    FisheyeOrthographic,
    FisheyeStereographic,
};

enum class LensProjection { Rectilinear, Equidistant, Equisolid, Orthographic, Stereographic };

LensfunModelKind parse_lensfun_model_kind(const std::string &s);
std::string to_string(LensfunModelKind kind);
LensProjection parse_lens_projection(const std::string &s);

/// One distortion calibration. For the fisheye kinds the coefficients are an optional poly3 k1
/// on top of the ideal projection; for the polynomial kinds `projection` picks the ideal mapping.
struct LensfunEntry {
    std::string name;
    LensfunModelKind model_kind = LensfunModelKind::Poly3;
    LensProjection projection = LensProjection::Rectilinear;
    std::vector<double> coefficients;
    double focal_mm = 0.0;
    double sensor_width_mm = 36.0;
    double sensor_height_mm = 24.0;

    /// Throws UnsupportedModelKind / InvalidArgument on malformed entries.
    void check() const;
    /// Distorted normalized radius for an undistorted one; radii are in units of half the shorter sensor side.
    double distort(double ru, double *d_dru = nullptr) const;
};

LensfunEntry lensfun_entry_from_json(const std::string &text);
/// Every supported <distortion> element of every <lens> in a LensFun XML database.
std::vector<LensfunEntry> lensfun_entries_from_xml(const std::string &text);
/// JSON or XML, detected from the first non-blank character; XML yields its first supported entry.
LensfunEntry read_lensfun_entry(const std::filesystem::path &path);

struct LensfunFit {
    CameraSpec spec; // EUCM on a virtual sensor image
    double alpha = 0.0;
    double beta = 0.0;
    double focal_mm = 0.0;
    double residual_deg = 0.0; // mean angle between fitted and ideal rays
    size_t num_points = 0;
    size_t newton_failures = 0;
    size_t dropped = 0; // outside the ideal projection's domain
    std::vector<std::string> active_bounds;
};

struct LensfunFitOptions {
    int grid_stride = 20;      // virtual pixels
    double px_per_mm = 100.0;  // virtual sensor resolution
    int newton_iterations = 50;
    double newton_tol = 1e-10;
};

LensfunFit lensfun_to_eucm(const LensfunEntry &entry, const LensfunFitOptions &opts = {});

} // namespace raycalib
