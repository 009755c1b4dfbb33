#pragma once

#include "raycalib/camera_model.hpp"
#include "raycalib/fov_field.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace raycalib {

/// Paired pixels and unit rays, plus the image size the pixels live in.
struct Correspondences {
    std::vector<Pixel> pixels;
    std::vector<Ray> rays;
    int width = 0;
    int height = 0;

    size_t size() const { return pixels.size(); }
    void add(const Pixel &px, const Ray &ray) {
        pixels.push_back(px);
        rays.push_back(ray);
    }
};

/// Every `stride`-th cell of the grid in both directions.
Correspondences correspondences_from_rays(const RayGrid &grid, int stride = 1);
/// Unprojects the pixel centers (j * stride + 0.5, i * stride + 0.5) of spec's image.
Correspondences correspondences_from_spec(const CameraSpec &spec, int stride = 1);

struct CalibrationResult {
    CameraSpec spec;
    CameraSpec algebraic_spec;
    std::vector<double> gn_costs; // initial cost followed by the cost after each iteration
    double ppoint_residual = 0.0;
    std::vector<std::string> active_bounds;
    std::vector<std::string> warnings;
    size_t num_correspondences = 0;
    size_t dropped_rows = 0;
    double inlier_ratio = 1.0;
};

struct PpointAspect {
    double a = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    double residual = 0.0; // rms of the stacked constraint rows
};

PpointAspect fit_ppoint_aspect(const Correspondences &corrs);

/// Closed-form fit of every family except EUCM (which dispatches to fit_eucm) for fixed a and c.
/// Clamped bounds are appended to `active_bounds` when given.
CameraSpec fit_linear(const ModelId &model, const Correspondences &corrs, double a, const Pixel &c,
                      std::vector<std::string> *active_bounds = nullptr);

struct EucmFitOptions {
    int proxy_kb_order = 3;
    double fixed_focal = 0.0; // > 0 skips the proxy and uses this focal length
};

CameraSpec fit_eucm(const Correspondences &corrs, double a, const Pixel &c,
                    std::vector<std::string> *active_bounds = nullptr, const EucmFitOptions &opts = {});

/// Distortion-only fit with f, a and c held fixed.
CameraSpec fit_distortion(const ModelId &model, const Correspondences &corrs, double f, double a, const Pixel &c,
                          std::vector<std::string> *active_bounds = nullptr);

struct RefineOptions {
    int iterations = 5;
    int max_halvings = 4;
    bool fix_focal = false; // holds f, a, cx, cy and refines the distortion only
};

/// Mean over correspondences of the squared tangent-plane residual (radians^2).
double refinement_cost(const CameraSpec &spec, const Correspondences &corrs);

CalibrationResult refine(const CameraSpec &spec0, const Correspondences &corrs, const RefineOptions &opts = {});

CalibrationResult calibrate(const FovField &field, const ModelId &model, int stride = 1);

struct RansacOptions {
    int iterations = 500;
    double threshold = 0.0174532925199432958; // radians
    uint64_t seed = 0;
};

CalibrationResult calibrate_ransac(const FovField &field, const ModelId &model, const RansacOptions &opts,
                                   int stride = 1);

/// Size of the minimal sample drawn by calibrate_ransac.
int minimal_sample_size(const ModelId &model);

CameraSpec convert_model(const CameraSpec &src, const ModelId &dst, bool fix_focal, int stride = 1);

} // namespace raycalib
