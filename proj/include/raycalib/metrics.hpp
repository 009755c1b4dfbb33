#pragma once

#include "raycalib/camera_model.hpp"

#include <string>
#include <vector>

namespace raycalib {

/// Mean of a per-pixel error over the grid of pixel centers, with cells that could not be evaluated counted.
struct GridError {
    double mean = 0.0;
    size_t cells = 0;
    size_t dropped = 0;
};

/// Degrees. Cells where either spec cannot unproject are dropped.
GridError angular_error_grid(const CameraSpec &gt, const CameraSpec &est, int grid_stride = 1);
/// Pixels: |project(est, unproject(gt, px)) - px|.
GridError reproj_error_grid(const CameraSpec &gt, const CameraSpec &est, int grid_stride = 1);

double angular_error(const CameraSpec &gt, const CameraSpec &est, int grid_stride = 1);
double reproj_error(const CameraSpec &gt, const CameraSpec &est, int grid_stride = 1);

/// Per-pixel angular errors (degrees) on the grid, row-major; NaN for dropped cells.
std::vector<double> angular_error_map(const CameraSpec &gt, const CameraSpec &est, int grid_stride = 1);
/// Per-pixel reprojection errors (pixels), same layout.
std::vector<double> reproj_error_map(const CameraSpec &gt, const CameraSpec &est, int grid_stride = 1);

struct Fov {
    double hfov = 0.0; // degrees
    double vfov = 0.0;
};

/// Sum of the polar angles of the rays through the image edges on the principal point's row and column.
Fov fov_agnostic(const CameraSpec &spec);

/// Area under the recall curve up to each threshold, in percent.
std::vector<double> auc(const std::vector<double> &errors, const std::vector<double> &thresholds = {1.0, 5.0, 10.0});

struct EditedErrors {
    double ef = 0.0;
    double ec = 0.0;
};

EditedErrors edited_errors(const CameraSpec &gt, const CameraSpec &est);

struct EvalReport {
    double ae_mean = 0.0;  // degrees
    double re_mean = 0.0;  // pixels
    double hfov_err = 0.0; // degrees
    double vfov_err = 0.0;
    double ef = 0.0;
    double ec = 0.0;
    size_t dropped_cells = 0;
};

EvalReport evaluate(const CameraSpec &gt, const CameraSpec &est, int grid_stride = 1);

std::string eval_csv_header();
std::string eval_csv_row(const EvalReport &report);

} // namespace raycalib
