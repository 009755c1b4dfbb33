#include "raycalib/metrics.hpp"
#include "raycalib/error.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

namespace raycalib {

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;

void require_same_size(const CameraSpec &gt, const CameraSpec &est) {
    if (gt.width != est.width || gt.height != est.height)
        throw Error(ErrorKind::DimensionMismatch, "specs describe different image sizes");
    if (gt.width <= 0 || gt.height <= 0)
        throw Error(ErrorKind::InvalidArgument, "image size must be positive");
}

double angle_deg(const Ray &a, const Ray &b) { return std::atan2(a.cross(b).norm(), a.dot(b)) * kDeg; }

// Calls fn(px) on the pixel-center grid; fn returns NaN for cells it cannot evaluate.
template <typename Fn> GridError grid_mean(const CameraSpec &spec, int stride, Fn fn) {
    if (stride < 1)
        throw Error(ErrorKind::InvalidArgument, "grid stride must be >= 1");
    GridError out;
    double sum = 0.0;
    for (int v = 0; v < spec.height; v += stride)
        for (int u = 0; u < spec.width; u += stride) {
            const double e = fn(Pixel(u + 0.5, v + 0.5));
            if (std::isnan(e)) {
                ++out.dropped;
                continue;
            }
            sum += e;
            ++out.cells;
        }
    if (out.cells == 0)
        throw Error(ErrorKind::NonInvertiblePixel, "no grid cell could be evaluated");
    out.mean = sum / static_cast<double>(out.cells);
    return out;
}

} // namespace

GridError angular_error_grid(const CameraSpec &gt, const CameraSpec &est, int grid_stride) {
    require_same_size(gt, est);
    const Camera a(gt), b(est);
    return grid_mean(gt, grid_stride, [&](const Pixel &px) {
        try {
            return angle_deg(a.unproject(px), b.unproject(px));
        } catch (const Error &) {
            return std::numeric_limits<double>::quiet_NaN();
        }
    });
}

GridError reproj_error_grid(const CameraSpec &gt, const CameraSpec &est, int grid_stride) {
    require_same_size(gt, est);
    const Camera a(gt), b(est);
    return grid_mean(gt, grid_stride, [&](const Pixel &px) {
        try {
            return (b.project(a.unproject(px)) - px).norm();
        } catch (const Error &) {
            return std::numeric_limits<double>::quiet_NaN();
        }
    });
}

double angular_error(const CameraSpec &gt, const CameraSpec &est, int grid_stride) {
    return angular_error_grid(gt, est, grid_stride).mean;
}

double reproj_error(const CameraSpec &gt, const CameraSpec &est, int grid_stride) {
    return reproj_error_grid(gt, est, grid_stride).mean;
}

namespace {

template <typename Fn> std::vector<double> error_map(const CameraSpec &gt, const CameraSpec &est, int stride, Fn fn) {
    require_same_size(gt, est);
    if (stride < 1)
        throw Error(ErrorKind::InvalidArgument, "grid stride must be >= 1");
    const Camera a(gt), b(est);
    std::vector<double> out;
    for (int v = 0; v < gt.height; v += stride)
        for (int u = 0; u < gt.width; u += stride) {
            try {
                out.push_back(fn(a, b, Pixel(u + 0.5, v + 0.5)));
            } catch (const Error &) {
                out.push_back(std::numeric_limits<double>::quiet_NaN());
            }
        }
    return out;
}

} // namespace

std::vector<double> angular_error_map(const CameraSpec &gt, const CameraSpec &est, int grid_stride) {
    return error_map(gt, est, grid_stride, [](const Camera &a, const Camera &b, const Pixel &px) {
        return angle_deg(a.unproject(px), b.unproject(px));
    });
}

std::vector<double> reproj_error_map(const CameraSpec &gt, const CameraSpec &est, int grid_stride) {
    return error_map(gt, est, grid_stride, [](const Camera &a, const Camera &b, const Pixel &px) {
        return (b.project(a.unproject(px)) - px).norm();
    });
}

Fov fov_agnostic(const CameraSpec &spec) {
    const Camera cam(spec);
    auto polar = [&](double u, double v) {
        try {
            const Ray r = cam.unproject(Pixel(u, v));
            return std::atan2(r.head<2>().norm(), r.z()) * kDeg;
        } catch (const Error &e) {
            throw Error(ErrorKind::BorderUnprojectionFailed, e.what());
        }
    };
    Fov f;
    f.hfov = polar(0.0, spec.cy) + polar(spec.width, spec.cy);
    f.vfov = polar(spec.cx, 0.0) + polar(spec.cx, spec.height);
    return f;
}

std::vector<double> auc(const std::vector<double> &errors, const std::vector<double> &thresholds) {
    if (errors.empty())
        throw Error(ErrorKind::EmptyInput, "auc needs at least one error");
    for (double e : errors)
        if (!(e >= 0.0))
            throw Error(ErrorKind::InvalidArgument, "errors must be non-negative");
    constexpr int kSweep = 101;
    std::vector<double> out;
    for (double t : thresholds) {
        if (!(t > 0.0))
            throw Error(ErrorKind::InvalidArgument, "thresholds must be positive");
        double acc = 0.0;
        for (int k = 0; k < kSweep; ++k) {
            const double s = t * k / (kSweep - 1);
            size_t hits = 0;
            for (double e : errors)
                hits += e <= s;
            acc += static_cast<double>(hits) / static_cast<double>(errors.size());
        }
        out.push_back(100.0 * acc / kSweep);
    }
    return out;
}

EditedErrors edited_errors(const CameraSpec &gt, const CameraSpec &est) {
    require_same_size(gt, est);
    EditedErrors e;
    e.ef = std::max(std::abs((gt.fx - est.fx) / gt.fx), std::abs((gt.fy - est.fy) / gt.fy));
    e.ec = 2.0 * std::max(std::abs(gt.cx - est.cx) / gt.width, std::abs(gt.cy - est.cy) / gt.height);
    return e;
}

EvalReport evaluate(const CameraSpec &gt, const CameraSpec &est, int grid_stride) {
    EvalReport r;
    const auto ae = angular_error_grid(gt, est, grid_stride);
    const auto re = reproj_error_grid(gt, est, grid_stride);
    r.ae_mean = ae.mean;
    r.re_mean = re.mean;
    r.dropped_cells = std::max(ae.dropped, re.dropped);
    const Fov a = fov_agnostic(gt), b = fov_agnostic(est);
    r.hfov_err = std::abs(a.hfov - b.hfov);
    r.vfov_err = std::abs(a.vfov - b.vfov);
    const auto ed = edited_errors(gt, est);
    r.ef = ed.ef;
    r.ec = ed.ec;
    return r;
}

std::string eval_csv_header() { return "ae_mean,re_mean,hfov_err,vfov_err,ef,ec,dropped_cells"; }

std::string eval_csv_row(const EvalReport &r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%zu", r.ae_mean, r.re_mean, r.hfov_err,
                  r.vfov_err, r.ef, r.ec, r.dropped_cells);
    return buf;
}

} // namespace raycalib
