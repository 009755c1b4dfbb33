#include "raycalib/calibrator.hpp"

#include "least_squares.hpp"
#include "raycalib/error.hpp"

#include <cmath>

namespace raycalib {

namespace {

constexpr double kPlaneEps = 1e-9; // |X|, |Y| threshold for the principal-point rows
constexpr double kMinZ = 1e-6;     // pinhole / Brown-Conrady rows need a positive depth
constexpr double kMinBeta = 1e-6;

struct RowGeom {
    double X, Y, Z, R, Ra, rc, rca, theta, d;
};

RowGeom row_geom(const Pixel &px, const Ray &ray, double a, const Pixel &c) {
    RowGeom g{};
    g.X = ray.x();
    g.Y = ray.y();
    g.Z = ray.z();
    g.R = std::hypot(g.X, g.Y);
    g.Ra = std::hypot(g.X, a * g.Y);
    const double du = px.x() - c.x(), dv = px.y() - c.y();
    g.rc = std::hypot(du, dv);
    g.rca = std::hypot(du, dv / a);
    g.theta = std::atan2(g.R, g.Z);
    g.d = std::hypot(g.R, g.Z);
    return g;
}

[[noreturn]] void degenerate(const std::string &what) { throw Error(ErrorKind::DegenerateGeometry, what); }

detail::LsqSolution solve_or_throw(const Eigen::MatrixXd &A, const Eigen::VectorXd &b, const std::string &what) {
    const auto sol = detail::solve_lsq(A, b);
    if (!sol)
        degenerate(what + ": rank-deficient constraint system");
    return *sol;
}

CameraSpec make_spec(const ModelId &model, const Correspondences &corrs, double f, double a, const Pixel &c,
                     std::vector<double> dist) {
    if (!(f > 0.0) || !std::isfinite(f))
        throw Error(ErrorKind::InvalidFocal, "fitted focal length " + std::to_string(f) + " is not positive");
    CameraSpec s;
    s.model = model;
    s.fx = f;
    s.fy = a * f;
    s.cx = c.x();
    s.cy = c.y();
    s.dist = std::move(dist);
    s.width = corrs.width;
    s.height = corrs.height;
    return s;
}

// Stacks the per-family constraint rows. With `fixed_f` > 0 the focal term moves to the right-hand side
// and only the distortion unknowns remain.
void build_rows(const ModelId &model, const Correspondences &corrs, double a, const Pixel &c, double fixed_f,
                Eigen::MatrixXd *A, Eigen::VectorXd *b) {
    const bool fixed = fixed_f > 0.0;
    const int nd = model.num_dist;
    int cols = 0;
    switch (model.family) {
    case Family::Pinhole: cols = 1; break;
    case Family::BrownConrady:
    case Family::KannalaBrandt:
    case Family::Division: cols = fixed ? nd : nd + 1; break;
    case Family::UCM: cols = fixed ? 1 : 2; break;
    case Family::EUCM: throw Error(ErrorKind::UnsupportedFamily, "EUCM rows are built by fit_eucm");
    }
    const int off = fixed ? 0 : 1;
    std::vector<Eigen::VectorXd> rows;
    std::vector<double> rhs;
    rows.reserve(corrs.size());
    rhs.reserve(corrs.size());
    for (size_t i = 0; i < corrs.size(); ++i) {
        const RowGeom g = row_geom(corrs.pixels[i], corrs.rays[i], a, c);
        Eigen::VectorXd row = Eigen::VectorXd::Zero(cols);
        double y = 0.0;
        switch (model.family) {
        case Family::Pinhole:
            if (g.Z <= kMinZ)
                continue;
            row[0] = g.Ra;
            y = g.Z * g.rc;
            break;
        case Family::BrownConrady: {
            if (g.Z <= kMinZ)
                continue;
            const double t2 = (g.R / g.Z) * (g.R / g.Z);
            double tn = 1.0;
            for (int n = 0; n < nd; ++n) {
                tn *= t2;
                row[off + n] = -g.Ra * tn;
            }
            y = g.Ra;
            if (fixed)
                y -= g.rc * g.Z / fixed_f;
            else
                row[0] = g.rc * g.Z;
            break;
        }
        case Family::KannalaBrandt: {
            const double t2 = g.theta * g.theta;
            double tn = g.theta;
            for (int n = 0; n < nd; ++n) {
                tn *= t2;
                row[off + n] = -g.Ra * tn;
            }
            y = g.Ra * g.theta;
            if (fixed)
                y -= g.R * g.rc / fixed_f;
            else
                row[0] = g.R * g.rc;
            break;
        }
        case Family::UCM:
            row[off] = -g.rc * g.d;
            y = g.rc * g.Z;
            if (fixed)
                y -= g.Ra * fixed_f;
            else
                row[0] = g.Ra;
            break;
        case Family::Division: {
            const double q = g.rca * g.rca;
            double qn = 1.0;
            for (int n = 0; n < nd; ++n) {
                qn *= q;
                // With f fixed, k_n enters as k_n / f^{2n-1} and is solved for directly.
                row[off + n] = fixed ? g.Ra * qn / std::pow(fixed_f, 2.0 * (n + 1) - 1.0) : g.Ra * qn;
            }
            y = g.Z * g.rc;
            if (fixed)
                y -= g.Ra * fixed_f;
            else
                row[0] = g.Ra;
            break;
        }
        case Family::EUCM: break;
        }
        rows.push_back(std::move(row));
        rhs.push_back(y);
    }
    A->resize(static_cast<Eigen::Index>(rows.size()), cols);
    b->resize(static_cast<Eigen::Index>(rows.size()));
    for (size_t i = 0; i < rows.size(); ++i) {
        A->row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
        (*b)[static_cast<Eigen::Index>(i)] = rhs[i];
    }
}

void require_rows(const Eigen::MatrixXd &A, const std::string &what) {
    if (A.rows() < A.cols())
        degenerate(what + ": " + std::to_string(A.rows()) + " usable rows for " + std::to_string(A.cols()) +
                   " unknowns");
}

} // namespace

Correspondences correspondences_from_rays(const RayGrid &grid, int stride) {
    if (stride < 1)
        throw Error(ErrorKind::InvalidArgument, "stride must be >= 1");
    Correspondences c;
    c.width = grid.width * grid.stride;
    c.height = grid.height * grid.stride;
    for (int i = 0; i < grid.height; i += stride)
        for (int j = 0; j < grid.width; j += stride)
            c.add(grid.pixel(i, j), grid.at(i, j));
    return c;
}

Correspondences correspondences_from_spec(const CameraSpec &spec, int stride) {
    if (stride < 1)
        throw Error(ErrorKind::InvalidArgument, "stride must be >= 1");
    const Camera cam(spec);
    Correspondences c;
    c.width = spec.width;
    c.height = spec.height;
    for (int v = 0; v < spec.height; v += stride) {
        for (int u = 0; u < spec.width; u += stride) {
            const Pixel px(u + 0.5, v + 0.5);
            try {
                c.add(px, cam.unproject(px));
            } catch (const Error &) {
            }
        }
    }
    return c;
}

PpointAspect fit_ppoint_aspect(const Correspondences &corrs) {
    std::vector<Eigen::Index> keep;
    for (size_t i = 0; i < corrs.size(); ++i) {
        const Ray &r = corrs.rays[i];
        if (std::abs(r.x()) >= kPlaneEps || std::abs(r.y()) >= kPlaneEps)
            keep.push_back(static_cast<Eigen::Index>(i));
    }
    Eigen::MatrixXd A(keep.size(), 3);
    Eigen::VectorXd b(keep.size());
    for (size_t k = 0; k < keep.size(); ++k) {
        const Pixel &px = corrs.pixels[keep[k]];
        const Ray &r = corrs.rays[keep[k]];
        const auto row = static_cast<Eigen::Index>(k);
        A.row(row) << px.x() * r.y(), -r.y(), r.x();
        b[row] = px.y() * r.x();
    }
    require_rows(A, "principal point");
    const auto sol = solve_or_throw(A, b, "principal point");
    const double a = sol.x[0];
    if (!(a > 0.0))
        degenerate("principal point solve gave non-positive aspect " + std::to_string(a));
    return {a, sol.x[1] / a, sol.x[2], sol.rms_residual};
}

CameraSpec fit_linear(const ModelId &model, const Correspondences &corrs, double a, const Pixel &c,
                      std::vector<std::string> *active_bounds) {
    model.check();
    if (model.family == Family::EUCM)
        return fit_eucm(corrs, a, c, active_bounds);
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    build_rows(model, corrs, a, c, 0.0, &A, &b);
    const std::string what = model.to_string() + " linear fit";
    require_rows(A, what);
    const Eigen::VectorXd x = solve_or_throw(A, b, what).x;

    switch (model.family) {
    case Family::Pinhole: return make_spec(model, corrs, x[0], a, c, {});
    case Family::BrownConrady:
    case Family::KannalaBrandt: {
        if (!(x[0] > 0.0))
            throw Error(ErrorKind::InvalidFocal, what + " gave non-positive inverse focal");
        return make_spec(model, corrs, 1.0 / x[0], a, c, std::vector<double>(x.data() + 1, x.data() + x.size()));
    }
    case Family::UCM: {
        if (x[1] >= 0.0)
            return make_spec(model, corrs, x[0], a, c, {x[1]});
        if (active_bounds)
            active_bounds->push_back("ucm: xi >= 0");
        Eigen::MatrixXd A1 = A.leftCols(1);
        const auto f = solve_or_throw(A1, b, what).x[0];
        return make_spec(model, corrs, f, a, c, {0.0});
    }
    case Family::Division: {
        const double f = x[0];
        std::vector<double> k(static_cast<size_t>(model.num_dist));
        for (int n = 0; n < model.num_dist; ++n)
            k[n] = x[1 + n] * std::pow(f, 2.0 * (n + 1) - 1.0);
        return make_spec(model, corrs, f, a, c, std::move(k));
    }
    case Family::EUCM: break;
    }
    throw Error(ErrorKind::UnsupportedFamily, model.to_string());
}

CameraSpec fit_eucm(const Correspondences &corrs, double a, const Pixel &c, std::vector<std::string> *active_bounds,
                    const EucmFitOptions &opts) {
    double f = opts.fixed_focal;
    if (!(f > 0.0)) {
        const ModelId proxy{Family::KannalaBrandt, opts.proxy_kb_order};
        f = fit_linear(proxy, corrs, a, c).fx;
    }

    // Rows: r^2 R^2 gamma + 2 r Z (r Z - R) alpha = (R - r Z)^2, gamma = alpha^2 beta.
    const auto n = static_cast<Eigen::Index>(corrs.size());
    Eigen::MatrixXd A(n, 2);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Pixel &px = corrs.pixels[size_t(i)];
        const Ray &ray = corrs.rays[size_t(i)];
        const double mx = (px.x() - c.x()) / f, my = (px.y() - c.y()) / (a * f);
        const double r = std::hypot(mx, my);
        const double R = std::hypot(ray.x(), ray.y()), Z = ray.z();
        A(i, 0) = r * r * R * R;
        A(i, 1) = 2.0 * r * Z * (r * Z - R);
        b[i] = (R - r * Z) * (R - r * Z);
    }
    require_rows(A, "eucm fit");

    auto solve_single = [&](Eigen::Index col, double fixed_other) {
        const Eigen::Index other = 1 - col;
        const Eigen::VectorXd rhs = b - A.col(other) * fixed_other;
        const auto sol = detail::solve_lsq(A.col(col), rhs);
        if (!sol)
            throw Error(ErrorKind::BoundInfeasible, "eucm fit: clamped system is rank deficient");
        return sol->x[0];
    };
    auto note = [&](const char *what) {
        if (active_bounds)
            active_bounds->push_back(what);
    };

    const auto full = detail::solve_lsq(A, b);
    double gamma = 0.0, alpha = 0.0;
    if (full) {
        gamma = full->x[0];
        alpha = full->x[1];
    } else {
        // Rank deficiency here means the rays are pinhole-like (alpha unobservable); start from alpha = 0.
        alpha = -1.0;
    }

    if (alpha > 1.0) {
        note("eucm: alpha <= 1");
        alpha = 1.0;
        gamma = solve_single(0, alpha);
    }
    if (alpha < 0.0) {
        note("eucm: alpha >= 0");
        return make_spec(ModelId{Family::EUCM, 2}, corrs, f, a, c, {0.0, 1.0});
    }
    double beta = alpha > 0.0 ? gamma / (alpha * alpha) : 0.0;
    if (!(beta > 0.0)) {
        note("eucm: beta > 0");
        beta = kMinBeta;
        // gamma = alpha^2 beta is now a function of alpha; with beta tiny the gamma column is negligible.
        alpha = solve_single(1, 0.0);
        if (alpha > 1.0) {
            note("eucm: alpha <= 1");
            alpha = 1.0;
        } else if (alpha < 0.0) {
            note("eucm: alpha >= 0");
            return make_spec(ModelId{Family::EUCM, 2}, corrs, f, a, c, {0.0, 1.0});
        }
    }
    return make_spec(ModelId{Family::EUCM, 2}, corrs, f, a, c, {alpha, beta});
}

CameraSpec fit_distortion(const ModelId &model, const Correspondences &corrs, double f, double a, const Pixel &c,
                          std::vector<std::string> *active_bounds) {
    model.check();
    switch (model.family) {
    case Family::Pinhole: return make_spec(model, corrs, f, a, c, {});
    case Family::EUCM: {
        EucmFitOptions opts;
        opts.fixed_focal = f;
        return fit_eucm(corrs, a, c, active_bounds, opts);
    }
    default: break;
    }
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    build_rows(model, corrs, a, c, f, &A, &b);
    const std::string what = model.to_string() + " distortion fit";
    require_rows(A, what);
    Eigen::VectorXd x = solve_or_throw(A, b, what).x;
    if (model.family == Family::UCM && x[0] < 0.0) {
        if (active_bounds)
            active_bounds->push_back("ucm: xi >= 0");
        x[0] = 0.0;
    }
    return make_spec(model, corrs, f, a, c, std::vector<double>(x.data(), x.data() + x.size()));
}

CalibrationResult calibrate(const FovField &field, const ModelId &model, int stride) {
    const Correspondences corrs = correspondences_from_rays(rays_from_field(field), stride);
    const PpointAspect pa = fit_ppoint_aspect(corrs);
    std::vector<std::string> bounds;
    const CameraSpec algebraic = fit_linear(model, corrs, pa.a, Pixel(pa.cx, pa.cy), &bounds);
    CalibrationResult res = refine(algebraic, corrs);
    res.ppoint_residual = pa.residual;
    res.active_bounds.insert(res.active_bounds.begin(), bounds.begin(), bounds.end());
    return res;
}

CameraSpec convert_model(const CameraSpec &src, const ModelId &dst, bool fix_focal, int stride) {
    const Correspondences corrs = correspondences_from_spec(src, stride);
    if (fix_focal) {
        const CameraSpec algebraic = fit_distortion(dst, corrs, src.fx, src.aspect(), src.principal_point());
        RefineOptions opts;
        opts.fix_focal = true;
        return refine(algebraic, corrs, opts).spec;
    }
    const PpointAspect pa = fit_ppoint_aspect(corrs);
    const CameraSpec algebraic = fit_linear(dst, corrs, pa.a, Pixel(pa.cx, pa.cy));
    return refine(algebraic, corrs).spec;
}

} // namespace raycalib
