#include "least_squares.hpp"
#include "raycalib/calibrator.hpp"
#include "raycalib/error.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <limits>
#include <optional>

namespace raycalib {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Rotation whose rows are an orthonormal tangent basis at `p` followed by `p` itself.
Eigen::Matrix3d tangent_frame(const Ray &p) {
    const Eigen::Vector3d axis = std::abs(p.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
    const Eigen::Vector3d e1 = (axis - axis.dot(p) * p).normalized();
    const Eigen::Vector3d e2 = p.cross(e1);
    Eigen::Matrix3d B;
    B.row(0) = e1.transpose();
    B.row(1) = e2.transpose();
    B.row(2) = p.transpose();
    return B;
}

struct Problem {
    std::vector<Pixel> pixels;
    std::vector<Eigen::Matrix3d> frames;
};

// Clamps bounded parameters into the interior; nullopt when the vector cannot describe a camera.
std::optional<CameraSpec> to_spec(const CameraSpec &like, Eigen::VectorXd p) {
    if (!(p[0] > 0.0) || !(p[1] > 0.0) || !p.allFinite())
        return std::nullopt;
    if (like.model.family == Family::UCM)
        p[4] = std::max(p[4], 0.0);
    if (like.model.family == Family::EUCM) {
        p[4] = std::clamp(p[4], 1e-6, 1.0 - 1e-6);
        p[5] = std::max(p[5], 1e-6);
    }
    return spec_from_params(like, p);
}

double cost_of(const CameraSpec &spec, const Problem &prob) {
    try {
        const Camera cam(spec);
        double sum = 0.0;
        for (size_t i = 0; i < prob.pixels.size(); ++i) {
            const Ray q = cam.unproject(prob.pixels[i]);
            sum += log_map(prob.frames[i] * q).squaredNorm();
        }
        return prob.pixels.empty() ? 0.0 : sum / static_cast<double>(prob.pixels.size());
    } catch (const Error &) {
        return kInf;
    }
}

} // namespace

double refinement_cost(const CameraSpec &spec, const Correspondences &corrs) {
    Problem prob;
    for (size_t i = 0; i < corrs.size(); ++i) {
        prob.pixels.push_back(corrs.pixels[i]);
        prob.frames.push_back(tangent_frame(corrs.rays[i]));
    }
    return cost_of(spec, prob);
}

CalibrationResult refine(const CameraSpec &spec0, const Correspondences &corrs, const RefineOptions &opts) {
    CalibrationResult res;
    res.algebraic_spec = spec0;
    res.spec = spec0;
    res.num_correspondences = corrs.size();

    const Camera cam0(spec0);
    Problem prob;
    for (size_t i = 0; i < corrs.size(); ++i) {
        try {
            const Eigen::Matrix3d B = tangent_frame(corrs.rays[i]);
            log_map(B * cam0.unproject(corrs.pixels[i]));
            prob.pixels.push_back(corrs.pixels[i]);
            prob.frames.push_back(B);
        } catch (const Error &) {
            ++res.dropped_rows;
        }
    }
    if (res.dropped_rows > 0)
        res.warnings.push_back("dropped " + std::to_string(res.dropped_rows) + " rows outside the initial model domain");

    Eigen::VectorXd p = spec_to_params(spec0);
    const Eigen::Index first_free = opts.fix_focal ? 4 : 0;
    const Eigen::Index nfree = p.size() - first_free;
    double cost = cost_of(spec0, prob);
    res.gn_costs.push_back(cost);

    const auto rows = static_cast<Eigen::Index>(prob.pixels.size());
    auto finish = [&](const CameraSpec &s) {
        while (static_cast<int>(res.gn_costs.size()) < opts.iterations + 1)
            res.gn_costs.push_back(res.gn_costs.back());
        res.spec = s;
        const auto report = validate_spec(s);
        for (const auto &v : report.violations)
            res.warnings.push_back("refined spec: " + v);
        return res;
    };
    if (nfree == 0 || rows == 0)
        return finish(spec0);

    CameraSpec current = spec0;
    for (int it = 0; it < opts.iterations; ++it) {
        const Camera cam(current);
        Eigen::MatrixXd J(2 * rows, nfree);
        Eigen::VectorXd r(2 * rows);
        Eigen::MatrixXd jray;
        bool ok = true;
        for (Eigen::Index i = 0; i < rows && ok; ++i) {
            try {
                const Ray q = cam.unproject(prob.pixels[size_t(i)], &jray);
                const Eigen::Matrix3d &B = prob.frames[size_t(i)];
                const Ray local = B * q;
                r.segment<2>(2 * i) = log_map(local);
                J.middleRows<2>(2 * i) = log_map_jacobian(local) * B * jray.rightCols(nfree);
            } catch (const Error &) {
                ok = false;
            }
        }
        const auto step = ok ? detail::solve_lsq(J, -r, 1e-10) : std::nullopt;
        if (!step) {
            res.warnings.push_back(std::string(error_kind_name(ErrorKind::SingularNormalMatrix)) +
                                   ": Gauss-Newton system is singular; keeping the algebraic estimate");
            res.gn_costs.resize(1);
            return finish(spec0);
        }
        double t = 1.0;
        for (int h = 0; h <= opts.max_halvings; ++h, t *= 0.5) {
            Eigen::VectorXd trial = p;
            trial.tail(nfree) += t * step->x;
            const auto spec = to_spec(spec0, trial);
            if (!spec)
                continue;
            const double c = cost_of(*spec, prob);
            if (c <= cost) {
                cost = c;
                current = *spec;
                p = spec_to_params(current);
                break;
            }
        }
        res.gn_costs.push_back(cost);
    }
    return finish(current);
}

} // namespace raycalib
