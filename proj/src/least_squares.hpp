#pragma once

#include <Eigen/Dense>

#include <optional>

namespace raycalib::detail {

struct LsqSolution {
    Eigen::VectorXd x;
    double rms_residual = 0.0;
};

// Column-equilibrated QR least squares. Returns nullopt when the scaled system is rank deficient,
// i.e. the smallest pivot of R falls below rel_tol times the largest (normal matrix at rel_tol^2).
inline std::optional<LsqSolution> solve_lsq(const Eigen::MatrixXd &A, const Eigen::VectorXd &b,
                                            double rel_tol = 1e-6) {
    if (A.rows() < A.cols() || A.cols() == 0)
        return std::nullopt;
    Eigen::VectorXd scale = A.colwise().norm().transpose();
    for (Eigen::Index c = 0; c < scale.size(); ++c) {
        if (!(scale[c] > 0.0) || !std::isfinite(scale[c]))
            return std::nullopt;
        scale[c] = 1.0 / scale[c];
    }
    const Eigen::MatrixXd As = A * scale.asDiagonal();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(As);
    const auto diag = qr.matrixQR().diagonal().cwiseAbs();
    if (!(diag.minCoeff() > rel_tol * diag.maxCoeff()))
        return std::nullopt;
    LsqSolution sol;
    sol.x = scale.asDiagonal() * qr.solve(b);
    if (!sol.x.allFinite())
        return std::nullopt;
    sol.rms_residual = std::sqrt((A * sol.x - b).squaredNorm() / static_cast<double>(A.rows()));
    return sol;
}

} // namespace raycalib::detail
