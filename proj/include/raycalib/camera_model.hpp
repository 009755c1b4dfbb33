#pragma once

#include <Eigen/Core>

#include <string>
#include <string_view>
#include <vector>

namespace raycalib {

using Ray = Eigen::Vector3d;   // unit direction [X, Y, Z]
using Pixel = Eigen::Vector2d; // continuous image coordinates [u, v]

enum class Family { Pinhole, BrownConrady, KannalaBrandt, UCM, EUCM, Division };

/// Camera-model family plus its number of distortion coefficients.
///
/// Textual form: `pinhole | radial:N | kb:N | ucm | eucm | division:N`.
struct ModelId {
    Family family = Family::Pinhole;
    int num_dist = 0;

    static ModelId parse(std::string_view text);
    std::string to_string() const;

    /// Throws InvalidArgument if num_dist is outside the per-family range.
    void check() const;

    /// Unknowns of the closed-form stage once (a, c) are fixed.
    int num_linear_unknowns() const;

    friend bool operator==(const ModelId &, const ModelId &) = default;
};

/// Intrinsics of one camera. `dist` holds k_1..k_N (BC, KB, Division), [xi] (UCM) or
/// [alpha, beta] (EUCM).
struct CameraSpec {
    ModelId model;
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    std::vector<double> dist;
    int width = 0;
    int height = 0;

    double aspect() const { return fy / fx; }
    Pixel principal_point() const { return {cx, cy}; }

    friend bool operator==(const CameraSpec &, const CameraSpec &) = default;
};

// Parameter vector used by the refinement: [f, a, cx, cy, dist...].
Eigen::VectorXd spec_to_params(const CameraSpec &spec);
CameraSpec spec_from_params(const CameraSpec &like, const Eigen::VectorXd &params);

/// A camera with its injective domain resolved once.
///
/// The domain is the first monotone branch of the radial profile: polar angles
/// [0, theta_limit) map one-to-one onto normalized radii [0, radius_limit).
class Camera {
public:
    explicit Camera(CameraSpec spec);

    const CameraSpec &spec() const { return spec_; }

    Pixel project(const Ray &ray) const;
    Ray unproject(const Pixel &px) const;

    /// Unprojection together with d(ray)/d[f, a, cx, cy, dist...] (3 x (4 + n)).
    Ray unproject(const Pixel &px, Eigen::MatrixXd *jac_params) const;

    /// Normalized radius r(theta) = R * phi(R, Z) on the unit sphere.
    double radius_at(double theta) const;
    /// Inverse of radius_at on the injective branch.
    double theta_at(double radius) const;

    double theta_limit() const { return theta_limit_; }
    double radius_limit() const { return radius_limit_; }

    /// Largest normalized radius reached by the image corners.
    double corner_radius() const;

private:
    double solve_radius_newton(double theta) const;
    double solve_theta_newton(double radius) const;

    CameraSpec spec_;
    double theta_limit_ = 0.0;
    double radius_limit_ = 0.0;
};

Pixel project(const CameraSpec &spec, const Ray &ray);
Ray unproject(const CameraSpec &spec, const Pixel &px);

/// Smallest focal length keeping the model injective over the image.
/// Returns 0 when no bound applies (k >= 0 for BC, alpha <= 0.5 for EUCM, and for the
/// pinhole, KB, UCM and division families).
double min_focal(const ModelId &model, const std::vector<double> &dist, int width, int height);

struct ValidityReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

ValidityReport validate_spec(const CameraSpec &spec);

} // namespace raycalib
