#include "raycalib/fov_field.hpp"

#include "raycalib/error.hpp"

#include <cmath>
#include <numbers>

namespace raycalib {

namespace {
constexpr double kSeriesCutover = 1e-6;
}

Theta log_map(const Ray &ray) {
    const double X = ray.x(), Y = ray.y(), Z = ray.z();
    const double R = std::hypot(X, Y);
    const double n = std::hypot(R, Z);
    if (Z / n <= -1.0 + 1e-12)
        throw Error(ErrorKind::AntipodalRay, "log map undefined at the antipode of the optical axis");
    const double theta = std::atan2(R, Z);
    // theta / sin(theta), with sin(theta) = R / n.
    const double scale = theta < kSeriesCutover ? (1.0 + theta * theta / 6.0) / n : theta / R;
    return {scale * X, scale * Y};
}

Ray exp_map(const Theta &t) {
    const double theta = t.norm();
    if (!(theta < std::numbers::pi))
        throw Error(ErrorKind::ThetaOutOfDomain, "tangent vector norm " + std::to_string(theta) + " >= pi");
    const double sinc = theta < kSeriesCutover ? 1.0 - theta * theta / 6.0 : std::sin(theta) / theta;
    return {sinc * t.x(), sinc * t.y(), std::cos(theta)};
}

Eigen::Matrix<double, 2, 3> log_map_jacobian(const Ray &ray) {
    const double X = ray.x(), Y = ray.y(), Z = ray.z();
    const double R = std::hypot(X, Y);
    const double n2 = R * R + Z * Z;
    const double theta = std::atan2(R, Z);
    double g, h;
    if (theta < 1e-4) {
        g = 1.0 + theta * theta / 6.0;
        h = -2.0 / 3.0 - theta * theta / 5.0;
    } else {
        g = theta / R;
        h = (Z / n2 - g) / (R * R);
    }
    Eigen::Matrix<double, 2, 3> J;
    J << g + X * X * h, X * Y * h, -X / n2, //
        X * Y * h, g + Y * Y * h, -Y / n2;
    return J;
}

FovField field_from_spec(const CameraSpec &spec, int stride) {
    if (stride < 1)
        throw Error(ErrorKind::InvalidArgument, "stride must be >= 1");
    const Camera cam(spec);
    const int w = (spec.width + stride - 1) / stride;
    const int h = (spec.height + stride - 1) / stride;
    FovField field(w, h, stride);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            field.at(i, j) = log_map(cam.unproject(field.pixel(i, j)));
    return field;
}

RayGrid rays_from_field(const FovField &field) {
    RayGrid grid;
    grid.width = field.width;
    grid.height = field.height;
    grid.stride = field.stride;
    grid.rays.reserve(field.size());
    for (const auto &t : field.theta)
        grid.rays.push_back(exp_map(t));
    return grid;
}

double field_l1(const FovField &a, const FovField &b) {
    if (a.width != b.width || a.height != b.height || a.size() != b.size())
        throw Error(ErrorKind::DimensionMismatch, "fields differ in size");
    if (a.size() == 0)
        return 0.0;
    double sum = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        sum += (a.theta[i] - b.theta[i]).lpNorm<1>();
    return sum / static_cast<double>(a.size());
}

} // namespace raycalib
