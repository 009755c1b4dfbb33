#pragma once

#include "raycalib/camera_model.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <vector>

namespace raycalib {

using Theta = Eigen::Vector2d;

/// Tangent-plane field sampled on a pixel grid. Cell (i, j) sits at the pixel center
/// (j * stride + 0.5, i * stride + 0.5); `width` and `height` count cells, row-major.
struct FovField {
    int width = 0;
    int height = 0;
    int stride = 1;
    std::vector<Theta> theta;

    FovField() = default;
    FovField(int w, int h, int s = 1) : width(w), height(h), stride(s), theta(size_t(w) * size_t(h), Theta::Zero()) {}

    Theta &at(int i, int j) { return theta[size_t(i) * size_t(width) + size_t(j)]; }
    const Theta &at(int i, int j) const { return theta[size_t(i) * size_t(width) + size_t(j)]; }
    Pixel pixel(int i, int j) const { return {j * stride + 0.5, i * stride + 0.5}; }
    size_t size() const { return theta.size(); }
};

struct RayGrid {
    int width = 0;
    int height = 0;
    int stride = 1;
    std::vector<Ray> rays;

    const Ray &at(int i, int j) const { return rays[size_t(i) * size_t(width) + size_t(j)]; }
    Pixel pixel(int i, int j) const { return {j * stride + 0.5, i * stride + 0.5}; }
};

/// Tangent-plane coordinates at the optical axis. Norm equals the polar angle.
Theta log_map(const Ray &ray);
Ray exp_map(const Theta &theta);

/// d log_map / d ray (2 x 3), evaluated at a unit ray.
Eigen::Matrix<double, 2, 3> log_map_jacobian(const Ray &ray);

FovField field_from_spec(const CameraSpec &spec, int stride = 1);
RayGrid rays_from_field(const FovField &field);
double field_l1(const FovField &a, const FovField &b);

// AFF1 binary and CSV interchange.
void write_aff1(const FovField &field, const std::filesystem::path &path);
FovField read_aff1(const std::filesystem::path &path);
void write_field_csv(const FovField &field, const std::filesystem::path &path);
FovField read_field_csv(const std::filesystem::path &path);
/// Dispatches on the first bytes of the file: AFF1 magic or CSV text.
FovField read_field(const std::filesystem::path &path);

} // namespace raycalib
