#pragma once

#include "raycalib/camera_model.hpp"
#include "raycalib/fov_field.hpp"

#include <cstdint>
#include <random>
#include <string>

namespace raycalib {

enum class DatasetKind { OPp, OPr, OPd, OPg };

DatasetKind parse_dataset_kind(const std::string &s);
std::string to_string(DatasetKind kind);

struct SamplerConfig {
    DatasetKind kind = DatasetKind::OPg;
    int size = 64; // square images
    uint64_t seed = 0;
};

/// Focal length that puts the vertical half-extent H/2 at polar angle fov/2.
double focal_from_fov(const ModelId &model, const std::vector<double> &dist, double fov_deg, int height);

/// Draws centered square specs; the sequence is a pure function of the config.
class IntrinsicsSampler {
public:
    explicit IntrinsicsSampler(const SamplerConfig &cfg);

    CameraSpec next();
    /// Draws a spec of the given model from the extended per-model ranges.
    CameraSpec next(const ModelId &model);

private:
    CameraSpec draw_pinhole();
    CameraSpec draw_radial(int n);
    CameraSpec draw_kb(int n);
    CameraSpec draw_ucm();
    CameraSpec draw_eucm();
    CameraSpec draw_division(int n);
    double truncated_normal(double sigma, double bound);
    double uniform(double lo, double hi);
    // Finalizes a draw: computes f from the FoV unless given, applies the clamp and checks the result.
    bool finish(CameraSpec &spec, double fov_lo, double fov_hi, double fov_deg, double focal = 0.0);

    SamplerConfig cfg_;
    std::mt19937_64 rng_;
};

CameraSpec sample_intrinsics(const SamplerConfig &cfg);

/// Gaussian noise of `sigma_deg` on each theta component; cells pushed to |theta| >= pi are redrawn.
FovField add_noise(const FovField &field, double sigma_deg, uint64_t seed);

/// Anisotropic resize followed by a crop, in pixel coordinates: u' = su * u - off_u.
struct ImageEdit {
    double su = 1.0;
    double sv = 1.0;
    double off_u = 0.0;
    double off_v = 0.0;
    int width = 0;
    int height = 0;
};

/// Pixel aspect in [0.5, 2] by stretching one axis, then a crop of at most half of each side.
ImageEdit sample_edit(const CameraSpec &spec, std::mt19937_64 &rng);
CameraSpec apply_edit(const CameraSpec &spec, const ImageEdit &edit);

} // namespace raycalib
