#include "raycalib/calibrator.hpp"
#include "raycalib/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <random>

namespace raycalib {

int minimal_sample_size(const ModelId &model) {
    model.check();
    // EUCM needs the kb:3 focal proxy first, which has four unknowns.
    const int unknowns = model.family == Family::EUCM ? 4 : model.num_linear_unknowns();
    return std::max(3, unknowns);
}

namespace {

Correspondences subset(const Correspondences &all, const std::vector<size_t> &idx) {
    Correspondences c;
    c.width = all.width;
    c.height = all.height;
    for (size_t i : idx)
        c.add(all.pixels[i], all.rays[i]);
    return c;
}

// Indices of rows whose angular residual under `spec` is below the threshold.
std::vector<size_t> inliers_of(const CameraSpec &spec, const Correspondences &corrs, double thresh) {
    std::vector<size_t> in;
    const Camera cam(spec);
    for (size_t i = 0; i < corrs.size(); ++i) {
        try {
            const Ray q = cam.unproject(corrs.pixels[i]);
            const double ang = std::atan2(q.cross(corrs.rays[i]).norm(), q.dot(corrs.rays[i]));
            if (ang < thresh)
                in.push_back(i);
        } catch (const Error &) {
        }
    }
    return in;
}

} // namespace

CalibrationResult calibrate_ransac(const FovField &field, const ModelId &model, const RansacOptions &opts,
                                   int stride) {
    const Correspondences corrs = correspondences_from_rays(rays_from_field(field), stride);
    const bool needs_depth = model.family == Family::Pinhole || model.family == Family::BrownConrady;
    std::vector<size_t> eligible;
    for (size_t i = 0; i < corrs.size(); ++i) {
        const Ray &r = corrs.rays[i];
        if (std::abs(r.x()) < 1e-9 && std::abs(r.y()) < 1e-9)
            continue;
        if (needs_depth && r.z() <= 1e-6)
            continue;
        eligible.push_back(i);
    }
    const int m = minimal_sample_size(model);
    if (eligible.size() < size_t(m))
        throw Error(ErrorKind::DegenerateGeometry, "not enough correspondences for a minimal sample");

    std::mt19937_64 rng(opts.seed);
    std::vector<size_t> best;
    std::vector<size_t> sample(static_cast<size_t>(m));
    for (int it = 0; it < opts.iterations; ++it) {
        // Partial Fisher-Yates over the eligible rows.
        for (int k = 0; k < m; ++k) {
            std::uniform_int_distribution<size_t> pick(size_t(k), eligible.size() - 1);
            std::swap(eligible[size_t(k)], eligible[pick(rng)]);
            sample[size_t(k)] = eligible[size_t(k)];
        }
        try {
            const Correspondences s = subset(corrs, sample);
            const PpointAspect pa = fit_ppoint_aspect(s);
            const CameraSpec hyp = fit_linear(model, s, pa.a, Pixel(pa.cx, pa.cy));
            auto in = inliers_of(hyp, corrs, opts.threshold);
            if (in.size() > best.size())
                best = std::move(in);
        } catch (const Error &) {
            continue;
        }
        if (best.size() == corrs.size())
            break;
    }

    const double ratio = corrs.size() ? static_cast<double>(best.size()) / static_cast<double>(corrs.size()) : 0.0;
    if (ratio < 0.1)
        throw Error(ErrorKind::NoConsensus, "best hypothesis explains " + std::to_string(100.0 * ratio) +
                                                "% of the correspondences");
    const Correspondences in = subset(corrs, best);
    const PpointAspect pa = fit_ppoint_aspect(in);
    std::vector<std::string> bounds;
    const CameraSpec algebraic = fit_linear(model, in, pa.a, Pixel(pa.cx, pa.cy), &bounds);
    CalibrationResult res = refine(algebraic, in);
    res.ppoint_residual = pa.residual;
    res.active_bounds.insert(res.active_bounds.begin(), bounds.begin(), bounds.end());
    res.inlier_ratio = ratio;
    return res;
}

} // namespace raycalib
