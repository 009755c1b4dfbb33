#include "raycalib/synth.hpp"
#include "raycalib/error.hpp"
#include "raycalib/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

namespace raycalib {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kMaxRetries = 100;

// Extended ranges for models outside the four generator datasets.
constexpr double kNarrowFov[2] = {20.0, 105.0};
constexpr double kWideFov[2] = {50.0, 180.0};
constexpr double kDivisionFov[2] = {50.0, 150.0};

} // namespace

DatasetKind parse_dataset_kind(const std::string &s) {
    std::string l(s);
    std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
    if (l == "opp")
        return DatasetKind::OPp;
    if (l == "opr")
        return DatasetKind::OPr;
    if (l == "opd")
        return DatasetKind::OPd;
    if (l == "opg")
        return DatasetKind::OPg;
    throw Error(ErrorKind::InvalidArgument, "unknown dataset kind '" + s + "' (expected opp, opr, opd or opg)");
}

std::string to_string(DatasetKind kind) {
    switch (kind) {
    case DatasetKind::OPp: return "opp";
    case DatasetKind::OPr: return "opr";
    case DatasetKind::OPd: return "opd";
    case DatasetKind::OPg: return "opg";
    }
    return "";
}

double focal_from_fov(const ModelId &model, const std::vector<double> &dist, double fov_deg, int height) {
    if (!(fov_deg > 0.0) || !(height > 0))
        throw Error(ErrorKind::FovOutOfRange, "fov and height must be positive");
    CameraSpec unit;
    unit.model = model;
    unit.dist = dist;
    model.check();
    if (static_cast<int>(dist.size()) != model.num_dist)
        throw Error(ErrorKind::InvalidArgument, "coefficient count does not match " + model.to_string());
    const double theta = 0.5 * fov_deg * kPi / 180.0;
    try {
        const Camera cam(unit);
        if (!(theta < cam.theta_limit()))
            throw Error(ErrorKind::FovOutOfRange, "fov " + std::to_string(fov_deg) + " exceeds the range of " +
                                                      model.to_string());
        const double r = cam.radius_at(theta);
        if (!(r > 0.0) || !std::isfinite(r))
            throw Error(ErrorKind::FovOutOfRange, "fov " + std::to_string(fov_deg) + " has no finite radius");
        return 0.5 * height / r;
    } catch (const Error &e) {
        if (e.kind() == ErrorKind::FovOutOfRange)
            throw;
        throw Error(ErrorKind::FovOutOfRange, e.what());
    }
}

IntrinsicsSampler::IntrinsicsSampler(const SamplerConfig &cfg) : cfg_(cfg), rng_(cfg.seed) {
    if (cfg.size <= 0)
        throw Error(ErrorKind::InvalidArgument, "image size must be positive");
}

double IntrinsicsSampler::uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

double IntrinsicsSampler::truncated_normal(double sigma, double bound) {
    std::normal_distribution<double> n(0.0, sigma);
    for (;;) {
        const double v = n(rng_);
        if (std::abs(v) <= bound)
            return v;
    }
}

bool IntrinsicsSampler::finish(CameraSpec &spec, double fov_lo, double fov_hi, double fov_deg, double focal) {
    const int h = cfg_.size;
    spec.width = spec.height = h;
    spec.cx = spec.cy = 0.5 * h;
    double f = focal;
    if (!(f > 0.0)) {
        try {
            f = focal_from_fov(spec.model, spec.dist, fov_deg, h);
        } catch (const Error &) {
            return false;
        }
    }
    const double fmin = min_focal(spec.model, spec.dist, h, h);
    if (fmin > 0.0)
        f = std::max(f, fmin * (1.0 + 1e-6));
    spec.fx = spec.fy = f;
    if (!validate_spec(spec).ok())
        return false;
    try {
        const Fov fov = fov_agnostic(spec);
        const double corner = Camera(spec).theta_at(Camera(spec).corner_radius());
        return fov.vfov >= fov_lo - 1e-9 && fov.vfov <= fov_hi + 1e-9 && corner < 0.99 * kPi;
    } catch (const Error &) {
        return false;
    }
}

CameraSpec IntrinsicsSampler::draw_pinhole() {
    for (int t = 0; t < kMaxRetries; ++t) {
        CameraSpec s;
        s.model = ModelId::parse("pinhole");
        if (finish(s, kNarrowFov[0], kNarrowFov[1], uniform(kNarrowFov[0], kNarrowFov[1])))
            return s;
    }
    throw Error(ErrorKind::FovOutOfRange, "pinhole sampler exhausted its retries");
}

CameraSpec IntrinsicsSampler::draw_radial(int n) {
    for (int t = 0; t < kMaxRetries; ++t) {
        CameraSpec s;
        s.model = ModelId{Family::BrownConrady, n};
        const double fov = uniform(kNarrowFov[0], kNarrowFov[1]);
        std::vector<double> khat(static_cast<size_t>(n));
        for (auto &k : khat)
            k = truncated_normal(0.07, 0.3);
        // k_n = khat_n * (f / H)^(2n - 1), resolved jointly with f by fixed-point iteration.
        const double h = cfg_.size;
        s.dist.assign(static_cast<size_t>(n), 0.0);
        double f = 0.0;
        bool converged = false;
        try {
            for (int round = 0; round < 20 && !converged; ++round) {
                const double fn = focal_from_fov(s.model, s.dist, fov, cfg_.size);
                converged = f > 0.0 && std::abs(fn - f) < 1e-10 * fn;
                f = fn;
                for (int i = 0; i < n; ++i)
                    s.dist[size_t(i)] = khat[size_t(i)] * std::pow(f / h, 2 * i + 1);
            }
        } catch (const Error &) {
            continue;
        }
        if (!converged)
            continue;
        if (finish(s, kNarrowFov[0], kNarrowFov[1], fov, f))
            return s;
    }
    throw Error(ErrorKind::FovOutOfRange, "radial sampler exhausted its retries");
}

CameraSpec IntrinsicsSampler::draw_kb(int n) {
    for (int t = 0; t < kMaxRetries; ++t) {
        CameraSpec s;
        s.model = ModelId{Family::KannalaBrandt, n};
        for (int i = 0; i < n; ++i)
            s.dist.push_back(uniform(-0.05, 0.05) * std::pow(0.25, i));
        if (finish(s, kWideFov[0], kWideFov[1], uniform(kWideFov[0], kWideFov[1])))
            return s;
    }
    throw Error(ErrorKind::FovOutOfRange, "kb sampler exhausted its retries");
}

CameraSpec IntrinsicsSampler::draw_ucm() {
    for (int t = 0; t < kMaxRetries; ++t) {
        CameraSpec s;
        s.model = ModelId{Family::UCM, 1};
        s.dist = {uniform(0.0, 1.5)};
        if (finish(s, kWideFov[0], kWideFov[1], uniform(kWideFov[0], kWideFov[1])))
            return s;
    }
    throw Error(ErrorKind::FovOutOfRange, "ucm sampler exhausted its retries");
}

CameraSpec IntrinsicsSampler::draw_eucm() {
    for (int t = 0; t < kMaxRetries; ++t) {
        CameraSpec s;
        s.model = ModelId{Family::EUCM, 2};
        const double fov = uniform(kWideFov[0], kWideFov[1]);
        s.dist = {uniform(0.5, 0.8), uniform(0.5, 2.0)};
        if (finish(s, kWideFov[0], kWideFov[1], fov))
            return s;
    }
    throw Error(ErrorKind::FovOutOfRange, "eucm sampler exhausted its retries");
}

CameraSpec IntrinsicsSampler::draw_division(int n) {
    for (int t = 0; t < kMaxRetries; ++t) {
        CameraSpec s;
        s.model = ModelId{Family::Division, n};
        for (int i = 0; i < n; ++i)
            s.dist.push_back(uniform(-0.2, 0.05) * std::pow(0.25, i));
        if (finish(s, kDivisionFov[0], kDivisionFov[1], uniform(kDivisionFov[0], kDivisionFov[1])))
            return s;
    }
    throw Error(ErrorKind::FovOutOfRange, "division sampler exhausted its retries");
}

CameraSpec IntrinsicsSampler::next() {
    const double u = uniform(0.0, 1.0);
    switch (cfg_.kind) {
    case DatasetKind::OPp: return draw_pinhole();
    case DatasetKind::OPr: return draw_radial(1);
    case DatasetKind::OPd: return u < 0.5 ? draw_radial(1) : draw_eucm();
    case DatasetKind::OPg: return u < 0.34 ? draw_pinhole() : u < 0.67 ? draw_radial(1) : draw_eucm();
    }
    return draw_pinhole();
}

CameraSpec IntrinsicsSampler::next(const ModelId &model) {
    model.check();
    switch (model.family) {
    case Family::Pinhole: return draw_pinhole();
    case Family::BrownConrady: return draw_radial(model.num_dist);
    case Family::KannalaBrandt: return draw_kb(model.num_dist);
    case Family::UCM: return draw_ucm();
    case Family::EUCM: return draw_eucm();
    case Family::Division: return draw_division(model.num_dist);
    }
    return draw_pinhole();
}

CameraSpec sample_intrinsics(const SamplerConfig &cfg) { return IntrinsicsSampler(cfg).next(); }

FovField add_noise(const FovField &field, double sigma_deg, uint64_t seed) {
    if (!(sigma_deg >= 0.0))
        throw Error(ErrorKind::InvalidArgument, "sigma must be non-negative");
    FovField out = field;
    if (sigma_deg == 0.0)
        return out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, sigma_deg * kPi / 180.0);
    for (auto &t : out.theta) {
        Theta candidate;
        do {
            const double dx = n(rng);
            const double dy = n(rng);
            candidate = t + Theta(dx, dy);
        } while (!(candidate.norm() < kPi));
        t = candidate;
    }
    return out;
}

ImageEdit sample_edit(const CameraSpec &spec, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double aspect = 0.5 + 1.5 * u01(rng);
    ImageEdit e;
    if (aspect >= 1.0)
        e.sv = aspect;
    else
        e.su = 1.0 / aspect;
    const int w = std::max(1, static_cast<int>(std::lround(e.su * spec.width)));
    const int h = std::max(1, static_cast<int>(std::lround(e.sv * spec.height)));
    e.width = std::max(1, static_cast<int>(std::lround((0.5 + 0.5 * u01(rng)) * w)));
    e.height = std::max(1, static_cast<int>(std::lround((0.5 + 0.5 * u01(rng)) * h)));
    e.off_u = std::floor(u01(rng) * (w - e.width + 1));
    e.off_v = std::floor(u01(rng) * (h - e.height + 1));
    return e;
}

CameraSpec apply_edit(const CameraSpec &spec, const ImageEdit &e) {
    CameraSpec out = spec;
    out.fx = e.su * spec.fx;
    out.fy = e.sv * spec.fy;
    out.cx = e.su * spec.cx - e.off_u;
    out.cy = e.sv * spec.cy - e.off_v;
    out.width = e.width;
    out.height = e.height;
    return out;
}

} // namespace raycalib
