#include "raycalib/camera_model.hpp"

#include "numeric.hpp"
#include "raycalib/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

namespace raycalib {

namespace {

using detail::kInf;
constexpr double kPi = std::numbers::pi;

// x * (1 + sum k_n x^{2n}) and its derivative.
void odd_poly(double x, const std::vector<double> &k, double *val, double *deriv) {
    const double x2 = x * x;
    double p = 1.0, dp = 1.0, xn = 1.0;
    for (size_t n = 0; n < k.size(); ++n) {
        xn *= x2;
        p += k[n] * xn;
        dp += (2.0 * static_cast<double>(n + 1) + 1.0) * k[n] * xn;
    }
    if (val)
        *val = x * p;
    if (deriv)
        *deriv = dp;
}

// psi(r) = 1 + sum k_n r^{2n} and d psi / dr.
void division_psi(double r, const std::vector<double> &k, double *val, double *deriv) {
    const double r2 = r * r;
    double p = 1.0, dp = 0.0, rn = 1.0;
    for (size_t n = 0; n < k.size(); ++n) {
        const double e = 2.0 * static_cast<double>(n + 1);
        dp += e * k[n] * rn * r; // r^{2n-1}
        rn *= r2;
        p += k[n] * rn;
    }
    if (val)
        *val = p;
    if (deriv)
        *deriv = dp;
}

int parse_count(std::string_view text, std::string_view full) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw Error(ErrorKind::InvalidArgument, "bad coefficient count in model '" + std::string(full) + "'");
    return value;
}

double eucm_denominator(double alpha, double beta, double s, double c) {
    return alpha * std::sqrt(beta * s * s + c * c) + (1.0 - alpha) * c;
}

} // namespace

ModelId ModelId::parse(std::string_view text) {
    ModelId id;
    const auto colon = text.find(':');
    const std::string_view name = text.substr(0, colon);
    const bool has_count = colon != std::string_view::npos;
    if (name == "pinhole" || name == "ucm" || name == "eucm") {
        if (has_count)
            throw Error(ErrorKind::InvalidArgument, "model '" + std::string(text) + "' takes no count");
        id.family = name == "pinhole" ? Family::Pinhole : name == "ucm" ? Family::UCM : Family::EUCM;
        id.num_dist = name == "pinhole" ? 0 : name == "ucm" ? 1 : 2;
    } else if (name == "radial" || name == "kb" || name == "division") {
        if (!has_count)
            throw Error(ErrorKind::InvalidArgument, "model '" + std::string(text) + "' needs ':N'");
        id.family = name == "radial" ? Family::BrownConrady
                    : name == "kb"   ? Family::KannalaBrandt
                                     : Family::Division;
        id.num_dist = parse_count(text.substr(colon + 1), text);
    } else {
        throw Error(ErrorKind::InvalidArgument, "unknown camera model '" + std::string(text) + "'");
    }
    id.check();
    return id;
}

std::string ModelId::to_string() const {
    switch (family) {
    case Family::Pinhole: return "pinhole";
    case Family::BrownConrady: return "radial:" + std::to_string(num_dist);
    case Family::KannalaBrandt: return "kb:" + std::to_string(num_dist);
    case Family::UCM: return "ucm";
    case Family::EUCM: return "eucm";
    case Family::Division: return "division:" + std::to_string(num_dist);
    }
    return "?";
}

void ModelId::check() const {
    bool ok = false;
    switch (family) {
    case Family::Pinhole: ok = num_dist == 0; break;
    case Family::BrownConrady:
    case Family::KannalaBrandt: ok = num_dist >= 1 && num_dist <= 4; break;
    case Family::UCM: ok = num_dist == 1; break;
    case Family::EUCM: ok = num_dist == 2; break;
    case Family::Division: ok = num_dist >= 1 && num_dist <= 3; break;
    }
    if (!ok)
        throw Error(ErrorKind::InvalidArgument,
                    "invalid coefficient count " + std::to_string(num_dist) + " for " + to_string());
}

int ModelId::num_linear_unknowns() const {
    switch (family) {
    case Family::Pinhole: return 1;
    case Family::UCM: return 2;
    case Family::EUCM: return 2;
    default: return 1 + num_dist;
    }
}

Eigen::VectorXd spec_to_params(const CameraSpec &spec) {
    Eigen::VectorXd p(4 + spec.dist.size());
    p << spec.fx, spec.aspect(), spec.cx, spec.cy,
        Eigen::Map<const Eigen::VectorXd>(spec.dist.data(), static_cast<Eigen::Index>(spec.dist.size()));
    return p;
}

CameraSpec spec_from_params(const CameraSpec &like, const Eigen::VectorXd &params) {
    CameraSpec s = like;
    s.fx = params[0];
    s.fy = params[0] * params[1];
    s.cx = params[2];
    s.cy = params[3];
    s.dist.assign(params.data() + 4, params.data() + params.size());
    return s;
}

Camera::Camera(CameraSpec spec) : spec_(std::move(spec)) {
    spec_.model.check();
    if (static_cast<int>(spec_.dist.size()) != spec_.model.num_dist)
        throw Error(ErrorKind::InvalidArgument, "expected " + std::to_string(spec_.model.num_dist) +
                                                    " coefficients for " + spec_.model.to_string());
    if (!(spec_.fx > 0.0) || !(spec_.fy > 0.0))
        throw Error(ErrorKind::InvalidArgument, "focal lengths must be positive");
    const auto &k = spec_.dist;

    switch (spec_.model.family) {
    case Family::Pinhole:
        theta_limit_ = kPi / 2;
        radius_limit_ = kInf;
        break;
    case Family::BrownConrady: {
        auto margin = [&](double t) {
            double d;
            odd_poly(std::tan(t), k, nullptr, &d);
            return d;
        };
        theta_limit_ = detail::first_sign_change(margin, kPi / 2);
        if (theta_limit_ >= kPi / 2) {
            radius_limit_ = kInf;
        } else {
            odd_poly(std::tan(theta_limit_), k, &radius_limit_, nullptr);
        }
        break;
    }
    case Family::KannalaBrandt: {
        auto margin = [&](double t) {
            double d;
            odd_poly(t, k, nullptr, &d);
            return d;
        };
        theta_limit_ = detail::first_sign_change(margin, kPi);
        odd_poly(theta_limit_, k, &radius_limit_, nullptr);
        break;
    }
    case Family::UCM: {
        const double xi = k[0];
        if (xi < 0.0)
            throw Error(ErrorKind::InvalidArgument, "UCM xi must be non-negative");
        if (xi <= 1.0) {
            theta_limit_ = std::acos(-xi);
            radius_limit_ = kInf;
        } else {
            theta_limit_ = std::acos(-1.0 / xi);
            radius_limit_ = 1.0 / std::sqrt(xi * xi - 1.0);
        }
        break;
    }
    case Family::EUCM: {
        const double alpha = k[0], beta = k[1];
        if (!(beta > 0.0) || alpha < 0.0 || alpha > 1.0)
            throw Error(ErrorKind::InvalidArgument, "EUCM parameters outside alpha in [0,1], beta > 0");
        auto margin = [&](double t) {
            const double s = std::sin(t), c = std::cos(t);
            const double sq = std::sqrt(beta * s * s + c * c);
            const double den = alpha * sq + (1.0 - alpha) * c;
            const double dden = alpha * (beta - 1.0) * s * c / sq - (1.0 - alpha) * s;
            return std::min(den, c * den - s * dden);
        };
        theta_limit_ = detail::first_sign_change(margin, kPi);
        const double den = eucm_denominator(alpha, beta, std::sin(theta_limit_), std::cos(theta_limit_));
        radius_limit_ = den > 0.0 ? std::sin(theta_limit_) / den : kInf;
        if (alpha > 0.5)
            radius_limit_ = std::min(radius_limit_, 1.0 / std::sqrt(beta * (2.0 * alpha - 1.0)));
        break;
    }
    case Family::Division: {
        auto margin = [&](double t) {
            const double r = std::tan(t);
            double p, dp;
            division_psi(r, k, &p, &dp);
            return p - r * dp;
        };
        const double t_lim = detail::first_sign_change(margin, kPi / 2);
        if (t_lim >= kPi / 2) {
            radius_limit_ = kInf;
            double p;
            division_psi(1e6, k, &p, nullptr);
            theta_limit_ = std::atan2(1e6, p);
        } else {
            radius_limit_ = std::tan(t_lim);
            double p;
            division_psi(radius_limit_, k, &p, nullptr);
            theta_limit_ = std::atan2(radius_limit_, p);
        }
        break;
    }
    }
}

double Camera::radius_at(double theta) const {
    const auto &k = spec_.dist;
    switch (spec_.model.family) {
    case Family::Pinhole: return std::tan(theta);
    case Family::BrownConrady: {
        double r;
        odd_poly(std::tan(theta), k, &r, nullptr);
        return r;
    }
    case Family::KannalaBrandt: {
        double r;
        odd_poly(theta, k, &r, nullptr);
        return r;
    }
    case Family::UCM: return std::sin(theta) / (k[0] + std::cos(theta));
    case Family::EUCM: return std::sin(theta) / eucm_denominator(k[0], k[1], std::sin(theta), std::cos(theta));
    case Family::Division: return solve_radius_newton(theta);
    }
    return 0.0;
}

double Camera::theta_at(double radius) const {
    if (radius == 0.0)
        return 0.0;
    const Ray ray = unproject(Pixel(spec_.cx + spec_.fx * radius, spec_.cy));
    return std::atan2(std::hypot(ray.x(), ray.y()), ray.z());
}

double Camera::corner_radius() const {
    double best = 0.0;
    for (double u : {0.0, static_cast<double>(spec_.width)}) {
        for (double v : {0.0, static_cast<double>(spec_.height)}) {
            const double mx = (u - spec_.cx) / spec_.fx;
            const double my = (v - spec_.cy) / spec_.fy;
            best = std::max(best, std::hypot(mx, my));
        }
    }
    return best;
}

double Camera::solve_radius_newton(double theta) const {
    const auto &k = spec_.dist;
    auto eval = [&](double r, double *g, double *dg) {
        double p, dp;
        division_psi(r, k, &p, &dp);
        *g = std::atan2(r, p);
        *dg = (p - r * dp) / (r * r + p * p);
    };
    const double init = theta < kPi / 2 ? std::tan(theta) : 1.0;
    const auto r = detail::solve_increasing(eval, theta, init, 0.0, radius_limit_);
    if (!r)
        throw Error(ErrorKind::RayOutsideDomain, "division projection did not converge");
    return *r;
}

double Camera::solve_theta_newton(double radius) const {
    const auto &k = spec_.dist;
    auto eval = [&](double x, double *g, double *dg) { odd_poly(x, k, g, dg); };
    const auto t = detail::solve_increasing(eval, radius, std::atan(radius), 0.0, theta_limit_);
    if (!t)
        throw Error(ErrorKind::NonInvertiblePixel, "Kannala-Brandt unprojection did not converge");
    return *t;
}

Pixel Camera::project(const Ray &ray) const {
    const double X = ray.x(), Y = ray.y(), Z = ray.z();
    const double R = std::hypot(X, Y);
    const double theta = std::atan2(R, Z);
    if (!(theta < theta_limit_))
        throw Error(ErrorKind::RayOutsideDomain,
                    "polar angle " + std::to_string(theta) + " beyond limit " + std::to_string(theta_limit_));
    if (R == 0.0)
        return spec_.principal_point();

    const auto &k = spec_.dist;
    double phi = 0.0;
    switch (spec_.model.family) {
    case Family::Pinhole: phi = 1.0 / Z; break;
    case Family::BrownConrady: {
        double h;
        odd_poly(R / Z, k, &h, nullptr);
        phi = h / R;
        break;
    }
    case Family::KannalaBrandt: {
        double h;
        odd_poly(theta, k, &h, nullptr);
        phi = h / R;
        break;
    }
    case Family::UCM: phi = 1.0 / (k[0] * std::hypot(R, Z) + Z); break;
    case Family::EUCM: phi = 1.0 / (k[0] * std::sqrt(k[1] * R * R + Z * Z) + (1.0 - k[0]) * Z); break;
    case Family::Division: phi = solve_radius_newton(theta) / R; break;
    }
    return {spec_.cx + spec_.fx * phi * X, spec_.cy + spec_.fy * phi * Y};
}

Ray Camera::unproject(const Pixel &px) const { return unproject(px, nullptr); }

Ray Camera::unproject(const Pixel &px, Eigen::MatrixXd *jac_params) const {
    const double f = spec_.fx, a = spec_.aspect();
    const double mx = (px.x() - spec_.cx) / f;
    const double my = (px.y() - spec_.cy) / spec_.fy;
    const double q = mx * mx + my * my;
    const double r = std::sqrt(q);
    if (!(r < radius_limit_))
        throw Error(ErrorKind::NonInvertiblePixel,
                    "normalized radius " + std::to_string(r) + " outside injective region");

    const auto &k = spec_.dist;
    const size_t nd = k.size();
    // Unnormalized ray w = (s(q) mx, s(q) my, t(q)) with derivatives in q and the coefficients.
    double s = 1.0, t = 1.0, s_q = 0.0, t_q = 0.0;
    std::vector<double> s_k(nd, 0.0), t_k(nd, 0.0);

    switch (spec_.model.family) {
    case Family::Pinhole: break;
    case Family::BrownConrady: {
        double rho = 0.0;
        if (r > 0.0) {
            auto eval = [&](double x, double *g, double *dg) { odd_poly(x, k, g, dg); };
            const double hi = theta_limit_ < kPi / 2 ? std::tan(theta_limit_) : kInf;
            const auto sol = detail::solve_increasing(eval, r, r, 0.0, hi);
            if (!sol)
                throw Error(ErrorKind::NonInvertiblePixel, "Brown-Conrady unprojection did not converge");
            rho = *sol;
            s = rho / r;
        }
        // Implicit equation E(s, q) = s (1 + sum k_n q^n s^{2n}) - 1 = 0.
        double e_s = 1.0, e_q = 0.0, qn = 1.0, s2n = 1.0;
        for (size_t n = 0; n < nd; ++n) {
            const double e = static_cast<double>(n + 1);
            const double qn_prev = qn;
            qn *= q;
            s2n *= s * s;
            e_s += (2.0 * e + 1.0) * k[n] * qn * s2n;
            e_q += s * e * k[n] * qn_prev * s2n;
            s_k[n] = s * qn * s2n;
        }
        s_q = -e_q / e_s;
        for (size_t n = 0; n < nd; ++n)
            s_k[n] = -s_k[n] / e_s;
        break;
    }
    case Family::KannalaBrandt: {
        double theta = 0.0;
        if (r > 0.0)
            theta = solve_theta_newton(r);
        double dh;
        odd_poly(theta, k, nullptr, &dh);
        double poly = 1.0, t2n = 1.0;
        for (size_t n = 0; n < nd; ++n) {
            t2n *= theta * theta;
            poly += k[n] * t2n;
        }
        const double theta_over_r = 1.0 / poly;
        const double sinc = theta < 1e-6 ? 1.0 - theta * theta / 6.0 : std::sin(theta) / theta;
        s = sinc * theta_over_r;
        t = std::cos(theta);
        const double theta_r = 1.0 / dh;
        t_q = -0.5 * s * theta_r;
        if (r > 1e-4)
            s_q = (std::cos(theta) * theta_r - s) / (2.0 * q);
        else
            s_q = -(nd > 0 ? k[0] : 0.0) - 1.0 / 6.0;
        t2n = 1.0;
        for (size_t n = 0; n < nd; ++n) {
            t2n *= theta * theta;
            // d theta / d k_n = -theta^{2n+1} / h'(theta)
            const double theta_k_over_r = -t2n * theta_over_r / dh;
            s_k[n] = std::cos(theta) * theta_k_over_r;
            t_k[n] = -std::sin(theta) * theta_k_over_r * r;
        }
        break;
    }
    case Family::UCM: {
        const double xi = k[0];
        const double root = std::sqrt(1.0 + (1.0 - xi * xi) * q);
        const double lambda = (xi + root) / (1.0 + q);
        s = lambda;
        t = lambda - xi;
        s_q = ((1.0 - xi * xi) / (2.0 * root) * (1.0 + q) - (xi + root)) / ((1.0 + q) * (1.0 + q));
        t_q = s_q;
        s_k[0] = (1.0 - xi * q / root) / (1.0 + q);
        t_k[0] = s_k[0] - 1.0;
        break;
    }
    case Family::EUCM: {
        const double alpha = k[0], beta = k[1];
        const double root = std::sqrt(1.0 - (2.0 * alpha - 1.0) * beta * q);
        const double num = 1.0 - beta * alpha * alpha * q;
        const double den = alpha * root + 1.0 - alpha;
        t = num / den;
        const double num_q = -beta * alpha * alpha;
        const double den_q = -alpha * (2.0 * alpha - 1.0) * beta / (2.0 * root);
        t_q = (num_q * den - num * den_q) / (den * den);
        const double num_a = -2.0 * beta * alpha * q;
        const double den_a = root - alpha * beta * q / root - 1.0;
        const double num_b = -alpha * alpha * q;
        const double den_b = -alpha * (2.0 * alpha - 1.0) * q / (2.0 * root);
        t_k[0] = (num_a * den - num * den_a) / (den * den);
        t_k[1] = (num_b * den - num * den_b) / (den * den);
        break;
    }
    case Family::Division: {
        double qn = 1.0;
        t = 1.0;
        for (size_t n = 0; n < nd; ++n) {
            const double e = static_cast<double>(n + 1);
            t_q += e * k[n] * qn;
            qn *= q;
            t += k[n] * qn;
            t_k[n] = qn;
        }
        break;
    }
    }

    const Eigen::Vector3d w(s * mx, s * my, t);
    const double norm = w.norm();
    const Ray ray = w / norm;
    if (!jac_params)
        return ray;

    Eigen::Matrix<double, 3, 2> dw_dm;
    dw_dm << s + 2.0 * mx * mx * s_q, 2.0 * mx * my * s_q, //
        2.0 * mx * my * s_q, s + 2.0 * my * my * s_q,      //
        2.0 * mx * t_q, 2.0 * my * t_q;

    Eigen::Matrix<double, 2, 4> dm_dp;
    dm_dp << -mx / f, 0.0, -1.0 / f, 0.0, //
        -my / f, -my / a, 0.0, -1.0 / (a * f);

    Eigen::MatrixXd dw(3, 4 + nd);
    dw.leftCols<4>() = dw_dm * dm_dp;
    for (size_t n = 0; n < nd; ++n)
        dw.col(4 + static_cast<Eigen::Index>(n)) << s_k[n] * mx, s_k[n] * my, t_k[n];

    const Eigen::Matrix3d dnorm = (Eigen::Matrix3d::Identity() - ray * ray.transpose()) / norm;
    *jac_params = dnorm * dw;
    return ray;
}

Pixel project(const CameraSpec &spec, const Ray &ray) { return Camera(spec).project(ray); }

Ray unproject(const CameraSpec &spec, const Pixel &px) { return Camera(spec).unproject(px); }

double min_focal(const ModelId &model, const std::vector<double> &dist, int width, int height) {
    const double r_im = 0.5 * std::hypot(static_cast<double>(width), static_cast<double>(height));
    switch (model.family) {
    case Family::BrownConrady:
        if (std::all_of(dist.begin(), dist.end(), [](double v) { return v >= 0.0; }))
            return 0.0;
        break;
    case Family::EUCM:
        if (dist.size() != 2 || dist[0] <= 0.5)
            return 0.0;
        break;
    default: return 0.0;
    }
    CameraSpec unit;
    unit.model = model;
    unit.dist = dist;
    const Camera cam(unit);
    if (std::isinf(cam.radius_limit()))
        return 0.0;
    return r_im / cam.radius_limit();
}

ValidityReport validate_spec(const CameraSpec &spec) {
    ValidityReport report;
    auto &out = report.violations;
    try {
        spec.model.check();
    } catch (const Error &e) {
        out.emplace_back(e.what());
        return report;
    }
    if (static_cast<int>(spec.dist.size()) != spec.model.num_dist) {
        out.push_back("coefficient count " + std::to_string(spec.dist.size()) + " does not match " +
                      spec.model.to_string());
        return report;
    }
    if (!(spec.fx > 0.0) || !std::isfinite(spec.fx))
        out.push_back("fx must be positive and finite");
    if (!(spec.fy > 0.0) || !std::isfinite(spec.fy))
        out.push_back("fy must be positive and finite");
    if (!std::isfinite(spec.cx) || !std::isfinite(spec.cy))
        out.push_back("principal point must be finite");
    if (spec.width <= 0 || spec.height <= 0)
        out.push_back("image size must be positive");
    for (double d : spec.dist)
        if (!std::isfinite(d))
            out.push_back("distortion coefficients must be finite");
    if (spec.model.family == Family::UCM && spec.dist[0] < 0.0)
        out.push_back("ucm xi must satisfy xi >= 0");
    if (spec.model.family == Family::EUCM) {
        if (spec.dist[0] < 0.0 || spec.dist[0] > 1.0)
            out.push_back("eucm alpha must lie in [0, 1]");
        if (!(spec.dist[1] > 0.0))
            out.push_back("eucm beta must be positive");
    }
    if (!out.empty())
        return report;

    // The clamp assumes square pixels and a centered principal point; the corner test covers the rest.
    const bool centered = spec.fx == spec.fy && spec.cx == 0.5 * spec.width && spec.cy == 0.5 * spec.height;
    const double fmin = centered ? min_focal(spec.model, spec.dist, spec.width, spec.height) : 0.0;
    if (fmin > 0.0 && spec.fx < fmin)
        out.push_back("focal " + std::to_string(spec.fx) + " below clamp " + std::to_string(fmin));
    const Camera cam(spec);
    if (out.empty() && !(cam.corner_radius() < cam.radius_limit()))
        out.push_back("image corners extend beyond the injective region");
    return report;
}

} // namespace raycalib
