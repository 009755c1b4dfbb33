#pragma once

#include <cmath>
#include <limits>
#include <optional>

namespace raycalib::detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Largest x in (0, cap] such that margin stays positive on (0, x]. Sweeps then bisects.
template <typename Margin>
double first_sign_change(Margin &&margin, double cap, int samples = 1024) {
    double prev = 0.0;
    for (int i = 1; i < samples; ++i) {
        const double x = cap * static_cast<double>(i) / samples;
        const double m = margin(x);
        if (!(m > 0.0)) {
            double lo = prev, hi = x;
            for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (mid <= lo || mid >= hi)
                    break;
                if (margin(mid) > 0.0)
                    lo = mid;
                else
                    hi = mid;
            }
            return lo;
        }
        prev = x;
    }
    return cap;
}

// Solves g(x) = target for increasing g on [lo, hi) by Newton with a bisection fallback.
// `eval(x, &g, &dg)` fills value and derivative. hi may be infinite.
template <typename Eval>
std::optional<double> solve_increasing(Eval &&eval, double target, double x0, double lo, double hi,
                                       double tol = 1e-10) {
    double g = 0.0, dg = 0.0;
    if (std::isinf(hi)) {
        double probe = std::max(2.0 * std::abs(x0), 1.0);
        for (int i = 0; i < 200; ++i) {
            eval(probe, &g, &dg);
            if (!std::isfinite(g) || g > target)
                break;
            lo = probe;
            probe *= 2.0;
        }
        hi = probe;
    }
    double x = x0;
    if (!(x > lo && x < hi))
        x = 0.5 * (lo + hi);

    double best_x = x, best_res = kInf;
    for (int it = 0; it < 100; ++it) {
        eval(x, &g, &dg);
        const double res = g - target;
        if (std::isfinite(res) && std::abs(res) < best_res) {
            best_res = std::abs(res);
            best_x = x;
        }
        if (res == 0.0)
            break;
        if (res < 0.0)
            lo = x;
        else
            hi = x;
        double next = x - res / dg;
        if (!std::isfinite(next) || !(dg > 0.0) || next <= lo || next >= hi)
            next = 0.5 * (lo + hi);
        const double step = std::abs(next - x);
        x = next;
        if (step <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x)))
            break;
    }
    eval(x, &g, &dg);
    if (std::isfinite(g) && std::abs(g - target) < best_res) {
        best_res = std::abs(g - target);
        best_x = x;
    }
    if (!(best_res <= tol * std::max(1.0, std::abs(target))))
        return std::nullopt;
    return best_x;
}

} // namespace raycalib::detail
