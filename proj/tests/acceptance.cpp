// Runs the ten acceptance criteria and prints one PASS/FAIL line per criterion.

#include "raycalib/calibrator.hpp"
#include "raycalib/error.hpp"
#include "raycalib/metrics.hpp"
#include "raycalib/synth.hpp"
#include "test_support.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

using namespace raycalib;
using namespace testsupport;
namespace fs = std::filesystem;

namespace {

constexpr double kDeg = 180.0 / kPi;

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char *f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Per-parameter relative errors in [f, a, cx, cy, dist...] order.
Eigen::VectorXd rel_errors(const CameraSpec &est, const CameraSpec &gt) {
    const Eigen::VectorXd a = spec_to_params(est), b = spec_to_params(gt);
    return (a - b).array().abs() / b.array().abs();
}

Verdict criterion1() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0, worst_eucm_ab = 0.0, worst_eucm_f = 0.0;
    std::string worst_model;
    int failures = 0;
    for (const auto &m : all_model_strings()) {
        const ModelId id = ModelId::parse(m);
        IntrinsicsSampler sampler({DatasetKind::OPg, 64, 1000 + std::hash<std::string>{}(m) % 1000});
        for (int i = 0; i < 100; ++i) {
            const CameraSpec s = sampler.next(id);
            CalibrationResult res;
            try {
                res = calibrate(field_from_spec(s, 1), id);
            } catch (const Error &) {
                ++failures;
                continue;
            }
            const Eigen::VectorXd e = rel_errors(res.spec, s);
            if (id.family == Family::EUCM) {
                worst_eucm_f = std::max(worst_eucm_f, e[0]);
                worst_eucm_ab = std::max({worst_eucm_ab, e[4], e[5]});
                worst = std::max({worst, e[1], e[2], e[3]});
            } else if (e.maxCoeff() > worst) {
                worst = e.maxCoeff();
                worst_model = m;
            }
        }
    }
    const double secs = seconds_since(t0);
    Verdict v;
    v.pass = failures == 0 && worst <= 1e-6 && worst_eucm_ab <= 1e-4 && worst_eucm_f <= 1e-3 && secs < 60.0;
    v.detail = fmt("exact recovery, 14 models x 100 specs on 64x64: max rel err %.2e (%s), eucm alpha/beta %.2e, "
                   "eucm f %.2e, failures %d, %.1f s",
                   worst, worst_model.c_str(), worst_eucm_ab, worst_eucm_f, failures, secs);
    return v;
}

Verdict criterion2() {
    std::mt19937_64 rng(2);
    double worst = 0.0;
    int n = 0;
    for (const auto &m : all_model_strings()) {
        IntrinsicsSampler sampler({DatasetKind::OPg, 128, 2});
        for (int i = 0; i < 20; ++i) {
            const CameraSpec base = sampler.next(ModelId::parse(m));
            const CameraSpec s = apply_edit(base, sample_edit(base, rng));
            const PpointAspect pa = fit_ppoint_aspect(correspondences_from_rays(rays_from_field(field_from_spec(s, 1))));
            worst = std::max({worst, std::abs(pa.a - s.aspect()) / s.aspect(), std::abs(pa.cx - s.cx) / std::max(std::abs(s.cx), 1.0),
                              std::abs(pa.cy - s.cy) / std::max(std::abs(s.cy), 1.0)});
            ++n;
        }
    }
    return {worst <= 1e-9, fmt("(a, cx, cy) on %d stretched/cropped noiseless fields, all families: max rel err %.2e", n,
                               worst)};
}

Verdict criterion3() {
    int runs = 0, monotone = 0;
    double worst = 0.0;
    for (const auto &m : all_model_strings()) {
        const ModelId id = ModelId::parse(m);
        IntrinsicsSampler sampler({DatasetKind::OPg, 64, 3});
        for (int i = 0; i < 10; ++i) {
            const CameraSpec s = sampler.next(id);
            const FovField clean = field_from_spec(s, 1);
            for (double sigma : {0.0, 0.5, 2.0}) {
                const auto corrs = correspondences_from_rays(rays_from_field(add_noise(clean, sigma, 31 + i)));
                try {
                    const PpointAspect pa = fit_ppoint_aspect(corrs);
                    const auto res = refine(fit_linear(id, corrs, pa.a, Pixel(pa.cx, pa.cy)), corrs);
                    ++runs;
                    monotone += std::is_sorted(res.gn_costs.rbegin(), res.gn_costs.rend());
                } catch (const Error &) {
                }
            }
            const auto corrs = correspondences_from_rays(rays_from_field(clean));
            for (double scale : {0.95, 1.05}) {
                CameraSpec s0 = s;
                s0.fx *= scale;
                s0.fy *= scale;
                const auto res = refine(s0, corrs);
                ++runs;
                monotone += std::is_sorted(res.gn_costs.rbegin(), res.gn_costs.rend());
                worst = std::max(worst, rel_errors(res.spec, s).maxCoeff());
            }
        }
    }
    return {monotone == runs && worst <= 1e-8,
            fmt("non-increasing costs on %d/%d runs; f +/-5%% on noiseless fields -> max rel err %.2e", monotone, runs,
                worst)};
}

Verdict criterion4() {
    std::mt19937_64 rng(4);
    double worst = 0.0;
    int points = 0;
    for (const auto &m : all_model_strings()) {
        IntrinsicsSampler sampler({DatasetKind::OPg, 480, 4});
        for (int trial = 0; trial < 100; ++trial) {
            CameraSpec s = sampler.next(ModelId::parse(m));
            s.fy = s.fx * uniform(rng, 0.9, 1.1);
            s.cx += uniform(rng, -20, 20);
            s.cy += uniform(rng, -20, 20);
            if (!validate_spec(s).ok())
                continue;
            const Pixel px(uniform(rng, 0, s.width), uniform(rng, 0, s.height));
            Eigen::MatrixXd J;
            try {
                Camera(s).unproject(px, &J);
            } catch (const Error &) {
                continue;
            }
            const Eigen::VectorXd p0 = spec_to_params(s);
            for (Eigen::Index c = 0; c < p0.size(); ++c) {
                const double h = 1e-6 * std::max(1.0, std::abs(p0[c]));
                Eigen::VectorXd pp = p0, pm = p0;
                pp[c] += h;
                pm[c] -= h;
                const Eigen::Vector3d fd = (Camera(spec_from_params(s, pp)).unproject(px) -
                                            Camera(spec_from_params(s, pm)).unproject(px)) /
                                           (2 * h);
                worst = std::max(worst, (J.col(c) - fd).norm() / std::max(fd.norm(), 1e-4));
            }
            ++points;
        }
    }
    for (int i = 0; i < 100; ++i, ++points) {
        const Ray p = random_ray_below(rng, 3.0);
        const auto J = log_map_jacobian(p);
        for (int c = 0; c < 3; ++c) {
            Ray pp = p, pm = p;
            pp[c] += 1e-6;
            pm[c] -= 1e-6;
            const Theta fd = (log_map(pp) - log_map(pm)) / 2e-6;
            worst = std::max(worst, (J.col(c) - fd).norm() / std::max(fd.norm(), 1e-4));
        }
    }
    return {worst <= 1e-5, fmt("unprojection (14 models) and log-map Jacobians at %d points: max rel diff %.2e", points,
                               worst)};
}

Verdict criterion5() {
    const ModelId kb2 = ModelId::parse("kb:2"), kb4 = ModelId::parse("kb:4");
    IntrinsicsSampler sampler({DatasetKind::OPg, 64, 5});
    std::vector<double> ae;
    for (int i = 0; i < 100; ++i) {
        const CameraSpec s = sampler.next(kb2);
        try {
            const auto res = calibrate(add_noise(field_from_spec(s, 1), 0.5, 500 + i), kb2);
            ae.push_back(angular_error(s, res.spec));
        } catch (const Error &) {
            ae.push_back(180.0);
        }
    }
    const double med_ae = median(ae);
    std::vector<double> diff;
    double med_plain = 0.0, med_ransac = 0.0;
    std::vector<double> plain, ransac;
    for (int i = 0; i < 20; ++i) {
        const CameraSpec s = sampler.next(kb4);
        const FovField noisy = add_noise(field_from_spec(s, 1), 0.5, 900 + i);
        double re_plain = 1e9, re_ransac = 1e9;
        try {
            re_plain = reproj_error(s, calibrate(noisy, kb4).spec);
        } catch (const Error &) {
        }
        try {
            RansacOptions opts;
            opts.seed = static_cast<uint64_t>(i);
            re_ransac = reproj_error(s, calibrate_ransac(noisy, kb4, opts).spec);
        } catch (const Error &) {
        }
        plain.push_back(re_plain);
        ransac.push_back(re_ransac);
        diff.push_back(re_ransac - re_plain);
    }
    med_plain = median(plain);
    med_ransac = median(ransac);
    const double med_diff = median(diff);
    return {med_ae <= 0.5 && med_diff >= 0.0,
            fmt("kb:2 sigma 0.5 deg: median AE %.3f deg; kb:4 median RE calibrate %.3f px vs ransac %.3f px "
                "(median paired diff %.3f)",
                med_ae, med_plain, med_ransac, med_diff)};
}

Verdict criterion6() {
    CameraSpec kb;
    kb.model = ModelId::parse("kb:4");
    kb.fx = kb.fy = 616.1;
    kb.width = 1752;
    kb.height = 1168;
    kb.cx = 876;
    kb.cy = 584;
    kb.dist = {6.0e-2, 0.61e-2, 0.06e-2, -0.03e-2};
    const ModelId ucm = ModelId::parse("ucm");
    const CameraSpec fixed = convert_model(kb, ucm, true, 8);
    const CameraSpec free = convert_model(kb, ucm, false, 8);
    const bool fixed_ok = std::abs(fixed.dist[0] - 0.88) <= 0.05;
    const bool free_ok = std::abs(free.fx - 1331.9) <= 0.05 * 1331.9 && std::abs(free.dist[0] - 1.17) <= 0.05;
    return {fixed_ok && free_ok,
            fmt("kb:4 -> ucm on 1752x1168: fixed f xi = %.3f (target 0.88 +/- 0.05, %s); free f = %.1f, xi = %.3f "
                "(target 1331.9 +/- 5%%, 1.17 +/- 0.05, %s)",
                fixed.dist[0], fixed_ok ? "ok" : "miss", free.fx, free.dist[0], free_ok ? "ok" : "miss")};
}

Verdict criterion7() {
    std::mt19937_64 rng(7);
    double worst_px = 0.0;
    int trials = 0;
    const int per_model = 1000000 / static_cast<int>(all_model_strings().size()) + 1;
    for (const auto &m : all_model_strings()) {
        IntrinsicsSampler sampler({DatasetKind::OPg, 256, 7});
        int done = 0;
        while (done < per_model) {
            const Camera cam(sampler.next(ModelId::parse(m)));
            for (int k = 0; k < 1000 && done < per_model; ++k, ++done, ++trials) {
                const Pixel px(uniform(rng, 0, 256), uniform(rng, 0, 256));
                worst_px = std::max(worst_px, (cam.project(cam.unproject(px)) - px).norm());
            }
        }
    }
    double worst_theta = 0.0, worst_ray = 0.0;
    for (int i = 0; i < 1000000; ++i) {
        const double r = 3.0 * std::sqrt(uniform(rng, 0, 1)), a = uniform(rng, -kPi, kPi);
        const Theta t(r * std::cos(a), r * std::sin(a));
        worst_theta = std::max(worst_theta, (log_map(exp_map(t)) - t).norm());
        Ray p = random_ray_below(rng, kPi);
        if (p.z() > -1.0 + 1e-9)
            worst_ray = std::max(worst_ray, (exp_map(log_map(p)) - p).norm());
    }
    return {worst_px <= 1e-9 && worst_theta <= 1e-12 && worst_ray <= 1e-12,
            fmt("%d pixel round trips: max %.2e px; 1e6 log(exp) max %.2e; 1e6 exp(log) max %.2e", trials, worst_px,
                worst_theta, worst_ray)};
}

Verdict criterion8() {
    const double f = focal_from_fov(ModelId::parse("pinhole"), {}, 90.0, 480);
    double worst_closed = std::abs(f - 240.0);
    std::mt19937_64 rng(8);
    for (int i = 0; i < 1000; ++i) {
        const double fov = uniform(rng, 1.0, 179.0);
        const int h = 2 * static_cast<int>(uniform(rng, 16, 1024));
        const double fp = focal_from_fov(ModelId::parse("pinhole"), {}, fov, h);
        worst_closed = std::max(worst_closed, std::abs(fp - (h / 2.0) / std::tan(fov / 2 / kDeg)) / fp);
    }
    double worst_inv = 0.0;
    int n = 0;
    for (const auto &m : all_model_strings()) {
        const ModelId id = ModelId::parse(m);
        IntrinsicsSampler sampler({DatasetKind::OPg, 512, 8});
        const bool narrow = id.family == Family::Pinhole || id.family == Family::BrownConrady;
        for (int i = 0; i < 50; ++i) {
            CameraSpec s = sampler.next(id);
            const double fov = uniform(rng, 20.0, narrow ? 105.0 : 150.0);
            try {
                s.fx = s.fy = focal_from_fov(id, s.dist, fov, s.height);
                if (!validate_spec(s).ok())
                    continue;
                worst_inv = std::max(worst_inv, std::abs(fov_agnostic(s).vfov - fov));
                ++n;
            } catch (const Error &) {
            }
        }
    }
    return {std::abs(f - 240.0) / 240.0 <= 1e-12 && worst_closed <= 1e-12 && worst_inv <= 1e-9,
            fmt("pinhole H=480 FoV=90 -> f=%.15g, closed form rel err %.2e; fov_agnostic(focal_from_fov) over %d "
                "specs: max %.2e deg",
                f, worst_closed, n, worst_inv)};
}

// Walks the radial profile r(theta) in fine steps and reports whether it reaches `target` while strictly increasing.
bool increasing_up_to(const std::function<double(double)> &r, double theta_end, double target) {
    double prev = 0.0;
    const int steps = 200000;
    for (int i = 1; i <= steps; ++i) {
        const double v = r(theta_end * i / steps);
        if (!(v > prev))
            return false;
        if (v >= target)
            return true;
        prev = v;
    }
    return false;
}

Verdict criterion9() {
    int checked = 0, ok = 0;
    IntrinsicsSampler bc({DatasetKind::OPr, 480, 9}), eu({DatasetKind::OPd, 480, 9});
    auto check = [&](const CameraSpec &s, const std::function<double(double)> &profile, double theta_end) {
        const double fmin = min_focal(s.model, s.dist, s.width, s.height);
        const double corner = 0.5 * std::hypot(s.width, s.height);
        CameraSpec above = s, below = s;
        above.fx = above.fy = fmin * (1 + 1e-6);
        below.fx = below.fy = fmin * (1 - 1e-3);
        const bool mono_above = increasing_up_to(profile, theta_end, corner / above.fx);
        const bool mono_below = increasing_up_to(profile, theta_end, corner / below.fx);
        ++checked;
        ok += fmin > 0 && mono_above && !mono_below && validate_spec(above).ok() && !validate_spec(below).ok();
    };
    while (checked < 500) {
        const CameraSpec s = bc.next();
        if (s.dist[0] >= 0.0)
            continue;
        const double k = s.dist[0];
        check(s, [k](double t) { const double p = std::tan(t); return p * (1 + k * p * p); }, kPi / 2 - 1e-9);
    }
    while (checked < 1000) {
        const CameraSpec s = eu.next(ModelId::parse("eucm"));
        if (s.dist[0] <= 0.5)
            continue;
        const double a = s.dist[0], b = s.dist[1];
        check(s,
              [a, b](double t) {
                  const double d = std::sqrt(b * std::sin(t) * std::sin(t) + std::cos(t) * std::cos(t));
                  return std::sin(t) / (a * d + (1 - a) * std::cos(t));
              },
              kPi - 1e-9);
    }
    return {ok == checked, fmt("%d/%d specs (500 BC k<0, 500 EUCM alpha>0.5): monotone to the corner at f_min(1+1e-6), "
                               "non-monotone at f_min(1-1e-3)",
                               ok, checked)};
}

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int sh(const std::string &cmd) {
    const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict criterion10(const std::string &cli) {
    const fs::path dir = fs::temp_directory_path() / "raycalib_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string d = dir.string();
    {
        std::ofstream(dir / "kb.json")
            << R"({"model": "kb:4", "width": 96, "height": 96, "fx": 40, "fy": 42, "cx": 47, "cy": 49, "dist": [0.05, -0.01, 0.002, -0.0003]})";
        std::ofstream(dir / "lens.json") << R"({"model_kind": "fisheye_equisolid", "coefficients": [-0.01], "focal_mm": 16})";
    }
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"synth", "synth --kind opg --n 24 --size 48 --seed 11 --noise-deg 0.3 --edit --out " + d + "/synth"},
        {"fit", "fit " + d + "/synth --model kb:3 --dump-per-pixel --out " + d + "/fit"},
        {"fit-ransac", "fit " + d + "/synth --model ucm --ransac --seed 5 --iters 100 --out " + d + "/fit-ransac"},
        {"eval", "eval " + d + "/fit " + d + "/synth --edited --dump-per-pixel --out " + d + "/eval"},
        {"convert", "convert " + d + "/kb.json --model division:2 --out " + d + "/convert"},
        {"lensfun", "lensfun " + d + "/lens.json --out " + d + "/lensfun"},
    };
    int same = 0;
    std::string bad;
    for (const auto &[name, args] : commands) {
        if (sh(cli + " " + args) != 0) {
            bad += name + "(run) ";
            continue;
        }
        bool identical = true;
        for (const char *threads : {"1", "4"}) {
            const fs::path again = dir / (name + "-replay-" + threads);
            if (sh("RAYCALIB_THREADS=" + std::string(threads) + " " + cli + " replay " + d + "/" + name +
                   "/manifest.json --out " + again.string()) != 0) {
                identical = false;
                continue;
            }
            size_t files = 0;
            for (const auto &e : fs::recursive_directory_iterator(dir / name)) {
                if (!e.is_regular_file())
                    continue;
                ++files;
                const auto rel = fs::relative(e.path(), dir / name);
                identical = identical && fs::exists(again / rel) && slurp(e.path()) == slurp(again / rel);
            }
            size_t files_again = 0;
            for (const auto &e : fs::recursive_directory_iterator(again))
                files_again += e.is_regular_file();
            identical = identical && files == files_again;
        }
        if (identical)
            ++same;
        else
            bad += name + " ";
    }
    fs::remove_all(dir);
    return {same == static_cast<int>(commands.size()),
            fmt("%d/%zu commands bit-identical when replayed from their manifest (1 and 4 threads)%s%s", same,
                commands.size(), bad.empty() ? "" : "; differing: ", bad.c_str())};
}

} // namespace

int main(int argc, char **argv) {
    const std::string cli = argc > 1 ? argv[1] : RAYCALIB_CLI;
    const std::vector<std::pair<const char *, std::function<Verdict()>>> criteria = {
        {"exact closed-form recovery", criterion1},
        {"principal point and aspect stage", criterion2},
        {"Gauss-Newton refinement", criterion3},
        {"Jacobian checks", criterion4},
        {"noise robustness", criterion5},
        {"cross-model mapping", criterion6},
        {"round trips", criterion7},
        {"FoV conversions", criterion8},
        {"validity clamps", criterion9},
        {"determinism", [&] { return criterion10(cli); }},
    };
    int failed = 0;
    for (size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception &e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        failed += !v.pass;
        std::printf("CRITERION %zu %s: %s: %s\n", i + 1, v.pass ? "PASS" : "FAIL", criteria[i].first, v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
