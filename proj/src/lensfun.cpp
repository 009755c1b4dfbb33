#include "raycalib/lensfun.hpp"
#include "raycalib/calibrator.hpp"
#include "raycalib/error.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <json.hpp>

#include <Eigen/Geometry>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace raycalib {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_fisheye_kind(LensfunModelKind k) {
    return k == LensfunModelKind::FisheyeEquisolid || k == LensfunModelKind::FisheyeEquidistant ||
           k == LensfunModelKind::FisheyeOrthographic || k == LensfunModelKind::FisheyeStereographic;
}

LensProjection projection_of(LensfunModelKind k) {
    switch (k) {
    case LensfunModelKind::FisheyeEquisolid: return LensProjection::Equisolid;
    case LensfunModelKind::FisheyeEquidistant: return LensProjection::Equidistant;
    case LensfunModelKind::FisheyeOrthographic: return LensProjection::Orthographic;
    case LensfunModelKind::FisheyeStereographic: return LensProjection::Stereographic;
    default: return LensProjection::Rectilinear;
    }
}

// Polar angle of an undistorted sensor radius in mm; NaN outside the projection's domain.
double ideal_theta(LensProjection p, double r, double f) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    switch (p) {
    case LensProjection::Rectilinear: return std::atan(r / f);
    case LensProjection::Equidistant: return r / f;
    case LensProjection::Equisolid: return r <= 2 * f ? 2 * std::asin(r / (2 * f)) : nan;
    case LensProjection::Orthographic: return r <= f ? std::asin(r / f) : nan;
    case LensProjection::Stereographic: return 2 * std::atan(r / (2 * f));
    }
    return nan;
}

void sensor_from_crop(double crop, const std::string &aspect, LensfunEntry &e) {
    double ratio = 1.5;
    if (!aspect.empty()) {
        const auto colon = aspect.find(':');
        try {
            ratio = colon == std::string::npos ? std::stod(aspect)
                                               : std::stod(aspect.substr(0, colon)) / std::stod(aspect.substr(colon + 1));
        } catch (const std::exception &) {
            throw Error(ErrorKind::ParseError, "bad aspect-ratio '" + aspect + "'");
        }
    }
    if (ratio < 1.0)
        ratio = 1.0 / ratio;
    const double diag = std::hypot(36.0, 24.0) / crop;
    e.sensor_width_mm = diag * ratio / std::hypot(ratio, 1.0);
    e.sensor_height_mm = diag / std::hypot(ratio, 1.0);
}

} // namespace

LensfunModelKind parse_lensfun_model_kind(const std::string &s) {
    if (s == "poly3")
        return LensfunModelKind::Poly3;
    if (s == "poly5")
        return LensfunModelKind::Poly5;
    if (s == "ptlens")
        return LensfunModelKind::PTLens;
    if (s == "fisheye_equisolid")
        return LensfunModelKind::FisheyeEquisolid;
    if (s == "fisheye_equidistant" || s == "fisheye")
        return LensfunModelKind::FisheyeEquidistant;
    if (s == "fisheye_orthographic")
        return LensfunModelKind::FisheyeOrthographic;
    if (s == "fisheye_stereographic")
        return LensfunModelKind::FisheyeStereographic;
    throw Error(ErrorKind::UnsupportedModelKind, "unsupported lensfun model kind '" + s + "'");
}

std::string to_string(LensfunModelKind kind) {
    switch (kind) {
    case LensfunModelKind::Poly3: return "poly3";
    case LensfunModelKind::Poly5: return "poly5";
    case LensfunModelKind::PTLens: return "ptlens";
    case LensfunModelKind::FisheyeEquisolid: return "fisheye_equisolid";
    case LensfunModelKind::FisheyeEquidistant: return "fisheye_equidistant";
    case LensfunModelKind::FisheyeOrthographic: return "fisheye_orthographic";
    case LensfunModelKind::FisheyeStereographic: return "fisheye_stereographic";
    }
    return "";
}

LensProjection parse_lens_projection(const std::string &s) {
    if (s == "rectilinear")
        return LensProjection::Rectilinear;
    if (s == "fisheye" || s == "fisheye_equidistant" || s == "equidistant")
        return LensProjection::Equidistant;
    if (s == "fisheye_equisolid" || s == "equisolid")
        return LensProjection::Equisolid;
    if (s == "fisheye_orthographic" || s == "orthographic")
        return LensProjection::Orthographic;
    if (s == "fisheye_stereographic" || s == "stereographic")
        return LensProjection::Stereographic;
    throw Error(ErrorKind::UnsupportedModelKind, "unsupported lens projection '" + s + "'");
}

void LensfunEntry::check() const {
    size_t lo = 0, hi = 0;
    switch (model_kind) {
    case LensfunModelKind::Poly3: lo = hi = 1; break;
    case LensfunModelKind::Poly5: lo = hi = 2; break;
    case LensfunModelKind::PTLens: lo = hi = 3; break;
    default: lo = 0, hi = 1;
    }
    if (coefficients.size() < lo || coefficients.size() > hi)
        throw Error(ErrorKind::InvalidArgument, to_string(model_kind) + " takes " + std::to_string(hi) +
                                                    " coefficients, got " + std::to_string(coefficients.size()));
    for (double c : coefficients)
        if (!std::isfinite(c))
            throw Error(ErrorKind::InvalidArgument, "coefficients must be finite");
    if (!(focal_mm > 0.0) || !(sensor_width_mm > 0.0) || !(sensor_height_mm > 0.0))
        throw Error(ErrorKind::InvalidArgument, "focal and sensor size must be positive");
}

double LensfunEntry::distort(double ru, double *d_dru) const {
    const auto &k = coefficients;
    double rd = ru, d = 1.0;
    const double r2 = ru * ru;
    if (model_kind == LensfunModelKind::Poly5) {
        rd = ru * (1 + k[0] * r2 + k[1] * r2 * r2);
        d = 1 + 3 * k[0] * r2 + 5 * k[1] * r2 * r2;
    } else if (model_kind == LensfunModelKind::PTLens) {
        const double a = k[0], b = k[1], c = k[2];
        rd = ru * (a * r2 * ru + b * r2 + c * ru + 1 - a - b - c);
        d = 4 * a * r2 * ru + 3 * b * r2 + 2 * c * ru + 1 - a - b - c;
    } else if (!k.empty()) {
        rd = ru * (1 - k[0] + k[0] * r2);
        d = 1 - k[0] + 3 * k[0] * r2;
    }
    if (d_dru)
        *d_dru = d;
    return rd;
}

LensfunEntry lensfun_entry_from_json(const std::string &text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorKind::ParseError, std::string("lensfun entry: ") + e.what());
    }
    LensfunEntry e;
    try {
        e.model_kind = parse_lensfun_model_kind(j.at("model_kind").get<std::string>());
        e.projection = projection_of(e.model_kind);
        if (j.contains("projection")) {
            if (is_fisheye_kind(e.model_kind))
                throw Error(ErrorKind::InvalidArgument, "fisheye model kinds fix their own projection");
            e.projection = parse_lens_projection(j.at("projection").get<std::string>());
        }
        e.coefficients = j.value("coefficients", std::vector<double>{});
        e.focal_mm = j.at("focal_mm").get<double>();
        e.sensor_width_mm = j.value("sensor_width_mm", 36.0);
        e.sensor_height_mm = j.value("sensor_height_mm", 24.0);
        e.name = j.value("name", std::string());
    } catch (const nlohmann::json::exception &ex) {
        throw Error(ErrorKind::ParseError, std::string("lensfun entry: ") + ex.what());
    }
    e.check();
    return e;
}

std::vector<LensfunEntry> lensfun_entries_from_xml(const std::string &text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::read_xml(in, tree);
    } catch (const pt::xml_parser_error &e) {
        throw Error(ErrorKind::ParseError, std::string("lensfun xml: ") + e.what());
    }
    std::vector<LensfunEntry> out;
    const auto db = tree.get_child_optional("lensdatabase");
    if (!db)
        throw Error(ErrorKind::ParseError, "lensfun xml: missing <lensdatabase>");
    for (const auto &[tag, lens] : *db) {
        if (tag != "lens")
            continue;
        const std::string name = lens.get("maker", std::string()) + " " + lens.get("model", std::string());
        LensProjection proj;
        try {
            proj = parse_lens_projection(lens.get("type", std::string("rectilinear")));
        } catch (const Error &) {
            continue; // panoramic and equirectangular lenses
        }
        LensfunEntry base;
        base.name = name;
        base.projection = proj;
        try {
            sensor_from_crop(lens.get("cropfactor", 1.0), lens.get("aspect-ratio", std::string("3:2")), base);
        } catch (const pt::ptree_error &e) {
            throw Error(ErrorKind::ParseError, std::string("lensfun xml: ") + e.what());
        }
        const auto calib = lens.get_child_optional("calibration");
        if (!calib)
            continue;
        for (const auto &[ctag, dist] : *calib) {
            if (ctag != "distortion")
                continue;
            LensfunEntry e = base;
            try {
                const std::string model = dist.get<std::string>("<xmlattr>.model");
                if (model != "poly3" && model != "poly5" && model != "ptlens")
                    continue;
                e.model_kind = parse_lensfun_model_kind(model);
                e.focal_mm = dist.get<double>("<xmlattr>.focal");
                if (model == "poly3")
                    e.coefficients = {dist.get("<xmlattr>.k1", 0.0)};
                else if (model == "poly5")
                    e.coefficients = {dist.get("<xmlattr>.k1", 0.0), dist.get("<xmlattr>.k2", 0.0)};
                else
                    e.coefficients = {dist.get("<xmlattr>.a", 0.0), dist.get("<xmlattr>.b", 0.0),
                                      dist.get("<xmlattr>.c", 0.0)};
            } catch (const pt::ptree_error &ex) {
                throw Error(ErrorKind::ParseError, std::string("lensfun xml: ") + ex.what());
            }
            e.check();
            out.push_back(std::move(e));
        }
    }
    return out;
}

LensfunEntry read_lensfun_entry(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::FileNotFound, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '<') {
        const auto entries = lensfun_entries_from_xml(text);
        if (entries.empty())
            throw Error(ErrorKind::UnsupportedModelKind, path.string() + " has no supported distortion entry");
        return entries.front();
    }
    return lensfun_entry_from_json(text);
}

LensfunFit lensfun_to_eucm(const LensfunEntry &entry, const LensfunFitOptions &opts) {
    entry.check();
    if (opts.grid_stride < 1 || !(opts.px_per_mm > 0.0))
        throw Error(ErrorKind::InvalidArgument, "grid stride and resolution must be positive");
    const int w = std::max(2, static_cast<int>(std::lround(entry.sensor_width_mm * opts.px_per_mm)));
    const int h = std::max(2, static_cast<int>(std::lround(entry.sensor_height_mm * opts.px_per_mm)));
    const double half_short_px = 0.5 * std::min(w, h);
    const double half_short_mm = half_short_px / opts.px_per_mm;
    const Pixel center(0.5 * w, 0.5 * h);

    LensfunFit fit;
    Correspondences corrs;
    corrs.width = w;
    corrs.height = h;
    for (int v = 0; v < h; v += opts.grid_stride)
        for (int u = 0; u < w; u += opts.grid_stride) {
            const Pixel px(u + 0.5, v + 0.5);
            const Eigen::Vector2d m = (px - center) / half_short_px;
            const double rd = m.norm();
            // Newton on distort(ru) = rd, starting from the distorted radius.
            double ru = rd;
            bool ok = rd == 0.0;
            for (int it = 0; it < opts.newton_iterations && !ok; ++it) {
                double d;
                const double g = entry.distort(ru, &d) - rd;
                if (std::abs(g) <= opts.newton_tol) {
                    ok = true;
                    break;
                }
                if (!(d > 0.0))
                    break;
                ru -= g / d;
            }
            if (!ok || ru < 0.0 || !std::isfinite(ru)) {
                ++fit.newton_failures;
                continue;
            }
            const double theta = ideal_theta(entry.projection, ru * half_short_mm, entry.focal_mm);
            if (!std::isfinite(theta) || theta >= kPi) {
                ++fit.dropped;
                continue;
            }
            const double phi = std::atan2(m.y(), m.x());
            corrs.add(px, Ray(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)));
        }
    fit.num_points = corrs.size();
    if (corrs.size() < 8)
        throw Error(ErrorKind::DegenerateGeometry, "too few sensor points survive undistortion");

    fit.spec = fit_eucm(corrs, 1.0, center, &fit.active_bounds);
    fit.alpha = fit.spec.dist[0];
    fit.beta = fit.spec.dist[1];
    fit.focal_mm = fit.spec.fx / opts.px_per_mm;

    const Camera cam(fit.spec);
    double sum = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < corrs.size(); ++i) {
        try {
            const Ray r = cam.unproject(corrs.pixels[i]);
            sum += std::atan2(r.cross(corrs.rays[i]).norm(), r.dot(corrs.rays[i]));
            ++n;
        } catch (const Error &) {
            ++fit.dropped;
        }
    }
    fit.residual_deg = n ? sum / static_cast<double>(n) * 180.0 / kPi : 0.0;
    return fit;
}

} // namespace raycalib
