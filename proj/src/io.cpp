#include "raycalib/io.hpp"
#include "raycalib/error.hpp"

#include <fstream>
#include <sstream>

namespace raycalib {

Json spec_to_json(const CameraSpec &spec) {
    Json j;
    j["model"] = spec.model.to_string();
    j["width"] = spec.width;
    j["height"] = spec.height;
    j["fx"] = spec.fx;
    j["fy"] = spec.fy;
    j["cx"] = spec.cx;
    j["cy"] = spec.cy;
    j["dist"] = spec.dist;
    return j;
}

CameraSpec spec_from_json(const Json &j) {
    CameraSpec s;
    try {
        s.model = ModelId::parse(j.at("model").get<std::string>());
        s.width = j.at("width").get<int>();
        s.height = j.at("height").get<int>();
        s.fx = j.at("fx").get<double>();
        s.fy = j.at("fy").get<double>();
        s.cx = j.at("cx").get<double>();
        s.cy = j.at("cy").get<double>();
        s.dist = j.value("dist", std::vector<double>{});
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorKind::ParseError, std::string("camera spec: ") + e.what());
    }
    if (static_cast<int>(s.dist.size()) != s.model.num_dist)
        throw Error(ErrorKind::ParseError, "camera spec: " + s.model.to_string() + " needs " +
                                               std::to_string(s.model.num_dist) + " coefficients");
    return s;
}

Json result_to_json(const CalibrationResult &r) {
    Json j = spec_to_json(r.spec);
    j["gn_costs"] = r.gn_costs;
    j["active_bounds"] = r.active_bounds;
    j["warnings"] = r.warnings;
    j["algebraic"] = spec_to_json(r.algebraic_spec);
    j["ppoint_residual"] = r.ppoint_residual;
    j["num_correspondences"] = r.num_correspondences;
    j["dropped_rows"] = r.dropped_rows;
    j["inlier_ratio"] = r.inlier_ratio;
    return j;
}

Json report_to_json(const EvalReport &r) {
    return Json{{"ae_mean", r.ae_mean}, {"re_mean", r.re_mean}, {"hfov_err", r.hfov_err}, {"vfov_err", r.vfov_err},
                {"ef", r.ef},           {"ec", r.ec},           {"dropped_cells", r.dropped_cells}};
}

Json lensfun_fit_to_json(const LensfunFit &f) {
    Json j = spec_to_json(f.spec);
    j["alpha"] = f.alpha;
    j["beta"] = f.beta;
    j["focal_mm"] = f.focal_mm;
    j["residual_deg"] = f.residual_deg;
    j["num_points"] = f.num_points;
    j["newton_failures"] = f.newton_failures;
    j["dropped"] = f.dropped;
    j["active_bounds"] = f.active_bounds;
    return j;
}

std::string dump_json(const Json &j) { return j.dump(2) + "\n"; }

Json read_json_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::FileNotFound, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return Json::parse(ss.str());
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
    }
}

void write_text_file(const std::filesystem::path &path, const std::string &text) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorKind::FileNotFound, "cannot write " + path.string());
    out << text;
    if (!out)
        throw Error(ErrorKind::FileNotFound, "failed writing " + path.string());
}

CameraSpec read_spec(const std::filesystem::path &path) { return spec_from_json(read_json_file(path)); }

void write_spec(const CameraSpec &spec, const std::filesystem::path &path) {
    write_text_file(path, dump_json(spec_to_json(spec)));
}

} // namespace raycalib
