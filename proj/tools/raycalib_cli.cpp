#include "raycalib/calibrator.hpp"
#include "raycalib/error.hpp"
#include "raycalib/io.hpp"
#include "raycalib/lensfun.hpp"
#include "raycalib/metrics.hpp"
#include "raycalib/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <thread>

namespace fs = std::filesystem;
using namespace raycalib;

namespace {

constexpr const char *kVersion = "0.1.0";
constexpr double kDeg = std::numbers::pi / 180.0;

int worker_count() {
    int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char *env = std::getenv("RAYCALIB_THREADS")) {
        try {
            n = std::stoi(env);
        } catch (const std::exception &) {
            throw Error(ErrorKind::InvalidArgument, "RAYCALIB_THREADS must be a positive integer");
        }
        if (n < 1)
            throw Error(ErrorKind::InvalidArgument, "RAYCALIB_THREADS must be a positive integer");
    }
    return n;
}

// Runs fn(i) for i in [0, n) on the worker pool; fn must not throw.
template <typename Fn> void parallel_for(size_t n, Fn fn) {
    const size_t workers = std::min(n, static_cast<size_t>(worker_count()));
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (size_t i = next++; i < n; i = next++)
                fn(i);
        });
    for (auto &t : pool)
        t.join();
}

std::string index_name(size_t i, size_t n) {
    const int digits = std::max(4, static_cast<int>(std::to_string(n > 0 ? n - 1 : 0).size()));
    std::string s = std::to_string(i);
    return std::string(static_cast<size_t>(std::max(0, digits - static_cast<int>(s.size()))), '0') + s;
}

uint64_t splitmix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::string abs_path(const std::string &p) { return fs::weakly_canonical(fs::absolute(p)).string(); }

double median(std::vector<double> v) {
    if (v.empty())
        return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

Json error_json(const std::string &kind, const std::string &module, const std::string &message) {
    return Json{{"error", {{"kind", kind}, {"module", module}, {"message", message}}}};
}

Json error_json(const Error &e) {
    return error_json(std::string(error_kind_name(e.kind())), std::string(error_module(e.kind())), e.what());
}

// Collects the files a command writes, relative to its output directory.
class Output {
public:
    explicit Output(std::optional<fs::path> dir) : dir_(std::move(dir)) {}

    bool to_dir() const { return dir_.has_value(); }

    // Created up front so workers never race on directory creation.
    void mkdirs(std::initializer_list<const char *> subdirs) const {
        for (const char *d : subdirs)
            fs::create_directories(*dir_ / d);
    }

    void text(const std::string &rel, const std::string &content) {
        write_text_file(*dir_ / rel, content);
        record(rel);
    }
    void field(const std::string &rel, const FovField &f) {
        fs::create_directories((*dir_ / rel).parent_path());
        write_aff1(f, *dir_ / rel);
        record(rel);
    }
    void manifest(const std::string &command, const Json &config, uint64_t seed, const std::vector<std::string> &inputs) {
        std::sort(files_.begin(), files_.end());
        Json m{{"tool", "raycalib"}, {"version", kVersion}, {"command", command}, {"config", config},
               {"seed", seed},       {"inputs", inputs},    {"outputs", files_}};
        write_text_file(*dir_ / "manifest.json", dump_json(m));
    }

private:
    void record(const std::string &rel) {
        std::lock_guard<std::mutex> lock(mu_);
        files_.push_back(rel);
    }

    std::optional<fs::path> dir_;
    std::vector<std::string> files_;
    std::mutex mu_;
};

// Packs a per-cell scalar pair into a two-channel field for external viewers.
FovField pack_maps(int w, int h, const std::vector<double> &a, const std::vector<double> &b) {
    FovField f(w, h);
    for (size_t i = 0; i < f.size(); ++i)
        f.theta[i] = Theta(a[i], b[i]);
    return f;
}

// ---- fit ----

struct FitConfig {
    std::string input;
    std::string model;
    int stride = 1;
    bool ransac = false;
    int iters = 500;
    double thresh_deg = 1.0;
    uint64_t seed = 0;
    bool dump = false;

    Json to_json() const {
        return Json{{"input", input},           {"model", model}, {"stride", stride}, {"ransac", ransac},
                    {"iters", iters},           {"thresh_deg", thresh_deg}, {"seed", seed}, {"dump_per_pixel", dump}};
    }
    static FitConfig from_json(const Json &j) {
        FitConfig c;
        c.input = j.at("input");
        c.model = j.at("model");
        c.stride = j.at("stride");
        c.ransac = j.at("ransac");
        c.iters = j.at("iters");
        c.thresh_deg = j.at("thresh_deg");
        c.seed = j.at("seed");
        c.dump = j.at("dump_per_pixel");
        return c;
    }
};

CalibrationResult fit_field(const FovField &field, const ModelId &model, const FitConfig &c) {
    if (!c.ransac)
        return calibrate(field, model, c.stride);
    RansacOptions opts;
    opts.iterations = c.iters;
    opts.threshold = c.thresh_deg * kDeg;
    opts.seed = c.seed;
    return calibrate_ransac(field, model, opts, c.stride);
}

void dump_fit(Output &out, const std::string &stem, const FovField &field, const CameraSpec &spec) {
    FovField fitted = field_from_spec(spec, field.stride);
    FovField residual = fitted;
    for (size_t i = 0; i < residual.size(); ++i)
        residual.theta[i] = fitted.theta[i] - field.theta[i];
    out.field("per_pixel/" + stem + "_theta.aff1", fitted);
    out.field("per_pixel/" + stem + "_residual.aff1", residual);
}

std::vector<fs::path> list_files(const fs::path &dir, std::initializer_list<const char *> exts) {
    std::vector<fs::path> out;
    for (const auto &e : fs::directory_iterator(dir))
        if (e.is_regular_file())
            for (const char *x : exts)
                if (e.path().extension() == x)
                    out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

int run_fit(const FitConfig &c, Output &out) {
    const ModelId model = ModelId::parse(c.model);
    if (c.stride < 1 || c.iters < 1 || !(c.thresh_deg > 0.0))
        throw Error(ErrorKind::InvalidArgument, "stride, iters and thresh-deg must be positive");
    const fs::path in(c.input);
    if (!fs::exists(in))
        throw Error(ErrorKind::FileNotFound, "no such file or directory: " + c.input);

    if (!fs::is_directory(in)) {
        const FovField field = read_field(in);
        const CalibrationResult res = fit_field(field, model, c);
        if (!out.to_dir()) {
            std::cout << dump_json(result_to_json(res));
            return 0;
        }
        out.text("result.json", dump_json(result_to_json(res)));
        out.text("spec.json", dump_json(spec_to_json(res.spec)));
        if (c.dump)
            dump_fit(out, "field", field, res.spec);
        out.manifest("fit", c.to_json(), c.seed, {c.input});
        return 0;
    }

    if (!out.to_dir())
        throw Error(ErrorKind::InvalidArgument, "fitting a directory needs --out");
    const fs::path fields_dir = fs::is_directory(in / "fields") ? in / "fields" : in;
    const auto files = list_files(fields_dir, {".aff1", ".csv"});
    if (files.empty())
        throw Error(ErrorKind::FileNotFound, "no .aff1 or .csv fields in " + fields_dir.string());
    out.mkdirs({"results", "specs", "per_pixel"});
    std::vector<Json> failures(files.size());
    parallel_for(files.size(), [&](size_t i) {
        const std::string stem = files[i].stem().string();
        try {
            const FovField field = read_field(files[i]);
            const CalibrationResult res = fit_field(field, model, c);
            out.text("results/" + stem + ".json", dump_json(result_to_json(res)));
            out.text("specs/" + stem + ".json", dump_json(spec_to_json(res.spec)));
            if (c.dump)
                dump_fit(out, stem, field, res.spec);
        } catch (const Error &e) {
            failures[i] = Json{{"name", stem}, {"error", error_json(e)["error"]}};
        }
    });
    Json summary{{"fitted", 0}, {"failures", Json::array()}};
    for (const auto &f : failures)
        if (f.is_null())
            summary["fitted"] = summary["fitted"].get<int>() + 1;
        else
            summary["failures"].push_back(f);
    out.text("summary.json", dump_json(summary));
    out.manifest("fit", c.to_json(), c.seed, {c.input});
    return 0;
}

// ---- synth ----

struct SynthConfig {
    std::string kind = "opg";
    int n = 100;
    int size = 64;
    uint64_t seed = 0;
    double noise_deg = 0.0;
    bool edit = false;

    Json to_json() const {
        return Json{{"kind", kind}, {"n", n}, {"size", size}, {"seed", seed}, {"noise_deg", noise_deg}, {"edit", edit}};
    }
    static SynthConfig from_json(const Json &j) {
        SynthConfig c;
        c.kind = j.at("kind");
        c.n = j.at("n");
        c.size = j.at("size");
        c.seed = j.at("seed");
        c.noise_deg = j.at("noise_deg");
        c.edit = j.at("edit");
        return c;
    }
};

int run_synth(const SynthConfig &c, Output &out) {
    if (!out.to_dir())
        throw Error(ErrorKind::InvalidArgument, "synth needs --out");
    if (c.n < 1 || c.size < 2 || !(c.noise_deg >= 0.0))
        throw Error(ErrorKind::InvalidArgument, "n >= 1, size >= 2 and noise-deg >= 0 are required");
    IntrinsicsSampler sampler({parse_dataset_kind(c.kind), c.size, c.seed});
    std::mt19937_64 edit_rng(splitmix(c.seed ^ 0xed17ULL));
    std::vector<CameraSpec> specs;
    for (int i = 0; i < c.n; ++i) {
        CameraSpec s = sampler.next();
        if (c.edit)
            s = apply_edit(s, sample_edit(s, edit_rng));
        specs.push_back(s);
    }
    out.mkdirs({"fields", "specs"});
    std::vector<std::optional<Error>> errors(specs.size());
    parallel_for(specs.size(), [&](size_t i) {
        const std::string name = index_name(i, specs.size());
        try {
            FovField field = field_from_spec(specs[i], 1);
            if (c.noise_deg > 0.0)
                field = add_noise(field, c.noise_deg, splitmix(c.seed + 1 + i));
            out.field("fields/" + name + ".aff1", field);
            out.text("specs/" + name + ".json", dump_json(spec_to_json(specs[i])));
        } catch (const Error &e) {
            errors[i] = e;
        }
    });
    for (const auto &e : errors)
        if (e)
            throw *e;
    out.manifest("synth", c.to_json(), c.seed, {});
    return 0;
}

// ---- eval ----

struct EvalConfig {
    std::string est;
    std::string gt;
    int stride = 1;
    bool edited = false;
    bool dump = false;

    Json to_json() const {
        return Json{{"est", est}, {"gt", gt}, {"stride", stride}, {"edited", edited}, {"dump_per_pixel", dump}};
    }
    static EvalConfig from_json(const Json &j) {
        EvalConfig c;
        c.est = j.at("est");
        c.gt = j.at("gt");
        c.stride = j.at("stride");
        c.edited = j.at("edited");
        c.dump = j.at("dump_per_pixel");
        return c;
    }
};

std::map<std::string, fs::path> spec_files(const std::string &dir) {
    const fs::path d(dir);
    if (!fs::is_directory(d))
        throw Error(ErrorKind::FileNotFound, "no such directory: " + dir);
    const fs::path specs = fs::is_directory(d / "specs") ? d / "specs" : d;
    std::map<std::string, fs::path> out;
    for (const auto &p : list_files(specs, {".json"}))
        out[p.stem().string()] = p;
    return out;
}

int run_eval(const EvalConfig &c, Output &out) {
    if (c.stride < 1)
        throw Error(ErrorKind::InvalidArgument, "stride must be >= 1");
    const auto est = spec_files(c.est), gt = spec_files(c.gt);
    std::vector<std::string> names, missing;
    for (const auto &[name, _] : gt)
        (est.count(name) ? names : missing).push_back(name);
    for (const auto &[name, _] : est)
        if (!gt.count(name))
            missing.push_back(name);
    std::sort(missing.begin(), missing.end());

    if (c.dump && out.to_dir())
        out.mkdirs({"per_pixel"});
    std::vector<std::optional<EvalReport>> reports(names.size());
    std::vector<Json> failures(names.size());
    parallel_for(names.size(), [&](size_t i) {
        try {
            const CameraSpec g = read_spec(gt.at(names[i])), e = read_spec(est.at(names[i]));
            reports[i] = evaluate(g, e, c.stride);
            if (c.dump && out.to_dir()) {
                const auto ae = angular_error_map(g, e, c.stride), re = reproj_error_map(g, e, c.stride);
                const int w = (g.width + c.stride - 1) / c.stride, h = (g.height + c.stride - 1) / c.stride;
                out.field("per_pixel/" + names[i] + "_errors.aff1", pack_maps(w, h, ae, re));
            }
        } catch (const Error &e) {
            failures[i] = Json{{"name", names[i]}, {"error", error_json(e)["error"]}};
        }
    });

    Json records = Json::array(), failed = Json::array();
    std::vector<double> ae, re, hf, vf, ef, ec;
    std::string csv = "name," + eval_csv_header() + "\n";
    for (size_t i = 0; i < names.size(); ++i) {
        if (!reports[i]) {
            failed.push_back(failures[i]);
            continue;
        }
        const EvalReport &r = *reports[i];
        Json rec = report_to_json(r);
        rec["name"] = names[i];
        records.push_back(rec);
        csv += names[i] + "," + eval_csv_row(r) + "\n";
        ae.push_back(r.ae_mean);
        re.push_back(r.re_mean);
        hf.push_back(r.hfov_err);
        vf.push_back(r.vfov_err);
        ef.push_back(r.ef);
        ec.push_back(r.ec);
    }
    Json medians{{"ae_mean", median(ae)}, {"re_mean", median(re)}, {"hfov_err", median(hf)}, {"vfov_err", median(vf)}};
    if (c.edited) {
        medians["ef"] = median(ef);
        medians["ec"] = median(ec);
    }
    Json report{{"num_pairs", names.size()}, {"medians", medians}, {"missing", missing}, {"failures", failed},
                {"images", records}};
    if (!ae.empty()) {
        const auto a = auc(ae, {1.0, 5.0, 10.0});
        report["auc"] = Json{{"1", a[0]}, {"5", a[1]}, {"10", a[2]}};
    }
    if (!out.to_dir()) {
        std::cout << dump_json(report);
        return 0;
    }
    out.text("report.json", dump_json(report));
    out.text("report.csv", csv);
    out.manifest("eval", c.to_json(), 0, {c.est, c.gt});
    return 0;
}

// ---- convert ----

struct ConvertConfig {
    std::string input;
    std::string model;
    bool fix_focal = false;
    int stride = 4;

    Json to_json() const { return Json{{"input", input}, {"model", model}, {"fix_focal", fix_focal}, {"stride", stride}}; }
    static ConvertConfig from_json(const Json &j) {
        ConvertConfig c;
        c.input = j.at("input");
        c.model = j.at("model");
        c.fix_focal = j.at("fix_focal");
        c.stride = j.at("stride");
        return c;
    }
};

int run_convert(const ConvertConfig &c, Output &out) {
    const CameraSpec src = read_spec(c.input);
    const auto report = validate_spec(src);
    if (!report.ok())
        throw Error(ErrorKind::InvalidArgument, "source spec is invalid: " + report.violations.front());
    const CameraSpec dst = convert_model(src, ModelId::parse(c.model), c.fix_focal, c.stride);
    Json j = spec_to_json(dst);
    const auto ae = angular_error_grid(src, dst, c.stride);
    j["residual"] = Json{{"ae_deg", ae.mean}, {"re_px", reproj_error(src, dst, c.stride)}, {"dropped_cells", ae.dropped}};
    if (!out.to_dir()) {
        std::cout << dump_json(j);
        return 0;
    }
    out.text("spec.json", dump_json(j));
    out.manifest("convert", c.to_json(), 0, {c.input});
    return 0;
}

// ---- lensfun ----

struct LensfunConfig {
    std::string input;
    int stride = 20;
    double px_per_mm = 100.0;

    Json to_json() const { return Json{{"input", input}, {"stride", stride}, {"px_per_mm", px_per_mm}}; }
    static LensfunConfig from_json(const Json &j) {
        LensfunConfig c;
        c.input = j.at("input");
        c.stride = j.at("stride");
        c.px_per_mm = j.at("px_per_mm");
        return c;
    }
};

int run_lensfun(const LensfunConfig &c, Output &out) {
    const LensfunEntry entry = read_lensfun_entry(c.input);
    LensfunFitOptions opts;
    opts.grid_stride = c.stride;
    opts.px_per_mm = c.px_per_mm;
    Json j = lensfun_fit_to_json(lensfun_to_eucm(entry, opts));
    if (!entry.name.empty())
        j["name"] = entry.name;
    if (!out.to_dir()) {
        std::cout << dump_json(j);
        return 0;
    }
    out.text("eucm.json", dump_json(j));
    out.manifest("lensfun", c.to_json(), 0, {c.input});
    return 0;
}

// ---- replay ----

int run_replay(const std::string &manifest_path, std::optional<fs::path> out_dir) {
    const Json m = read_json_file(manifest_path);
    if (!out_dir)
        out_dir = fs::absolute(manifest_path).parent_path();
    Output out(out_dir);
    try {
        const std::string cmd = m.at("command");
        const Json &cfg = m.at("config");
        if (cmd == "fit")
            return run_fit(FitConfig::from_json(cfg), out);
        if (cmd == "synth")
            return run_synth(SynthConfig::from_json(cfg), out);
        if (cmd == "eval")
            return run_eval(EvalConfig::from_json(cfg), out);
        if (cmd == "convert")
            return run_convert(ConvertConfig::from_json(cfg), out);
        if (cmd == "lensfun")
            return run_lensfun(LensfunConfig::from_json(cfg), out);
        throw Error(ErrorKind::ParseError, "manifest names unknown command '" + cmd + "'");
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorKind::ParseError, "manifest: " + std::string(e.what()));
    }
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Camera calibration from per-pixel FoV fields"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string out_dir;
    auto add_out = [&](CLI::App *sub, bool required) {
        auto *opt = sub->add_option("--out", out_dir, "output directory (manifest.json is written there)");
        if (required)
            opt->required();
    };

    FitConfig fit;
    auto *fit_cmd = app.add_subcommand("fit", "fit a camera model to a field file or a directory of fields");
    fit_cmd->add_option("field", fit.input, "AFF1 or CSV field, or a dataset directory")->required();
    fit_cmd->add_option("--model", fit.model, "model string, e.g. kb:4")->required();
    fit_cmd->add_option("--stride", fit.stride, "use every n-th cell");
    fit_cmd->add_flag("--ransac", fit.ransac, "robust fit from minimal samples");
    fit_cmd->add_option("--iters", fit.iters, "ransac iterations");
    fit_cmd->add_option("--thresh-deg", fit.thresh_deg, "ransac inlier threshold in degrees");
    fit_cmd->add_option("--seed", fit.seed, "ransac seed");
    fit_cmd->add_flag("--dump-per-pixel", fit.dump, "write fitted and residual theta grids as AFF1");
    add_out(fit_cmd, false);

    SynthConfig synth;
    auto *synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset of specs and fields");
    synth_cmd->add_option("--kind", synth.kind, "opp, opr, opd or opg");
    synth_cmd->add_option("--n", synth.n, "number of cameras");
    synth_cmd->add_option("--size", synth.size, "square image side in pixels");
    synth_cmd->add_option("--seed", synth.seed, "sampler seed");
    synth_cmd->add_option("--noise-deg", synth.noise_deg, "Gaussian noise on theta, degrees");
    synth_cmd->add_flag("--edit", synth.edit, "stretch and crop each image");
    add_out(synth_cmd, true);

    EvalConfig eval;
    auto *eval_cmd = app.add_subcommand("eval", "compare estimated specs against ground truth");
    eval_cmd->add_option("est", eval.est, "directory of estimated specs")->required();
    eval_cmd->add_option("gt", eval.gt, "directory of ground-truth specs")->required();
    eval_cmd->add_option("--stride", eval.stride, "grid stride in pixels");
    eval_cmd->add_flag("--edited", eval.edited, "report focal and principal point errors");
    eval_cmd->add_flag("--dump-per-pixel", eval.dump, "write per-pixel AE/RE grids as AFF1");
    add_out(eval_cmd, false);

    ConvertConfig conv;
    auto *conv_cmd = app.add_subcommand("convert", "map a spec onto another camera model");
    conv_cmd->add_option("spec", conv.input, "source spec JSON")->required();
    conv_cmd->add_option("--model", conv.model, "destination model string")->required();
    conv_cmd->add_flag("--fix-focal", conv.fix_focal, "hold focal, aspect and principal point");
    conv_cmd->add_option("--stride", conv.stride, "grid stride in pixels");
    add_out(conv_cmd, false);

    LensfunConfig lf;
    auto *lf_cmd = app.add_subcommand("lensfun", "map a LensFun distortion entry to EUCM");
    lf_cmd->add_option("entry", lf.input, "JSON entry or LensFun XML")->required();
    lf_cmd->add_option("--stride", lf.stride, "sensor grid stride in virtual pixels");
    lf_cmd->add_option("--px-per-mm", lf.px_per_mm, "virtual sensor resolution");
    add_out(lf_cmd, false);

    std::string manifest;
    auto *replay_cmd = app.add_subcommand("replay", "rerun the command recorded in a manifest");
    replay_cmd->add_option("manifest", manifest, "manifest.json")->required();
    add_out(replay_cmd, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        if (e.get_exit_code() == 0)
            return app.exit(e);
        std::cerr << dump_json(error_json("InvalidArgument", "cli", e.what()));
        return 2;
    }

    try {
        const std::optional<fs::path> dir = out_dir.empty() ? std::nullopt : std::optional<fs::path>(out_dir);
        Output out(dir);
        if (*fit_cmd) {
            if (fs::exists(fit.input))
                fit.input = abs_path(fit.input);
            return run_fit(fit, out);
        }
        if (*synth_cmd)
            return run_synth(synth, out);
        if (*eval_cmd) {
            eval.est = abs_path(eval.est);
            eval.gt = abs_path(eval.gt);
            return run_eval(eval, out);
        }
        if (*conv_cmd) {
            if (fs::exists(conv.input))
                conv.input = abs_path(conv.input);
            return run_convert(conv, out);
        }
        if (*lf_cmd) {
            if (fs::exists(lf.input))
                lf.input = abs_path(lf.input);
            return run_lensfun(lf, out);
        }
        return run_replay(manifest, dir);
    } catch (const Error &e) {
        std::cerr << dump_json(error_json(e));
        return is_input_error(e.kind()) ? 2 : 3;
    } catch (const fs::filesystem_error &e) {
        std::cerr << dump_json(error_json("FileNotFound", "cli", e.what()));
        return 2;
    } catch (const std::exception &e) {
        std::cerr << dump_json(error_json("InternalError", "cli", e.what()));
        return 3;
    }
}
