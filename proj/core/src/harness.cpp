#include "peakinf/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "peakinf/errors.hpp"
#include "peakinf/peaks.hpp"
#include "peakinf/randomized.hpp"
#include "peakinf/special.hpp"

namespace peakinf {

using json = nlohmann::json;

const char* method_name(Method m) noexcept {
    switch (m) {
        case Method::standard: return "standard";
        case Method::carve: return "carve";
        case Method::split: return "split";
    }
    return "unknown";
}

const char* statistic_name(Statistic s) noexcept {
    switch (s) {
        case Statistic::tg_oracle: return "tg_oracle";
        case Statistic::tg_unshifted: return "tg_unshifted";
        case Statistic::naive: return "naive";
        case Statistic::tg_plugin: return "tg_plugin";
        case Statistic::wald_goldilocks: return "wald_goldilocks";
        case Statistic::wald_marginal: return "wald_marginal";
        case Statistic::wald_conditional: return "wald_conditional";
        case Statistic::wald_plugin: return "wald_plugin";
        case Statistic::soft_tg: return "soft_tg";
        case Statistic::carve_wald: return "carve_wald";
        case Statistic::split_height: return "split_height";
        case Statistic::split_wald: return "split_wald";
    }
    return "unknown";
}

const std::vector<Statistic>& method_statistics(Method m) {
    static const std::vector<Statistic> standard{
        Statistic::tg_oracle,       Statistic::tg_unshifted,  Statistic::naive,
        Statistic::tg_plugin,       Statistic::wald_goldilocks, Statistic::wald_marginal,
        Statistic::wald_conditional, Statistic::wald_plugin};
    static const std::vector<Statistic> carve{Statistic::soft_tg, Statistic::carve_wald};
    static const std::vector<Statistic> split{Statistic::split_height, Statistic::split_wald};
    switch (m) {
        case Method::standard: return standard;
        case Method::carve: return carve;
        case Method::split: return split;
    }
    return standard;
}

// ---------------------------------------------------------------- config

namespace {

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::configuration, msg); }

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) bad(where + " must be an object");
    for (const auto& item : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; }))
            bad("unknown key '" + item.key() + "' in " + where);
    }
}

double num(const json& j, const std::string& where) {
    if (!j.is_number()) bad(where + " must be a number");
    return j.get<double>();
}

long long integer(const json& j, const std::string& where) {
    if (!j.is_number_integer()) bad(where + " must be an integer");
    return j.get<long long>();
}

bool boolean(const json& j, const std::string& where) {
    if (!j.is_boolean()) bad(where + " must be true or false");
    return j.get<bool>();
}

std::string str(const json& j, const std::string& where) {
    if (!j.is_string()) bad(where + " must be a string");
    return j.get<std::string>();
}

Vec vec(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) bad(where + " must be a non-empty array of numbers");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = num(j[i], where);
    return v;
}

std::vector<double> numbers(const json& j, const std::string& where) {
    const Vec v = vec(j, where);
    return {v.data(), v.data() + v.size()};
}

Method parse_method(const std::string& s) {
    if (s == "standard") return Method::standard;
    if (s == "carve") return Method::carve;
    if (s == "split") return Method::split;
    bad("unknown method '" + s + "'");
}

const char* mode_name(ThresholdMode m) {
    switch (m) {
        case ThresholdMode::offset: return "offset";
        case ThresholdMode::tg: return "tg";
        case ThresholdMode::explicit_u: return "explicit";
    }
    return "offset";
}

const char* kind_name(SignalKind k) {
    switch (k) {
        case SignalKind::single_bump: return "single_bump";
        case SignalKind::bumps: return "bumps";
        case SignalKind::null: return "null";
    }
    return "null";
}

SignalSpec build_signal(const ExperimentConfig& c, double mu0) {
    SignalSpec s;
    s.domain = c.box;
    s.taper_order = c.taper_order;
    s.taper_radius = c.taper_radius;
    if (c.signal_kind == SignalKind::single_bump) {
        Bump b;
        b.center = c.center.size() ? c.center : Vec(0.5 * (c.box.lo + c.box.hi));
        b.amplitude = mu0;
        b.width = c.bump_width > 0.0 ? c.bump_width : c.kernel.length_scale;
        s.bumps.push_back(b);
    } else if (c.signal_kind == SignalKind::bumps) {
        s.bumps = c.bumps;
    }
    return s;
}

bool randomized(const ExperimentConfig& c) { return c.has_method(Method::carve) || c.has_method(Method::split); }

}  // namespace

bool ExperimentConfig::has_method(Method m) const { return std::find(methods.begin(), methods.end(), m) != methods.end(); }

void ExperimentConfig::validate() const {
    kernel.validate();
    const int d = kernel.dimension;
    if (box.lo.size() != d || box.hi.size() != d) bad("grid box dimension does not match the kernel");
    if ((box.hi - box.lo).minCoeff() <= 0.0) bad("grid box must have hi > lo on every axis");
    if (static_cast<int>(counts.size()) != d) bad("grid counts dimension does not match the kernel");
    for (int n : counts)
        if (n < 5) bad("grid needs at least 5 points per axis");
    if (replicates < 1) bad("replicates must be at least 1");
    if (threads < 1) bad("threads must be at least 1");
    if (methods.empty()) bad("at least one method is required");
    if (!(gamma > 0.0 && std::isfinite(gamma))) bad("gamma must be positive");
    if (!(inference_alpha > 0.0 && inference_alpha < 1.0)) bad("inference alpha must lie in (0,1)");
    if (!(eps_constant >= kMinEpsConstant)) bad("eps_constant must exceed 4");
    if (!(max_failure_fraction >= 0.0 && max_failure_fraction <= 1.0)) bad("max_failure_fraction must lie in [0,1]");
    if (null_radius && !(*null_radius >= 0.0)) bad("null_radius must be non-negative");
    if (u_offsets.empty()) bad("sweep.u_offsets must be non-empty");
    if (signal_kind == SignalKind::single_bump) {
        if (mu0.empty()) bad("sweep.mu0 must be non-empty");
        if (center.size() && center.size() != d) bad("signal.center dimension does not match the kernel");
    } else if (threshold_mode == ThresholdMode::offset) {
        bad("offset thresholds need a single_bump signal");
    }
    for (const auto& b : bumps)
        if (b.center.size() != d) bad("bump centre dimension does not match the kernel");
    switch (threshold_mode) {
        case ThresholdMode::offset:
            if (v)
                for (double m : mu0)
                    for (double o : u_offsets)
                        if (*v > m + o) bad("detection.v must not exceed u = mu0 + offset");
            break;
        case ThresholdMode::tg: {
            if (!v || !(*v > 0.0)) bad("tg thresholds need detection.v > 0");
            DetectionConfig dc;
            dc.v = *v;
            dc.alpha = detection_alpha;
            dc.dimension = d;
            dc.validate();
            break;
        }
        case ThresholdMode::explicit_u:
            if (!explicit_u || !std::isfinite(*explicit_u)) bad("explicit thresholds need detection.u");
            if (v && *v > *explicit_u) bad("detection.v must not exceed detection.u");
            break;
    }
    const Grid grid(box, counts);
    if (grid.size() > covariance_cap) bad("grid has more points than covariance_cap");
    if (spacing_ratio > 0.0) grid.check_spacing(kernel, spacing_ratio);
    if (signal_kind == SignalKind::single_bump) {
        for (double m : mu0) build_signal(*this, m).validate();
    } else {
        build_signal(*this, 0.0).validate();
    }
}

ExperimentConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        bad(std::string("invalid JSON: ") + e.what());
    }
    check_keys(j, {"name", "kernel", "signal", "grid", "detection", "inference", "methods", "gamma", "sweep",
                   "replicates", "seed", "threads", "eps_constant", "null_radius", "output", "max_failure_fraction"},
               "config");
    ExperimentConfig c;
    if (j.contains("name")) c.name = str(j["name"], "name");
    if (j.contains("kernel")) {
        const auto& k = j["kernel"];
        check_keys(k, {"family", "length_scale", "dimension"}, "kernel");
        if (k.contains("family") && str(k["family"], "kernel.family") != "squared_exponential")
            bad("kernel.family must be squared_exponential");
        if (k.contains("length_scale")) c.kernel.length_scale = num(k["length_scale"], "kernel.length_scale");
        if (k.contains("dimension")) c.kernel.dimension = static_cast<int>(integer(k["dimension"], "kernel.dimension"));
    }
    const int d = c.kernel.dimension;
    c.box.lo = Vec::Constant(std::max(d, 1), -1.0);
    c.box.hi = Vec::Constant(std::max(d, 1), 1.0);
    c.counts.assign(static_cast<std::size_t>(std::max(d, 1)), 48);
    if (j.contains("grid")) {
        const auto& g = j["grid"];
        check_keys(g, {"lo", "hi", "counts", "spacing_ratio", "covariance_cap"}, "grid");
        if (g.contains("lo")) c.box.lo = vec(g["lo"], "grid.lo");
        if (g.contains("hi")) c.box.hi = vec(g["hi"], "grid.hi");
        if (g.contains("counts")) {
            if (!g["counts"].is_array()) bad("grid.counts must be an array");
            c.counts.clear();
            for (const auto& n : g["counts"]) c.counts.push_back(static_cast<int>(integer(n, "grid.counts")));
        }
        if (g.contains("spacing_ratio")) c.spacing_ratio = num(g["spacing_ratio"], "grid.spacing_ratio");
        if (g.contains("covariance_cap")) {
            const auto cap = integer(g["covariance_cap"], "grid.covariance_cap");
            if (cap < 1) bad("grid.covariance_cap must be positive");
            c.covariance_cap = static_cast<std::size_t>(cap);
        }
    }
    if (j.contains("signal")) {
        const auto& s = j["signal"];
        check_keys(s, {"kind", "center", "width", "bumps", "taper_order", "taper_radius"}, "signal");
        if (s.contains("kind")) {
            const std::string k = str(s["kind"], "signal.kind");
            if (k == "single_bump") c.signal_kind = SignalKind::single_bump;
            else if (k == "bumps") c.signal_kind = SignalKind::bumps;
            else if (k == "null") c.signal_kind = SignalKind::null;
            else bad("unknown signal.kind '" + k + "'");
        }
        if (s.contains("center")) c.center = vec(s["center"], "signal.center");
        if (s.contains("width")) c.bump_width = num(s["width"], "signal.width");
        if (s.contains("taper_order")) c.taper_order = static_cast<int>(integer(s["taper_order"], "signal.taper_order"));
        if (s.contains("taper_radius")) c.taper_radius = num(s["taper_radius"], "signal.taper_radius");
        if (s.contains("bumps")) {
            if (!s["bumps"].is_array()) bad("signal.bumps must be an array");
            for (const auto& b : s["bumps"]) {
                check_keys(b, {"center", "amplitude", "width"}, "signal.bumps[]");
                Bump bump;
                if (!b.contains("center") || !b.contains("amplitude")) bad("each bump needs center and amplitude");
                bump.center = vec(b["center"], "bump.center");
                bump.amplitude = num(b["amplitude"], "bump.amplitude");
                bump.width = b.contains("width") ? num(b["width"], "bump.width") : c.kernel.length_scale;
                c.bumps.push_back(bump);
            }
        }
    }
    if (j.contains("detection")) {
        const auto& t = j["detection"];
        check_keys(t, {"mode", "v", "alpha", "u"}, "detection");
        if (t.contains("mode")) {
            const std::string m = str(t["mode"], "detection.mode");
            if (m == "offset") c.threshold_mode = ThresholdMode::offset;
            else if (m == "tg") c.threshold_mode = ThresholdMode::tg;
            else if (m == "explicit") c.threshold_mode = ThresholdMode::explicit_u;
            else bad("unknown detection.mode '" + m + "'");
        }
        if (t.contains("v") && !t["v"].is_null()) c.v = num(t["v"], "detection.v");
        if (t.contains("alpha")) c.detection_alpha = num(t["alpha"], "detection.alpha");
        if (t.contains("u") && !t["u"].is_null()) c.explicit_u = num(t["u"], "detection.u");
    }
    if (j.contains("inference")) {
        const auto& i = j["inference"];
        check_keys(i, {"alpha", "carve_height"}, "inference");
        if (i.contains("alpha")) c.inference_alpha = num(i["alpha"], "inference.alpha");
        if (i.contains("carve_height")) c.carve_height = boolean(i["carve_height"], "inference.carve_height");
    }
    if (j.contains("methods")) {
        if (!j["methods"].is_array()) bad("methods must be an array");
        c.methods.clear();
        for (const auto& m : j["methods"]) {
            const Method mm = parse_method(str(m, "methods[]"));
            if (!c.has_method(mm)) c.methods.push_back(mm);
        }
        std::sort(c.methods.begin(), c.methods.end());
    }
    if (j.contains("gamma")) c.gamma = num(j["gamma"], "gamma");
    if (j.contains("sweep")) {
        const auto& s = j["sweep"];
        check_keys(s, {"mu0", "u_offsets"}, "sweep");
        if (s.contains("mu0")) c.mu0 = numbers(s["mu0"], "sweep.mu0");
        if (s.contains("u_offsets")) c.u_offsets = numbers(s["u_offsets"], "sweep.u_offsets");
    }
    if (j.contains("replicates")) {
        const auto r = integer(j["replicates"], "replicates");
        if (r < 1 || r > std::numeric_limits<std::uint32_t>::max()) bad("replicates out of range");
        c.replicates = static_cast<std::size_t>(r);
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) bad("seed must be a non-negative integer");
        c.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("threads")) c.threads = static_cast<int>(integer(j["threads"], "threads"));
    if (j.contains("eps_constant")) c.eps_constant = num(j["eps_constant"], "eps_constant");
    if (j.contains("null_radius") && !j["null_radius"].is_null()) c.null_radius = num(j["null_radius"], "null_radius");
    if (j.contains("max_failure_fraction")) c.max_failure_fraction = num(j["max_failure_fraction"], "max_failure_fraction");
    if (j.contains("output")) {
        const auto& o = j["output"];
        check_keys(o, {"dir", "pivots"}, "output");
        if (o.contains("dir")) c.output_dir = str(o["dir"], "output.dir");
        if (o.contains("pivots")) c.write_pivots = boolean(o["pivots"], "output.pivots");
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

std::string preset_json(const std::string& name) {
    if (name == "exp1" || name == "exp2") {
        json j = {
            {"name", name},
            {"kernel", {{"family", "squared_exponential"}, {"length_scale", 0.15}, {"dimension", 2}}},
            {"signal", {{"kind", "single_bump"}, {"center", {0.0, 0.0}}}},
            {"grid", {{"lo", {-1.0, -1.0}}, {"hi", {1.0, 1.0}}, {"counts", {48, 48}}}},
            {"detection", {{"mode", "offset"}, {"v", nullptr}, {"alpha", 0.1}}},
            {"inference", {{"alpha", 0.1}}},
            {"methods", name == "exp1" ? json{"standard"} : json{"standard", "carve", "split"}},
            {"gamma", 1.0},
            {"sweep", {{"mu0", {3, 4, 5, 6, 7, 8, 9, 10, 11}}, {"u_offsets", {-2, 0, 2}}}},
            {"replicates", 2000},
            {"seed", 1},
        };
        return j.dump(2);
    }
    if (name == "exp3") {
        json bumps = json::array();
        const double c[3] = {-0.6, 0.0, 0.6};
        int k = 0;
        for (double y : c)
            for (double x : c) {
                bumps.push_back({{"center", {x, y}}, {"amplitude", 3.0 + 3.0 * k / 8.0}, {"width", 0.1}});
                ++k;
            }
        json j = {
            {"name", "exp3"},
            {"kernel", {{"family", "squared_exponential"}, {"length_scale", 0.15}, {"dimension", 2}}},
            {"signal", {{"kind", "bumps"}, {"bumps", bumps}, {"taper_order", 4}, {"taper_radius", 3.0}}},
            {"grid", {{"lo", {-1.0, -1.0}}, {"hi", {1.0, 1.0}}, {"counts", {64, 64}}}},
            {"detection", {{"mode", "tg"}, {"v", 3.0}, {"alpha", 0.1}}},
            {"inference", {{"alpha", 0.1}}},
            {"methods", {"standard", "carve", "split"}},
            {"gamma", 1.0},
            {"replicates", 500},
            {"seed", 1},
        };
        return j.dump(2);
    }
    if (name == "custom") return "{}";
    bad("unknown preset '" + name + "' (expected exp1, exp2, exp3 or custom)");
}

ExperimentConfig make_config(const std::string& preset, const std::string& overrides_json) {
    json base = json::parse(preset_json(preset));
    if (!overrides_json.empty()) {
        json patch;
        try {
            patch = json::parse(overrides_json);
        } catch (const json::parse_error& e) {
            bad(std::string("invalid JSON: ") + e.what());
        }
        if (!patch.is_object()) bad("config overrides must be a JSON object");
        base.merge_patch(patch);
    }
    return config_from_json(base.dump());
}

std::string config_to_json(const ExperimentConfig& c) {
    auto arr = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    json j;
    j["name"] = c.name;
    j["kernel"] = {{"family", "squared_exponential"}, {"length_scale", c.kernel.length_scale},
                   {"dimension", c.kernel.dimension}};
    json s = {{"kind", kind_name(c.signal_kind)}, {"taper_order", c.taper_order}, {"taper_radius", c.taper_radius}};
    if (c.center.size()) s["center"] = arr(c.center);
    if (c.bump_width > 0.0) s["width"] = c.bump_width;
    if (!c.bumps.empty()) {
        s["bumps"] = json::array();
        for (const auto& b : c.bumps)
            s["bumps"].push_back({{"center", arr(b.center)}, {"amplitude", b.amplitude}, {"width", b.width}});
    }
    j["signal"] = s;
    j["grid"] = {{"lo", arr(c.box.lo)}, {"hi", arr(c.box.hi)}, {"counts", c.counts},
                 {"spacing_ratio", c.spacing_ratio}, {"covariance_cap", c.covariance_cap}};
    json det = {{"mode", mode_name(c.threshold_mode)}, {"alpha", c.detection_alpha}};
    det["v"] = c.v ? json(*c.v) : json(nullptr);
    if (c.explicit_u) det["u"] = *c.explicit_u;
    j["detection"] = det;
    j["inference"] = {{"alpha", c.inference_alpha}, {"carve_height", c.carve_height}};
    j["methods"] = json::array();
    for (Method m : c.methods) j["methods"].push_back(method_name(m));
    j["gamma"] = c.gamma;
    j["sweep"] = {{"mu0", c.mu0}, {"u_offsets", c.u_offsets}};
    j["replicates"] = c.replicates;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["eps_constant"] = c.eps_constant;
    j["null_radius"] = c.null_radius ? json(*c.null_radius) : json(nullptr);
    j["max_failure_fraction"] = c.max_failure_fraction;
    j["output"] = {{"dir", c.output_dir}, {"pivots", c.write_pivots}};
    return j.dump(2);
}

// ---------------------------------------------------------------- plan

namespace {

struct CellList {
    std::vector<std::shared_ptr<const SignalSpec>> signals;
    std::vector<CellPlan> cells;
};

CellList make_cells(const ExperimentConfig& cfg, const DerivativeBundle& bundle) {
    CellList out;
    const int d = cfg.dim();
    const double sg = selection_scale(cfg.gamma);
    std::vector<double> mus = cfg.signal_kind == SignalKind::single_bump
                                  ? cfg.mu0
                                  : std::vector<double>{std::numeric_limits<double>::quiet_NaN()};
    const std::vector<double> offsets =
        cfg.threshold_mode == ThresholdMode::offset ? cfg.u_offsets : std::vector<double>{0.0};
    for (std::size_t si = 0; si < mus.size(); ++si) {
        auto signal = std::make_shared<const SignalSpec>(build_signal(cfg, mus[si]));
        signal->validate();
        out.signals.push_back(signal);
        const auto truth = true_peaks(*signal);
        std::optional<CurvatureScales> scales, scales_sel;
        if (!truth.empty()) {
            scales = curvature_scales(truth, bundle, cfg.eps_constant);
            scales_sel = curvature_scales_scaled(truth, bundle, sg, cfg.eps_constant);
        }
        for (double off : offsets) {
            CellPlan c;
            c.mu0 = mus[si];
            c.signal = signal;
            c.signal_index = si;
            c.truth = truth;
            c.scales = scales;
            c.scales_sel = scales_sel;
            switch (cfg.threshold_mode) {
                case ThresholdMode::offset:
                    c.u_offset = off;
                    c.u = mus[si] + off;
                    c.v = cfg.v.value_or(c.u);
                    c.u_sel = c.u;
                    c.v_sel = c.v;
                    break;
                case ThresholdMode::tg:
                    c.u_offset = std::numeric_limits<double>::quiet_NaN();
                    c.v = *cfg.v;
                    c.u = tg_threshold(cfg.detection_alpha, c.v, d);
                    c.u_sel = sg * c.u;
                    c.v_sel = sg * c.v;
                    break;
                case ThresholdMode::explicit_u:
                    c.u_offset = std::numeric_limits<double>::quiet_NaN();
                    c.u = *cfg.explicit_u;
                    c.v = cfg.v.value_or(c.u);
                    c.u_sel = c.u;
                    c.v_sel = c.v;
                    break;
            }
            for (const auto& p : truth) {
                c.ctx.push_back(make_theory_context(*signal, bundle, p, c.u, *scales));
                c.ctx_sel.push_back(make_theory_context(*signal, bundle, p, c.u_sel, *scales));
            }
            c.null_radius = cfg.null_radius.value_or(signal->bumps.empty() ? 0.0 : 3.0 * signal->max_width());
            out.cells.push_back(std::move(c));
        }
    }
    return out;
}

}  // namespace

ExperimentPlan make_plan(const ExperimentConfig& config) {
    config.validate();
    ExperimentPlan plan;
    plan.config = config;
    plan.bundle = derivative_bundle(config.kernel);
    plan.grid = std::make_shared<const Grid>(config.box, config.counts);
    plan.factor = std::make_shared<const CovarianceFactor>(
        covariance_factor(config.kernel, plan.grid, config.covariance_cap));
    auto cells = make_cells(config, plan.bundle);
    plan.signals = std::move(cells.signals);
    plan.cells = std::move(cells.cells);
    for (const auto& s : plan.signals) plan.signal_grids.push_back(signal_on_grid(*s, *plan.grid));
    return plan;
}

// ---------------------------------------------------------------- replicate

namespace {

struct SignalState {
    FieldSample sample;
    std::vector<Peak> peaks;
    RandomizationSplit split;
    std::vector<Peak> sel_peaks;
    std::vector<Peak> inf_peaks;
};

void count_failure(MethodOutcome& mo, const Error& e) {
    switch (e.code()) {
        case ErrorCode::degenerate_hessian:
        case ErrorCode::degenerate_carve_precision: ++mo.degenerate; break;
        case ErrorCode::matching: ++mo.failed_match; break;
        default: ++mo.numerical_failures; break;
    }
}

// Regions attached to one discovery; either piece may be missing.
struct Regions {
    std::optional<ConfidenceInterval> height;
    std::optional<Ellipsoid> location;
    const Peak* inference_peak = nullptr;  // full-data or Y^inf peak used for inference
    std::optional<CarveContext> carve;
};

double chi2_stat(int d, const Mat& precision, const Vec& delta) { return chi2_cdf(d, quadratic_form(precision, delta)); }

void tally_marginal(MethodOutcome& mo, const CellPlan& cell, const std::vector<Peak>& discoveries,
                    const std::vector<Regions>& regions, double eps, bool height_evaluated) {
    for (std::size_t k = 0; k < discoveries.size(); ++k) {
        const PeakLabel lab = label_location(discoveries[k].location, *cell.signal, cell.truth, eps, cell.null_radius);
        if (lab.kind == LabelKind::null_region) mo.counts.null_discoveries += 1;
        if (lab.kind != LabelKind::epsilon_consistent) mo.counts.inconsistent_discoveries += 1;
        const Regions& r = regions[k];
        const bool has_truth = lab.true_peak != PeakLabel::kNoPeak;
        if (height_evaluated) {
            const bool covered = has_truth && r.height && r.height->contains(cell.truth[lab.true_peak].height);
            if (!covered) mo.counts.height_misses += 1;
        }
        const bool covered = has_truth && r.location && r.location->contains(cell.truth[lab.true_peak].location);
        if (!covered) mo.counts.location_misses += 1;
    }
}

std::vector<std::size_t> within(const std::vector<Peak>& peaks, const Vec& t, double radius) {
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < peaks.size(); ++k)
        if ((peaks[k].location - t).norm() <= radius) idx.push_back(k);
    return idx;
}

MethodOutcome run_standard(const ExperimentPlan& plan, const CellPlan& cell, const SignalState& st) {
    const auto& cfg = plan.config;
    const Mat& lambda = plan.bundle.lambda;
    const int d = cfg.dim();
    MethodOutcome mo;
    mo.enabled = true;
    DetectionConfig dc;
    dc.v = cell.v;
    dc.alpha = cfg.detection_alpha;
    dc.explicit_u = cell.u;
    dc.dimension = d;
    const DetectionResult det = detect_scaled(st.peaks, dc, 1.0);
    mo.counts.prethresholded = static_cast<double>(det.prethresholded.size());
    mo.counts.discoveries = static_cast<double>(det.discoveries.size());

    std::vector<Regions> regions(det.discoveries.size());
    InversionOptions opt;
    opt.verify_monotone = false;
    for (std::size_t k = 0; k < det.discoveries.size(); ++k) {
        const Peak& p = det.discoveries[k];
        regions[k].inference_peak = &p;
        try {
            regions[k].height = height_interval(p, cell.u, cfg.inference_alpha, lambda, opt);
            regions[k].location = location_ellipsoid(p, cfg.inference_alpha, lambda);
        } catch (const Error& e) {
            count_failure(mo, e);
        }
    }
    const double eps = cell.scales ? cell.scales->eps_n : 0.0;
    tally_marginal(mo, cell, det.discoveries, regions, eps, true);

    const std::size_t T = cell.truth.size();
    mo.consistent_discoveries.assign(T, 0.0);
    mo.conditioned.resize(T);
    for (std::size_t j = 0; j < T; ++j) {
        const TheoryContext& ctx = cell.ctx[j];
        const TruePeak& tp = cell.truth[j];
        const double y_max = ctx.u_bar + cell.scales->Delta_n;
        const auto near = within(det.discoveries, tp.location, cell.scales->eps_n);
        for (auto k : near)
            if (det.discoveries[k].height <= y_max) mo.consistent_discoveries[j] += 1.0;
        if (near.size() != 1) continue;
        const std::size_t k = near.front();
        const Peak& p = det.discoveries[k];
        if (p.height > y_max || !regions[k].height || !regions[k].location) continue;
        try {
            ConditionedRecord rec;
            rec.coverage.height_covered = regions[k].height->contains(tp.height);
            rec.coverage.height_width = regions[k].height->width();
            rec.coverage.location_covered = regions[k].location->contains(tp.location);
            rec.coverage.location_width = regions[k].location->width();
            const Vec delta = p.location - tp.location;
            rec.statistics = {
                tg_pivot_trace(p.height, tp.height, cell.u, ctx.trace()),
                tg_pivot_trace(p.height, tp.height, cell.u, 0.0),
                normal_survival(p.height - tp.height),
                tg_pivot(p.height, tp.height, cell.u, p.neg_hessian, lambda),
                chi2_stat(d, ctx.G_bar, delta),
                chi2_stat(d, ctx.marginal_sandwich(), delta),
                chi2_stat(d, ctx.conditional_sandwich(), delta),
                chi2_stat(d, wald_precision(p.neg_hessian, lambda), delta),
            };
            mo.conditioned[j] = std::move(rec);
        } catch (const Error& e) {
            count_failure(mo, e);
        }
    }
    return mo;
}

DetectionResult detect_selection(const ExperimentPlan& plan, const CellPlan& cell, const SignalState& st) {
    const auto& cfg = plan.config;
    DetectionConfig dc;
    dc.alpha = cfg.detection_alpha;
    dc.dimension = cfg.dim();
    if (cfg.threshold_mode == ThresholdMode::tg) {
        dc.v = cell.v;
        return detect_scaled(st.sel_peaks, dc, selection_scale(cfg.gamma));
    }
    dc.v = cell.v_sel;
    dc.explicit_u = cell.u_sel;
    return detect_scaled(st.sel_peaks, dc, 1.0);
}

// Randomized methods share selection on Y^sel; they differ in which field
// supplies the inference peak.
MethodOutcome run_randomized(const ExperimentPlan& plan, const CellPlan& cell, const SignalState& st, Method method) {
    const auto& cfg = plan.config;
    const Mat& lambda = plan.bundle.lambda;
    const int d = cfg.dim();
    const double gamma = cfg.gamma;
    const bool carve = method == Method::carve;
    MethodOutcome mo;
    mo.enabled = true;
    mo.height_evaluated = !carve || cfg.carve_height;
    const DetectionResult det = detect_selection(plan, cell, st);
    mo.counts.prethresholded = static_cast<double>(det.prethresholded.size());
    mo.counts.discoveries = static_cast<double>(det.discoveries.size());

    const std::vector<Peak>& pool = carve ? st.peaks : st.inf_peaks;
    InversionOptions opt;
    opt.verify_monotone = false;
    std::vector<Regions> regions(det.discoveries.size());
    for (std::size_t k = 0; k < det.discoveries.size(); ++k) {
        const Peak& sel = det.discoveries[k];
        Regions& r = regions[k];
        try {
            const Peak& match = match_nearest_peak(pool, sel.location);
            r.inference_peak = &match;
            if (match.degenerate) throw Error(ErrorCode::degenerate_hessian, "matched peak is degenerate");
            if (carve) {
                CarveContext ctx;
                ctx.gamma = gamma;
                ctx.u = cell.u_sel;
                ctx.sel_peak = sel;
                ctx.full_peak = match;
                ctx.H_inf = peak_hessian_inf(st.split, *plan.grid, match.location);
                r.carve = ctx;
                try {
                    r.location = carve_location_ellipsoid(ctx, cfg.inference_alpha, lambda);
                } catch (const Error& e) {
                    count_failure(mo, e);
                }
                if (cfg.carve_height) r.height = carve_height_interval(ctx, cfg.inference_alpha, lambda, opt);
            } else {
                r.height = split_height_interval(match, cfg.inference_alpha, gamma, lambda);
                r.location = split_location_ellipsoid(match, cfg.inference_alpha, gamma, lambda);
            }
        } catch (const Error& e) {
            count_failure(mo, e);
        }
    }
    const double eps_sel = cell.scales_sel ? cell.scales_sel->eps_n : 0.0;
    tally_marginal(mo, cell, det.discoveries, regions, eps_sel, mo.height_evaluated);

    const std::size_t T = cell.truth.size();
    mo.consistent_discoveries.assign(T, 0.0);
    mo.conditioned.resize(T);
    const double sg = selection_scale(gamma);
    for (std::size_t j = 0; j < T; ++j) {
        const TruePeak& tp = cell.truth[j];
        const TheoryContext& ctx_sel = cell.ctx_sel[j];
        const double y_sel_max = std::max(cell.u_sel, tp.height) + sg * cell.scales_sel->Delta_n;
        const auto near = within(det.discoveries, tp.location, cell.scales_sel->eps_n);
        for (auto k : near)
            if (det.discoveries[k].height <= y_sel_max) mo.consistent_discoveries[j] += 1.0;
        if (near.size() != 1) continue;
        const std::size_t k = near.front();
        if (det.discoveries[k].height > y_sel_max) continue;
        const Regions& r = regions[k];
        if (!r.inference_peak || !r.location || (mo.height_evaluated && !r.height)) continue;
        const Peak& p = *r.inference_peak;
        if (carve) {
            // The matched full-data peak must be the only non-degenerate peak
            // of Y near t*, at a height inside the randomized window.
            std::size_t count = 0;
            bool matched_is_it = false;
            for (const auto& q : st.peaks) {
                if (q.degenerate || (q.location - tp.location).norm() > cell.scales->eps_n) continue;
                ++count;
                matched_is_it = q.grid_index == p.grid_index;
            }
            if (count != 1 || !matched_is_it) continue;
            if (std::abs(p.height - ctx_sel.u_bar_randomized(gamma)) > cell.scales->Delta_n) continue;
        }
        try {
            ConditionedRecord rec;
            rec.coverage.height_evaluated = mo.height_evaluated;
            if (r.height) {
                rec.coverage.height_covered = r.height->contains(tp.height);
                rec.coverage.height_width = r.height->width();
            }
            rec.coverage.location_covered = r.location->contains(tp.location);
            rec.coverage.location_width = r.location->width();
            if (carve) {
                rec.statistics = {carve_height_pivot(*r.carve, tp.height, lambda),
                                  chi2_cdf(d, carve_wald_pivot(*r.carve, tp.location, lambda))};
            } else {
                rec.statistics = {split_height_pivot(p, tp.height, gamma, lambda),
                                  chi2_cdf(d, split_wald_pivot(p, tp.location, gamma, lambda))};
            }
            mo.conditioned[j] = std::move(rec);
        } catch (const Error& e) {
            count_failure(mo, e);
        }
    }
    return mo;
}

}  // namespace

ReplicateOutcome run_replicate(const ExperimentPlan& plan, std::uint32_t index) {
    const auto& cfg = plan.config;
    const Grid& grid = *plan.grid;
    const NoiseKey noise_key{cfg.seed, index, kNoiseStream, 0};
    const Vec noise = plan.factor->draw(noise_key);
    const bool rand = randomized(cfg);
    Vec omega;
    NoiseKey omega_key{cfg.seed, index, kOmegaStream, 0};
    if (rand) omega = plan.factor->draw(omega_key);

    std::vector<SignalState> states(plan.signals.size());
    for (std::size_t s = 0; s < plan.signals.size(); ++s) {
        SignalState& st = states[s];
        st.sample.grid = plan.grid;
        st.sample.mean = plan.signal_grids[s];
        st.sample.values = plan.signal_grids[s] + noise;
        st.sample.noise_key = noise_key;
        st.sample.signal = plan.signals[s];
        st.peaks = find_local_maxima(st.sample);
        if (rand) {
            st.split = randomize_with_omega(st.sample, cfg.gamma, omega);
            st.split.omega_key = omega_key;
            st.sel_peaks = find_local_maxima(st.split.sel_view(grid));
            if (cfg.has_method(Method::split)) st.inf_peaks = find_local_maxima(st.split.inf_view(grid));
        }
    }

    ReplicateOutcome out;
    out.index = index;
    out.cells.resize(plan.cells.size());
    for (std::size_t c = 0; c < plan.cells.size(); ++c) {
        const CellPlan& cell = plan.cells[c];
        const SignalState& st = states[cell.signal_index];
        for (Method m : cfg.methods) {
            out.cells[c].methods[static_cast<int>(m)] =
                m == Method::standard ? run_standard(plan, cell, st) : run_randomized(plan, cell, st, m);
        }
    }
    return out;
}

// ---------------------------------------------------------------- experiment

std::vector<double> MethodSummary::statistic(std::size_t target, Method m, Statistic s) const {
    const auto& stats = method_statistics(m);
    const auto it = std::find(stats.begin(), stats.end(), s);
    if (it == stats.end()) throw Error(ErrorCode::parameter, "statistic does not belong to this method");
    const auto pos = static_cast<std::size_t>(it - stats.begin());
    std::vector<double> out;
    if (target >= conditioned.size()) return out;
    for (const auto& r : conditioned[target])
        if (pos < r.statistics.size() && std::isfinite(r.statistics[pos])) out.push_back(r.statistics[pos]);
    return out;
}

namespace {

void fold(ExperimentResult& result, ReplicateOutcome&& rep) {
    for (std::size_t c = 0; c < rep.cells.size(); ++c) {
        for (int m = 0; m < kMethodCount; ++m) {
            MethodOutcome& mo = rep.cells[c].methods[m];
            if (!mo.enabled) continue;
            MethodSummary& ms = result.cells[c].methods[m];
            ms.counts.push_back(mo.counts);
            ms.height_evaluated = mo.height_evaluated;
            if (ms.consistent_discoveries.size() < mo.consistent_discoveries.size()) {
                ms.consistent_discoveries.resize(mo.consistent_discoveries.size());
                ms.conditioned.resize(mo.consistent_discoveries.size());
            }
            for (std::size_t j = 0; j < mo.consistent_discoveries.size(); ++j) {
                ms.consistent_discoveries[j].push_back(mo.consistent_discoveries[j]);
                if (mo.conditioned[j]) {
                    mo.conditioned[j]->replicate = rep.index;
                    ms.conditioned[j].push_back(std::move(*mo.conditioned[j]));
                }
            }
            ms.degenerate += mo.degenerate;
            ms.failed_match += mo.failed_match;
            ms.numerical_failures += mo.numerical_failures;
        }
    }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
    ExperimentResult result;
    result.plan = make_plan(config);
    const ExperimentPlan& plan = result.plan;
    result.cells.resize(plan.cells.size());
    for (auto& cell : result.cells)
        for (auto& m : cell.methods) {
            m.counts.reserve(config.replicates);
        }

    const std::size_t n = config.replicates;
    const auto threads = static_cast<std::size_t>(std::max(1, config.threads));
    // Waves of contiguous indices; each wave is folded in index order, so
    // the result does not depend on the thread count.
    const std::size_t wave = threads * 64;
    std::vector<ReplicateOutcome> slots;
    for (std::size_t start = 0; start < n; start += wave) {
        const std::size_t len = std::min(wave, n - start);
        slots.assign(len, {});
        std::atomic<std::size_t> next{0};
        auto work = [&] {
            for (std::size_t i; (i = next.fetch_add(1)) < len;)
                slots[i] = run_replicate(plan, static_cast<std::uint32_t>(start + i));
        };
        if (threads == 1) {
            work();
        } else {
            std::vector<std::jthread> pool;
            for (std::size_t t = 0; t < std::min(threads, len); ++t) pool.emplace_back(work);
        }
        for (auto& s : slots) fold(result, std::move(s));
    }
    result.replicates = n;

    for (std::size_t c = 0; c < result.cells.size(); ++c)
        for (Method m : config.methods) {
            const auto& ms = result.cells[c].methods[static_cast<int>(m)];
            const double frac = static_cast<double>(ms.numerical_failures) / static_cast<double>(n);
            if (frac > config.max_failure_fraction) {
                result.failed = true;
                std::ostringstream os;
                os << method_name(m) << " cell " << c << ": " << ms.numerical_failures
                   << " numerical failures in " << n << " replicates";
                result.failure_reason = os.str();
            }
        }
    return result;
}

// ---------------------------------------------------------------- CSV

namespace {

std::ofstream open_csv(const std::filesystem::path& path, const char* schema) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
    out.precision(12);
    out << "# peakinf-csv schema=" << schema << " version=" << kCsvSchemaVersion << '\n';
    return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

}  // namespace

void write_pivots_csv(const ExperimentResult& result, const std::filesystem::path& path) {
    auto out = open_csv(path, "pivots");
    out << "mu0,u_offset,u,method,replicate,peak,statistic,value\n";
    for (std::size_t c = 0; c < result.cells.size(); ++c) {
        const CellPlan& cell = result.plan.cells[c];
        for (Method m : result.plan.config.methods) {
            const auto& ms = result.cells[c].methods[static_cast<int>(m)];
            const double u = m == Method::standard ? cell.u : cell.u_sel;
            const auto& stats = method_statistics(m);
            for (std::size_t j = 0; j < ms.conditioned.size(); ++j)
                for (const auto& rec : ms.conditioned[j])
                    for (std::size_t s = 0; s < stats.size() && s < rec.statistics.size(); ++s)
                        out << cell.mu0 << ',' << cell.u_offset << ',' << u << ',' << method_name(m) << ','
                            << rec.replicate << ',' << j << ',' << statistic_name(stats[s]) << ','
                            << rec.statistics[s] << '\n';
        }
    }
    finish(out, path);
}

void write_coverage_csv(const ExperimentResult& result, const std::filesystem::path& path) {
    auto out = open_csv(path, "coverage");
    out << "mu0,u_offset,u,method,peak,target,coverage,se,width,width_se,n,discovery_rate\n";
    for (std::size_t c = 0; c < result.cells.size(); ++c) {
        const CellPlan& cell = result.plan.cells[c];
        for (Method m : result.plan.config.methods) {
            const auto& ms = result.cells[c].methods[static_cast<int>(m)];
            const double u = m == Method::standard ? cell.u : cell.u_sel;
            for (std::size_t j = 0; j < ms.conditioned.size(); ++j) {
                std::vector<CoverageRecord> recs;
                for (const auto& r : ms.conditioned[j]) recs.push_back(r.coverage);
                const ConditionalCoverage cc = conditional_coverage(recs);
                const MeanEstimate rate = mean_estimate(ms.consistent_discoveries[j]);
                auto row = [&](const char* target, const MeanEstimate& cov, const MeanEstimate& w) {
                    out << cell.mu0 << ',' << cell.u_offset << ',' << u << ',' << method_name(m) << ',' << j << ','
                        << target << ',' << cov.mean << ',' << cov.se << ',' << w.mean << ',' << w.se << ',' << cov.n
                        << ',' << rate.mean << '\n';
                };
                row("height", cc.height, cc.height_width);
                row("location", cc.location, cc.location_width);
            }
        }
    }
    finish(out, path);
}

void write_rates_csv(const ExperimentResult& result, const std::filesystem::path& path) {
    auto out = open_csv(path, "rates");
    out << "mu0,u_offset,u,v,method,replicates,n_prethresholded,n_discoveries,pcer0,pcer0_se,eps_pcer,eps_pcer_se,"
           "pcmr_height,pcmr_height_se,pcmr_location,pcmr_location_se,degenerate,failed_match,numerical_failures\n";
    for (std::size_t c = 0; c < result.cells.size(); ++c) {
        const CellPlan& cell = result.plan.cells[c];
        for (Method m : result.plan.config.methods) {
            const auto& ms = result.cells[c].methods[static_cast<int>(m)];
            const bool std_method = m == Method::standard;
            const RateEstimate p0 = estimate_null_pcer(ms.counts);
            const RateEstimate pe = estimate_eps_pcer(ms.counts);
            PcmrEstimate pm = estimate_pcmr(ms.counts);
            if (!ms.height_evaluated) pm.height = RateEstimate{};
            double pre = 0.0, disc = 0.0;
            for (const auto& k : ms.counts) {
                pre += k.prethresholded;
                disc += k.discoveries;
            }
            out << cell.mu0 << ',' << cell.u_offset << ',' << (std_method ? cell.u : cell.u_sel) << ','
                << (std_method ? cell.v : cell.v_sel) << ',' << method_name(m) << ',' << ms.counts.size() << ','
                << pre << ',' << disc << ',' << p0.value << ',' << p0.se << ',' << pe.value << ',' << pe.se << ','
                << pm.height.value << ',' << pm.height.se << ',' << pm.location.value << ',' << pm.location.se << ','
                << ms.degenerate << ',' << ms.failed_match << ',' << ms.numerical_failures << '\n';
        }
    }
    finish(out, path);
}

void write_outputs(const ExperimentResult& result) {
    const std::filesystem::path dir = result.plan.config.output_dir;
    std::filesystem::create_directories(dir);
    if (result.plan.config.write_pivots) write_pivots_csv(result, dir / "pivots.csv");
    write_coverage_csv(result, dir / "coverage.csv");
    write_rates_csv(result, dir / "rates.csv");
    std::ofstream cfg(dir / "config.json");
    cfg << config_to_json(result.plan.config) << '\n';
    if (!cfg) throw Error(ErrorCode::io, "cannot write config.json");
}

void write_field_csv(const FieldSample& sample, const std::filesystem::path& path) {
    auto out = open_csv(path, "field");
    const Grid& g = *sample.grid;
    for (int a = 0; a < g.dim(); ++a) out << 'x' << a << ',';
    out << "y,mu\n";
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec p = g.point(i);
        for (int a = 0; a < g.dim(); ++a) out << p(a) << ',';
        out << sample.values(static_cast<Eigen::Index>(i)) << ',' << sample.mean(static_cast<Eigen::Index>(i)) << '\n';
    }
    finish(out, path);
}

std::string theory_report(const ExperimentConfig& config) {
    config.validate();
    const DerivativeBundle bundle = derivative_bundle(config.kernel);
    const auto cells = make_cells(config, bundle);
    std::ostringstream os;
    os.precision(12);
    const int d = config.dim();
    const double v = config.v.value_or(3.0);
    os << "# peakinf theory config=" << config.name << '\n';
    os << "u_tg,alpha=" << config.detection_alpha << ",v=" << v << ",d=" << d << ','
       << tg_threshold(config.detection_alpha, v, d) << '\n';
    os << "mu0,u_offset,u,peak,height,trace,expected_true_discoveries,power\n";
    for (const auto& c : cells.cells)
        for (std::size_t j = 0; j < c.ctx.size(); ++j)
            os << c.mu0 << ',' << c.u_offset << ',' << c.u << ',' << j << ',' << c.truth[j].height << ','
               << c.ctx[j].trace() << ',' << expected_true_discoveries(c.ctx[j]) << ',' << power_approx(c.ctx[j])
               << '\n';
    return os.str();
}

}  // namespace peakinf
