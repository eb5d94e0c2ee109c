#pragma once

// Batch front door: flat key=value run configuration, command dispatch to the
// verification/simulation pipelines, CSV/JSON artifacts with reproducibility
// metadata. Exit codes: 0 success, 1 operational error, 2 failed scientific
// check.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "heatgauge/measure_mc.hpp"
#include "heatgauge/spectral_fw.hpp"

namespace heatgauge {

inline constexpr const char* kVersionString = "heatgauge 0.1.0";

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string command;
    GroupKind group = GroupKind::Circle;
    uint64_t seed = 1;
    std::string out = "out";
    std::map<std::string, double> num;          // resolved numeric parameters
    std::vector<double> g_values;               // fw-scaling only
    std::vector<std::pair<std::string, std::string>> resolved;  // manifest echo
};

namespace detail {

enum class KeyType { Int, Real, RealList, Str };

struct KeySpec {
    KeyType type;
    const char* deflt;  // nullptr = required
    double min = -1e300;
    double max = 1e300;
};

// schema: keys accepted per command (plus the common keys below)
inline const std::map<std::string, std::map<std::string, KeySpec>>& command_schema() {
    using M = std::map<std::string, KeySpec>;
    static const M lattice{{"beta", {KeyType::Real, nullptr, 1e-12}},
                           {"dim", {KeyType::Int, "2", 2, 4}},
                           {"extent", {KeyType::Int, "8", 2, 64}},
                           {"boundary", {KeyType::Str, "open"}},
                           {"n_therm", {KeyType::Int, "500", 0}},
                           {"n_measure", {KeyType::Int, "2000", 40}},
                           {"measure_every", {KeyType::Int, "2", 1}},
                           {"proposal_width", {KeyType::Real, "0.8", 1e-6}},
                           {"n_chains", {KeyType::Int, "1", 1, 64}}};
    static const M sde{{"beta", {KeyType::Real, "0.5", 1e-12}},
                       {"g", {KeyType::Real, "0.5", 1e-6}},
                       {"dt", {KeyType::Real, "0.002", 1e-9}},
                       {"radius", {KeyType::Real, "1.0", 1e-6}},
                       {"n_traj", {KeyType::Int, "2000", 1}},
                       {"max_steps", {KeyType::Int, "100000000", 1}},
                       {"n_threads", {KeyType::Int, "4", 1, 64}},
                       {"grid_n", {KeyType::Int, "400", 200, 20000}}};
    static const std::map<std::string, M> schema = [] {
        std::map<std::string, M> s;
        s["kernel-check"] = {{"beta", {KeyType::Real, nullptr, 1e-12}},
                             {"grid_n", {KeyType::Int, "1024", 64, 100000}}};
        s["consistency"] = {{"beta", {KeyType::Real, nullptr, 1e-12}},
                            {"n_samples", {KeyType::Int, "0", 0}},
                            {"n_boundaries", {KeyType::Int, "10", 1, 100}}};
        s["sample"] = lattice;
        s["wilson"] = lattice;
        s["wilson"]["loop_r"] = {KeyType::Int, "1", 1};
        s["wilson"]["loop_t"] = {KeyType::Int, "1", 1};
        s["wilson"]["rep"] = {KeyType::Int, "1", 0};
        s["correlator"] = lattice;
        s["correlator"]["t_max"] = {KeyType::Int, "2", 1};
        s["massgap"] = s["correlator"];
        s["fw-eigenvalue"] = sde;
        s["fw-scaling"] = sde;
        s["fw-scaling"].erase("g");
        s["fw-scaling"]["g_values"] = {KeyType::RealList, nullptr, 1e-6};
        s["quasipotential"] = {{"beta", {KeyType::Real, "0.5", 1e-12}},
                               {"radius", {KeyType::Real, "1.0", 1e-6}}};
        s["condition-check"] = {{"beta", {KeyType::Real, "0.5", 1e-12}},
                                {"radius", {KeyType::Real, "1.0", 1e-6}},
                                {"grid_n", {KeyType::Int, "200", 16, 20000}}};
        return s;
    }();
    return schema;
}

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline double parse_number(const std::string& key, const std::string& val, int line,
                           bool integer) {
    size_t pos = 0;
    double x = 0;
    try {
        x = std::stod(val, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != val.size() || val.empty())
        throw ConfigError("line " + std::to_string(line) + ": key '" + key +
                          "' expects a number, got '" + val + "'");
    if (integer && x != std::floor(x))
        throw ConfigError("line " + std::to_string(line) + ": key '" + key +
                          "' expects an integer, got '" + val + "'");
    return x;
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
    std::map<std::string, std::pair<std::string, int>> raw;  // key -> (value, line)
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line = line.substr(0, h);
        line = detail::trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = detail::trim(line.substr(0, eq));
        std::string val = detail::trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        if (auto it = raw.find(key); it != raw.end())
            throw ConfigError("duplicate key '" + key + "' (lines " +
                              std::to_string(it->second.second) + " and " +
                              std::to_string(lineno) + ")");
        raw[key] = {val, lineno};
    }

    RunConfig cfg;
    auto take = [&](const std::string& key) -> std::optional<std::pair<std::string, int>> {
        auto it = raw.find(key);
        if (it == raw.end()) return std::nullopt;
        auto v = it->second;
        raw.erase(it);
        return v;
    };

    auto cmd = take("command");
    if (!cmd) throw ConfigError("missing required key 'command'");
    const auto& schema = detail::command_schema();
    auto sit = schema.find(cmd->first);
    if (sit == schema.end())
        throw ConfigError("line " + std::to_string(cmd->second) + ": unknown command '" +
                          cmd->first + "'");
    cfg.command = cmd->first;
    cfg.resolved.emplace_back("command", cfg.command);

    if (auto g = take("group")) {
        if (g->first == "circle")
            cfg.group = GroupKind::Circle;
        else if (g->first == "su2")
            cfg.group = GroupKind::UnitQuaternion;
        else
            throw ConfigError("line " + std::to_string(g->second) +
                              ": key 'group' must be 'circle' or 'su2', got '" + g->first +
                              "'");
    }
    cfg.resolved.emplace_back("group", cfg.group == GroupKind::Circle ? "circle" : "su2");

    if (auto s = take("seed")) {
        double x = detail::parse_number("seed", s->first, s->second, true);
        if (x < 0)
            throw ConfigError("line " + std::to_string(s->second) + ": key 'seed' must be >= 0");
        cfg.seed = uint64_t(x);
    }
    cfg.resolved.emplace_back("seed", std::to_string(cfg.seed));

    if (auto o = take("out")) cfg.out = o->first;
    cfg.resolved.emplace_back("out", cfg.out);

    for (const auto& [key, spec] : sit->second) {
        auto v = take(key);
        std::string val;
        int ln = 0;
        if (v) {
            val = v->first;
            ln = v->second;
        } else if (spec.deflt) {
            val = spec.deflt;
        } else {
            throw ConfigError("missing required key '" + key + "' for command '" +
                              cfg.command + "'");
        }
        switch (spec.type) {
            case detail::KeyType::Str:
                if (key == "boundary" && val != "open" && val != "periodic")
                    throw ConfigError("line " + std::to_string(ln) +
                                      ": key 'boundary' must be 'open' or 'periodic'");
                cfg.resolved.emplace_back(key, val);
                cfg.num[key] = (val == "periodic") ? 1.0 : 0.0;
                break;
            case detail::KeyType::RealList: {
                cfg.g_values.clear();
                std::istringstream ls(val);
                std::string tok;
                while (std::getline(ls, tok, ',')) {
                    double x = detail::parse_number(key, detail::trim(tok), ln, false);
                    if (x < spec.min)
                        throw ConfigError("line " + std::to_string(ln) + ": key '" + key +
                                          "' entries must be >= " + std::to_string(spec.min));
                    cfg.g_values.push_back(x);
                }
                if (cfg.g_values.empty())
                    throw ConfigError("line " + std::to_string(ln) + ": key '" + key +
                                      "' must list at least one value");
                cfg.resolved.emplace_back(key, val);
                break;
            }
            default: {
                double x = detail::parse_number(key, val, ln,
                                                spec.type == detail::KeyType::Int);
                if (x < spec.min || x > spec.max) {
                    std::ostringstream msg;
                    msg << (ln ? "line " + std::to_string(ln) + ": " : "") << "key '" << key
                        << "' must lie in [" << spec.min << ", " << spec.max << "], got "
                        << val;
                    throw ConfigError(msg.str());
                }
                cfg.num[key] = x;
                cfg.resolved.emplace_back(key, val);
            }
        }
    }

    if (!raw.empty()) {
        const auto& [key, vl] = *raw.begin();
        throw ConfigError("line " + std::to_string(vl.second) + ": unknown key '" + key +
                          "' for command '" + cfg.command + "'");
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Run manifest (JSON) and dispatch.

struct CheckResult {
    std::string name;
    bool pass = true;
    std::string detail;
};

namespace detail {

inline std::string json_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        out += c;
    }
    return out;
}

inline void write_manifest(const RunConfig& cfg, const std::vector<CheckResult>& checks,
                           double wall_seconds, std::ostream& os) {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    os << "{\n";
    os << "  \"timestamp\": \"" << stamp << "\",\n";
    os << "  \"version\": \"" << kVersionString << "\",\n";
    os << "  \"config\": {\n";
    for (size_t i = 0; i < cfg.resolved.size(); ++i)
        os << "    \"" << json_escape(cfg.resolved[i].first) << "\": \""
           << json_escape(cfg.resolved[i].second) << "\""
           << (i + 1 < cfg.resolved.size() ? "," : "") << "\n";
    os << "  },\n";
    os << "  \"checks\": [\n";
    for (size_t i = 0; i < checks.size(); ++i)
        os << "    {\"name\": \"" << json_escape(checks[i].name) << "\", \"pass\": "
           << (checks[i].pass ? "true" : "false") << ", \"detail\": \""
           << json_escape(checks[i].detail) << "\"}" << (i + 1 < checks.size() ? "," : "")
           << "\n";
    os << "  ],\n";
    os << "  \"wall_seconds\": " << wall_seconds << "\n";
    os << "}\n";
}

inline std::string fmt(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
}

inline LatticeSpec lattice_from(const RunConfig& cfg) {
    LatticeSpec spec;
    spec.dim = int(cfg.num.at("dim"));
    spec.extents.assign(spec.dim, int(cfg.num.at("extent")));
    spec.boundary = cfg.num.at("boundary") > 0 ? Boundary::Periodic : Boundary::Open;
    return spec;
}

inline MCParams mc_from(const RunConfig& cfg) {
    MCParams p;
    p.beta = cfg.num.at("beta");
    p.n_therm = int(cfg.num.at("n_therm"));
    p.n_measure = int(cfg.num.at("n_measure"));
    p.measure_every = int(cfg.num.at("measure_every"));
    p.proposal_width = cfg.num.at("proposal_width");
    p.seed = cfg.seed;
    p.n_chains = int(cfg.num.at("n_chains"));
    return p;
}

inline SDEParams sde_from(const RunConfig& cfg, double g) {
    SDEParams p;
    p.g = g;
    p.dt = cfg.num.at("dt");
    p.R = cfg.num.at("radius");
    p.max_steps = int64_t(cfg.num.at("max_steps"));
    p.n_traj = int(cfg.num.at("n_traj"));
    p.seed = cfg.seed;
    p.n_threads = int(cfg.num.at("n_threads"));
    return p;
}

inline std::ofstream open_out(const std::filesystem::path& dir, const std::string& name) {
    std::ofstream os(dir / name);
    if (!os) throw std::runtime_error("cannot open output file " + (dir / name).string());
    return os;
}

// mean over all plaquettes of (1/d) Re chi_fund(U_p)
inline double mean_plaquette(const Lattice& lat, const FieldConfig& cfg, GroupKind kind) {
    Irrep rep = kind == GroupKind::Circle ? Irrep::circle(1) : Irrep::su2(1);
    double s = 0;
    for (const auto& p : lat.plaquettes)
        s += character(rep, plaquette_product(cfg, p)).real() / rep.dimension();
    return s / lat.plaquettes.size();
}

inline void run_kernel_check(const RunConfig& cfg, const std::filesystem::path& dir,
                             std::vector<CheckResult>& checks) {
    double beta = cfg.num.at("beta");
    int grid_n = int(cfg.num.at("grid_n"));
    auto p = make_heat_kernel_params(cfg.group, beta);
    double dmax = cfg.group == GroupKind::Circle ? pi : 2 * pi - 1e-6;
    double worst = 0;
    auto csv = open_out(dir, "kernel.csv");
    csv << "distance,K\n";
    for (int i = 0; i < grid_n; ++i) {
        double d = (i + 0.5) * dmax / grid_n;
        std::array<double, 3> axis{d, 0.0, 0.0};
        auto g = cfg.group == GroupKind::Circle
                     ? GroupElement::circle(d)
                     : exp_coordinates(GroupKind::UnitQuaternion, axis);
        double series = eval(g, p);
        double stable = std::exp(stable_log_eval(cfg.group, d, beta));
        worst = std::max(worst, std::abs(series - stable));
        csv << d << ',' << stable << '\n';
    }
    checks.push_back({"series_vs_stable_form", worst <= 1e-8,
                      "max abs deviation " + fmt(worst)});

    auto rule = class_quadrature(cfg.group, std::max(64, 4 * p.cutoff + 8));
    double norm = 0;
    for (size_t i = 0; i < rule.nodes.size(); ++i)
        norm += rule.weights[i] * eval(rule.nodes[i], p);
    checks.push_back({"normalization", std::abs(norm - 1.0) <= 1e-8,
                      "integral " + fmt(norm)});
}

inline void run_consistency(const RunConfig& cfg, const std::filesystem::path& dir,
                            std::vector<CheckResult>& checks) {
    double beta = cfg.num.at("beta");
    double residual = consistency_check_exact(cfg.group, beta);
    checks.push_back({"subdivision_exact", residual <= 1e-12, "residual " + fmt(residual)});

    int64_t n_samples = int64_t(cfg.num.at("n_samples"));
    auto csv = open_out(dir, "consistency.csv");
    csv << "boundary,ratio,stderr\n";
    if (n_samples > 0) {
        std::mt19937_64 rng(cfg.seed);
        auto mc = consistency_check_mc(cfg.group, beta, n_samples, rng,
                                       int(cfg.num.at("n_boundaries")));
        for (size_t b = 0; b < mc.ratios.size(); ++b)
            csv << b << ',' << mc.ratios[b] << ',' << mc.stderrs[b] << '\n';
        checks.push_back({"subdivision_mc", mc.max_deviation_sigma <= 3.0,
                          "max deviation " + fmt(mc.max_deviation_sigma) + " sigma"});
    }
}

inline void run_sample(const RunConfig& cfg, const std::filesystem::path& dir,
                       std::vector<CheckResult>& checks) {
    auto lat = build(lattice_from(cfg));
    auto params = mc_from(cfg);
    auto rows = run_chains(lat, cfg.group, params, [&](const FieldConfig& c) {
        return std::vector<double>{mean_plaquette(lat, c, cfg.group)};
    });
    std::vector<double> vals;
    for (const auto& r : rows) vals.push_back(r[0]);
    auto series = jackknife(vals);
    auto csv = open_out(dir, "observables.csv");
    write_observables_csv({{"plaquette", series}}, csv);
    checks.push_back({"plaquette_mean", true,
                      fmt(series.mean) + " +/- " + fmt(series.stderr_)});
}

inline void run_wilson(const RunConfig& cfg, const std::filesystem::path& dir,
                       std::vector<CheckResult>& checks) {
    auto spec = lattice_from(cfg);
    auto lat = build(spec);
    auto params = mc_from(cfg);
    int R = int(cfg.num.at("loop_r")), T = int(cfg.num.at("loop_t"));
    Irrep rep = cfg.group == GroupKind::Circle ? Irrep::circle(int(cfg.num.at("rep")))
                                               : Irrep::su2(int(cfg.num.at("rep")));
    auto series = expectation_wilson(lat, cfg.group, params, R, T, rep);
    auto csv = open_out(dir, "observables.csv");
    write_observables_csv({{"wilson", series}}, csv);
    checks.push_back({"wilson_mean", true,
                      fmt(series.mean) + " +/- " + fmt(series.stderr_)});
    if (spec.dim == 2 && spec.boundary == Boundary::Open) {
        double exact = exact_2d_wilson(rep, double(R) * T, params.beta);
        double dev = std::abs(series.mean - exact);
        bool ok = dev <= 3 * series.stderr_;
        checks.push_back({"wilson_vs_exact_2d", ok,
                          "measured " + fmt(series.mean) + ", exact " + fmt(exact) +
                              ", deviation " + fmt(dev) + " vs 3 sigma = " +
                              fmt(3 * series.stderr_)});
    }
}

inline void run_correlator(const RunConfig& cfg, const std::filesystem::path& dir,
                           std::vector<CheckResult>& checks, bool with_fit) {
    auto lat = build(lattice_from(cfg));
    auto params = mc_from(cfg);
    auto corr = temporal_correlator(lat, cfg.group, params, int(cfg.num.at("t_max")));
    auto csv = open_out(dir, "correlator.csv");
    write_correlator_csv(corr, csv);
    checks.push_back({"correlator", true,
                      "C(0) = " + fmt(corr.C[0]) + " +/- " + fmt(corr.stderr_[0])});
    if (!with_fit) return;
    auto fit = mass_gap_fit(corr);
    auto mg = open_out(dir, "massgap.csv");
    write_massgap_csv(fit, mg);
    checks.push_back({"mass_gap", true,
                      fit.gap_defined
                          ? "m = " + fmt(fit.m) + " +/- " + fmt(fit.stderr_)
                          : "gap undefined"});
}

inline void run_fw_eigenvalue(const RunConfig& cfg, const std::filesystem::path& dir,
                              std::vector<CheckResult>& checks) {
    auto model = GroundStateModel::single_link(cfg.group, cfg.num.at("beta"));
    auto p = sde_from(cfg, cfg.num.at("g"));
    auto recs = simulate_exits(model, p, std::vector<double>(model.dim, 0.0));
    {
        auto ex = open_out(dir, "exits.csv");
        write_exits_csv(recs, ex);
        auto sv = open_out(dir, "survival.csv");
        write_survival_csv(recs, sv);
    }
    auto est = eigenvalue_from_exits(recs);
    std::vector<std::tuple<double, double, double, std::string>> rows;
    rows.emplace_back(p.g, est.lambda0, est.stderr_, "exit_tail");
    rows.emplace_back(p.g, est.lambda0_mgf, est.mgf_stderr_, "mgf_pole");
    checks.push_back({"exit_tail_estimate", true,
                      "lambda0 = " + fmt(est.lambda0) + " +/- " + fmt(est.stderr_)});
    if (model.dim <= 2) {
        double ref = dirichlet_eigenvalue_fd(model, p.g, p.R, int(cfg.num.at("grid_n")));
        rows.emplace_back(p.g, ref, 0.0, "grid_fd");
        double rel = std::abs(est.lambda0 - ref) / ref;
        checks.push_back({"exit_vs_grid", rel <= 0.10,
                          "tail " + fmt(est.lambda0) + ", grid " + fmt(ref) +
                              ", rel dev " + fmt(rel)});
    }
    auto l0 = open_out(dir, "lambda0.csv");
    write_lambda0_csv(rows, l0);
}

inline void run_fw_scaling(const RunConfig& cfg, const std::filesystem::path& dir,
                           std::vector<CheckResult>& checks) {
    if (cfg.g_values.size() < 4)
        throw std::invalid_argument("fw-scaling needs >= 4 values in g_values, got " +
                                    std::to_string(cfg.g_values.size()));
    auto model = GroundStateModel::single_link(cfg.group, cfg.num.at("beta"));
    std::vector<std::tuple<double, double, double, std::string>> rows;
    std::vector<double> lams;
    for (double g : cfg.g_values) {
        auto p = sde_from(cfg, g);
        auto est = eigenvalue_from_exits(
            simulate_exits(model, p, std::vector<double>(model.dim, 0.0)));
        rows.emplace_back(g, est.lambda0, est.stderr_, "exit_tail");
        lams.push_back(est.lambda0);
    }
    auto l0 = open_out(dir, "lambda0.csv");
    write_lambda0_csv(rows, l0);
    auto fit = fw_scaling_fit(cfg.g_values, lams);
    double v_quasi = quasi_potential_gradient(model, cfg.num.at("radius"));
    auto fw = open_out(dir, "fwfit.csv");
    write_fwfit_csv(fit, v_quasi, fw);
    checks.push_back({"scaling_r2", fit.r2 >= 0.98, "r2 = " + fmt(fit.r2)});
    double rel = std::abs(fit.slope + v_quasi) / v_quasi;
    checks.push_back({"slope_vs_quasipotential", rel <= 0.15,
                      "slope " + fmt(fit.slope) + ", V " + fmt(v_quasi) + ", rel dev " +
                          fmt(rel)});
}

inline void run_quasipotential(const RunConfig& cfg, const std::filesystem::path& dir,
                               std::vector<CheckResult>& checks) {
    auto model = GroundStateModel::single_link(cfg.group, cfg.num.at("beta"));
    double R = cfg.num.at("radius");
    double v = quasi_potential_gradient(model, R);
    auto csv = open_out(dir, "quasipotential.csv");
    csv << "R,V\n" << R << ',' << v << '\n';
    checks.push_back({"quasipotential", v >= 0, "V = " + fmt(v)});
}

inline void run_condition_check(const RunConfig& cfg, const std::filesystem::path& dir,
                                std::vector<CheckResult>& checks) {
    auto model = GroundStateModel::single_link(cfg.group, cfg.num.at("beta"));
    double R = cfg.num.at("radius");
    std::mt19937_64 rng(cfg.seed);
    auto rep = omega_limit_check(model, R, 24, rng);
    bool single_at_origin = rep.limit_points.size() == 1 &&
                            norm2(rep.limit_points[0]) <= 1e-3;
    checks.push_back({"single_omega_limit", single_at_origin,
                      std::to_string(rep.limit_points.size()) + " limit set(s), residual " +
                          fmt(rep.max_residual)});
    checks.push_back({"no_inward_violations", rep.inward_violations == 0,
                      std::to_string(rep.inward_violations) + " violation(s)"});
    auto lip = lipschitz_check(model, R, int(cfg.num.at("grid_n")));
    checks.push_back({"lipschitz_drift", lip.pass, "L = " + fmt(lip.L)});
    auto csv = open_out(dir, "conditions.csv");
    csv << "check,pass,value\n";
    for (size_t i = checks.size() - 3; i < checks.size(); ++i)
        csv << checks[i].name << ',' << (checks[i].pass ? 1 : 0) << ",\""
            << checks[i].detail << "\"\n";
}

}  // namespace detail

// Executes the configured pipeline under cfg.out and writes manifest.json.
// Returns the process exit code.
inline int run(const RunConfig& cfg, std::ostream& log) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<CheckResult> checks;
    std::filesystem::path dir(cfg.out);
    int code = 0;
    try {
        std::filesystem::create_directories(dir);
        if (cfg.command == "kernel-check")
            detail::run_kernel_check(cfg, dir, checks);
        else if (cfg.command == "consistency")
            detail::run_consistency(cfg, dir, checks);
        else if (cfg.command == "sample")
            detail::run_sample(cfg, dir, checks);
        else if (cfg.command == "wilson")
            detail::run_wilson(cfg, dir, checks);
        else if (cfg.command == "correlator")
            detail::run_correlator(cfg, dir, checks, false);
        else if (cfg.command == "massgap")
            detail::run_correlator(cfg, dir, checks, true);
        else if (cfg.command == "fw-eigenvalue")
            detail::run_fw_eigenvalue(cfg, dir, checks);
        else if (cfg.command == "fw-scaling")
            detail::run_fw_scaling(cfg, dir, checks);
        else if (cfg.command == "quasipotential")
            detail::run_quasipotential(cfg, dir, checks);
        else if (cfg.command == "condition-check")
            detail::run_condition_check(cfg, dir, checks);
        else
            throw std::invalid_argument("unknown command " + cfg.command);
    } catch (const std::invalid_argument& e) {
        log << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::runtime_error& e) {
        // estimation failures (censoring, missing tail, infeasible fits)
        log << "check failed: " << e.what() << "\n";
        checks.push_back({"pipeline", false, e.what()});
        code = 2;
    }
    for (const auto& c : checks)
        if (!c.pass) code = std::max(code, 2);

    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    try {
        auto mf = detail::open_out(dir, "manifest.json");
        detail::write_manifest(cfg, checks, wall, mf);
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return 1;
    }
    for (const auto& c : checks)
        log << (c.pass ? "pass" : "FAIL") << "  " << c.name << ": " << c.detail << "\n";
    return code;
}

}  // namespace heatgauge
