// hlab: configuration-driven front end for the contact-set laboratory.
// Commands: solve, check, experiment, validate. Exit codes: 0 pass,
// 1 threshold/check failure, 2 config error, 3 input-data error.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include "harnacklab/experiments.hpp"
#include "harnacklab/io.hpp"

using namespace hl;
namespace fs = std::filesystem;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- strict config access ----------------------------------------------------

const Json& need(const Json& j, const std::string& key, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end())
        throw ConfigError("config error at " + path + ": missing key '" + key + "'");
    return *it;
}

void reject_unknown(const Json& j, const std::set<std::string>& allowed,
                    const std::string& path) {
    if (!j.is_object())
        throw ConfigError("config error at " + path + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("config error at " + path + ": unknown key '" +
                              it.key() + "'");
}

double num(const Json& j, const std::string& key, const std::string& path,
           std::optional<double> def = std::nullopt) {
    auto it = j.find(key);
    if (it == j.end()) {
        if (def) return *def;
        throw ConfigError("config error at " + path + ": missing number '" + key + "'");
    }
    if (!it->is_number())
        throw ConfigError("config error at " + path + "/" + key + ": expected a number");
    return it->get<double>();
}

std::string str(const Json& j, const std::string& key, const std::string& path,
                std::optional<std::string> def = std::nullopt) {
    auto it = j.find(key);
    if (it == j.end()) {
        if (def) return *def;
        throw ConfigError("config error at " + path + ": missing string '" + key + "'");
    }
    if (!it->is_string())
        throw ConfigError("config error at " + path + "/" + key + ": expected a string");
    return it->get<std::string>();
}

bool flag(const Json& j, const std::string& key, bool def) {
    auto it = j.find(key);
    if (it == j.end()) return def;
    if (!it->is_boolean()) throw ConfigError("config error: '" + key + "' must be a bool");
    return it->get<bool>();
}

Json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), {});
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        // Byte offset -> line number for the message.
        std::size_t line = 1;
        for (std::size_t i = 0; i < std::min(text.size(), e.byte); ++i)
            if (text[i] == '\n') ++line;
        throw ConfigError("config error in " + path + " line " + std::to_string(line) +
                          ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config error: top level must be an object");
    if (num(j, "schema_version", "/") != 1)
        throw ConfigError("config error at /schema_version: expected 1");
    return j;
}

// --- shared sections ----------------------------------------------------------

Lattice parse_grid(const Json& g, const std::string& path) {
    reject_unknown(g, {"dim", "spacing", "halfwidth"}, path);
    const int dim = static_cast<int>(num(g, "dim", path, 2));
    const double spacing = num(g, "spacing", path);
    const double hw = num(g, "halfwidth", path, 1.0);
    try {
        return Lattice::centered(dim, spacing, hw);
    } catch (const Error& e) {
        throw ConfigError("config error at " + path + ": " + e.what());
    }
}

SolveOptions parse_solve_options(const Json& root, const std::string& base) {
    SolveOptions o;
    auto it = root.find("solve");
    if (it == root.end()) return o;
    const Json& s = *it;
    reject_unknown(s, {"tol", "max_sweeps", "nested_init", "check_every", "method",
                       "mg_smooth"},
                   base + "/solve");
    o.tol = num(s, "tol", base + "/solve", o.tol);
    o.max_sweeps = static_cast<std::int64_t>(num(s, "max_sweeps", base, 1e6));
    o.nested_init = flag(s, "nested_init", o.nested_init);
    o.check_every = static_cast<int>(num(s, "check_every", base, o.check_every));
    o.method = str(s, "method", base + "/solve", o.method);
    o.mg_smooth = static_cast<int>(num(s, "mg_smooth", base, o.mg_smooth));
    return o;
}

BoundarySpec parse_boundary(const Json& root, const std::string& base) {
    BoundarySpec b;
    auto it = root.find("boundary");
    if (it == root.end()) return b;
    const Json& j = *it;
    reject_unknown(j, {"kind", "base_lo", "base_hi", "spike_height", "spike_width",
                       "name", "value"},
                   base + "/boundary");
    b.kind = str(j, "kind", base + "/boundary", b.kind);
    b.base_lo = num(j, "base_lo", base, b.base_lo);
    b.base_hi = num(j, "base_hi", base, b.base_hi);
    b.spike_height = num(j, "spike_height", base, b.spike_height);
    b.spike_width = num(j, "spike_width", base, b.spike_width);
    return b;
}

InstanceSpec parse_instance(const Json& j, const std::string& path,
                            std::uint64_t default_seed) {
    reject_unknown(j,
                   {"family", "dim", "eps", "spacing", "sigma", "lambda_min",
                    "lambda_max", "coeff_floor", "seed", "boundary"},
                   path);
    InstanceSpec s;
    s.family = str(j, "family", path);
    s.dim = static_cast<int>(num(j, "dim", path, 2));
    s.eps = num(j, "eps", path, s.eps);
    s.spacing = num(j, "spacing", path, s.spacing);
    s.sigma = num(j, "sigma", path, s.sigma);
    s.lambda_min = num(j, "lambda_min", path, s.lambda_min);
    s.lambda_max = num(j, "lambda_max", path, s.lambda_max);
    s.coeff_floor = num(j, "coeff_floor", path, s.coeff_floor);
    s.seed = static_cast<std::uint64_t>(num(j, "seed", path, double(default_seed)));
    if (j.count("boundary")) s.boundary = parse_boundary(j, path);
    if (s.family == "nonlocal" && !(s.sigma > 0 && s.sigma < 2))
        throw ConfigError("config error at " + path +
                          "/sigma: sigma must lie in (0,2)");
    return s;
}

// Boundary data vector for a solve config (synthetic functions allowed).
std::vector<double> boundary_for(const Lattice& lat, const Json& root,
                                 const std::string& family, std::uint64_t seed) {
    std::vector<std::int64_t> nodes;
    if (family == "nonlocal") {
        for (std::int64_t i = 0; i < lat.size(); ++i) {
            const double r = norm(lat.node(i), lat.dim());
            if (r >= 1.0 && r <= 2.0) nodes.push_back(i);
        }
    } else {
        nodes = boundary_nodes(lat);
    }
    auto it = root.find("boundary");
    const std::string kind =
        it == root.end() ? "spike" : str(*it, "kind", "/boundary", "spike");
    if (kind == "function") {
        const std::string name = str(*it, "name", "/boundary");
        const GridFunction f = synthetic_function(lat, name);
        std::vector<double> g(lat.size(), 0.0);
        for (std::int64_t i : nodes) g[i] = f[i];
        return g;
    }
    if (kind == "constant") {
        const double v = num(*it, "value", "/boundary");
        std::vector<double> g(lat.size(), 0.0);
        for (std::int64_t i : nodes) g[i] = v;
        return g;
    }
    return boundary_values(lat, nodes, parse_boundary(root, ""), seed);
}

void write_json(const std::string& path, const Json& j) {
    write_text(path, j.dump(2) + "\n");
}

// --- commands ------------------------------------------------------------------

struct CommonArgs {
    std::string config;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    bool timing = false;
};

std::uint64_t config_seed(const Json& root, const CommonArgs& args) {
    if (args.seed) return *args.seed;
    return static_cast<std::uint64_t>(num(root, "seed", "/", 1.0));
}

int cmd_solve(const CommonArgs& args) {
    const Json root = load_config(args.config);
    reject_unknown(root,
                   {"schema_version", "seed", "grid", "operator", "boundary", "rhs",
                    "solve"},
                   "/");
    const std::uint64_t seed = config_seed(root, args);
    const Json& opj = need(root, "operator", "/");
    reject_unknown(opj,
                   {"family", "lambda_min", "lambda_max", "eps", "sigma",
                    "coeff_floor"},
                   "/operator");
    const std::string family = str(opj, "family", "/operator");
    const Lattice lat = parse_grid(need(root, "grid", "/"), "/grid");
    const SolveOptions opts = parse_solve_options(root, "");

    std::vector<double> f(lat.size(), 0.0);
    if (auto it = root.find("rhs"); it != root.end()) {
        reject_unknown(*it, {"kind", "value"}, "/rhs");
        const std::string kind = str(*it, "kind", "/rhs", "zero");
        if (kind == "constant") {
            const double v = num(*it, "value", "/rhs");
            const int dim = lat.dim();
            for (std::int64_t i = 0; i < lat.size(); ++i)
                if (is_interior_unit_ball(lat.node(i), dim)) f[i] = v;
        } else if (kind != "zero") {
            throw ConfigError("config error at /rhs/kind: unknown kind '" + kind + "'");
        }
    }
    const std::vector<double> g = boundary_for(lat, root, family, seed);

    SolveReport rep;
    GridFunction u;
    if (family == "discrete") {
        const DiscreteEllipticOp op = DiscreteEllipticOp::random(
            lat, num(opj, "lambda_min", "/operator", 1.0),
            num(opj, "lambda_max", "/operator", 1.0), seed);
        u = solve_dirichlet(op, g, f, opts, &rep);
    } else if (family == "homogenized") {
        PeriodicDegenerateCoeffs c;
        c.dim = lat.dim();
        c.eps = num(opj, "eps", "/operator");
        c.lambda_max = num(opj, "lambda_max", "/operator", 1.0);
        c.floor = num(opj, "coeff_floor", "/operator", 1e-8);
        u = solve_dirichlet(c, lat, g, f, opts, &rep);
    } else if (family == "nonlocal") {
        const double sigma = num(opj, "sigma", "/operator");
        if (!(sigma > 0 && sigma < 2))
            throw ConfigError(
                "config error at /operator/sigma: sigma must lie in (0,2)");
        const double lmin = num(opj, "lambda_min", "/operator", 1.0);
        const double lmax = num(opj, "lambda_max", "/operator", 1.0);
        const NonlocalKernel k =
            lmin == lmax && lmin == 1.0
                ? NonlocalKernel::reference(lat.dim(), sigma)
                : NonlocalKernel::random_anisotropic(lat, sigma, lmin, lmax, seed);
        u = solve_nonlocal(k, lat, g, f, opts, &rep);
    } else {
        throw ConfigError("config error at /operator/family: unknown family '" +
                          family + "'");
    }

    fs::create_directories(args.out);
    write_grid_function(args.out + "/solution.txt", u);
    write_json(args.out + "/solve_report.json", solve_report_json(rep, args.timing));
    std::cerr << "solve: " << rep.sweeps << " sweeps, residual " << rep.residual
              << ", " << rep.runtime_s << " s\n";
    return 0;
}

int cmd_check(const CommonArgs& args) {
    const Json root = load_config(args.config);
    reject_unknown(root, {"schema_version", "seed", "solution", "grid", "check"}, "/");
    const std::string sol_path = str(root, "solution", "/");
    GridFunction u;
    try {
        u = read_grid_function(sol_path);
    } catch (const Error& e) {
        throw InputError(e.what());
    }
    if (root.count("grid")) {
        const Lattice expect = parse_grid(root["grid"], "/grid");
        if (!expect.same_grid(u.lattice()))
            throw InputError("solution grid does not match the config grid");
    }

    const Json& cj = need(root, "check", "/");
    reject_unknown(cj,
                   {"definitions", "Lambda", "a_lo", "a_hi", "r", "M", "a", "rho",
                    "delta", "touch_K", "omega_radius", "directions",
                    "contact_opening", "vertex_stride"},
                   "/check");
    ClassParams params;
    params.lambda = num(cj, "Lambda", "/check", 4.0);
    params.a_lo = num(cj, "a_lo", "/check", 1.0);
    params.a_hi = num(cj, "a_hi", "/check", 1.0);
    params.r = num(cj, "r", "/check", 4 * u.lattice().spacing());
    params.weak_M = num(cj, "M", "/check", 2.0);
    params.weak_a = num(cj, "a", "/check", 1.0);
    params.rho = num(cj, "rho", "/check", 4 * u.lattice().spacing());
    params.delta = num(cj, "delta", "/check", 0.05);
    params.touch_K = num(cj, "touch_K", "/check", 4.0);
    params.omega = Ball{Point{}, num(cj, "omega_radius", "/check", 1.0)};
    const int ndir = static_cast<int>(num(cj, "directions", "/check", 32));
    const int stride = static_cast<int>(num(cj, "vertex_stride", "/check", 1));
    const double opening = num(cj, "contact_opening", "/check", 1.0);

    std::vector<std::string> defs;
    for (const auto& d : need(cj, "definitions", "/check"))
        defs.push_back(d.get<std::string>());
    const auto dirs = direction_sample(u.lattice().dim(), ndir);

    fs::create_directories(args.out);
    bool all_pass = true;
    std::optional<ContactSet> contact;
    auto get_contact = [&]() -> const ContactSet& {
        if (!contact) {
            contact = contact_set(u, opening, vertex_sample(u.lattice(), stride),
                                  args.jobs);
            write_contact_csv(args.out + "/contacts.csv", *contact, u.lattice());
        }
        return *contact;
    };
    for (const std::string& d : defs) {
        ViolationReport rep;
        if (d == "2.1") {
            rep = check_supersolution_local(
                u, params, dirs, opening_schedule(params.a_lo, params.a_hi), args.jobs);
        } else if (d == "2.5") {
            rep = check_supersolution_global(u, params, get_contact(), dirs);
        } else if (d == "2.2") {
            rep = check_weak_harnack(u, params, WeakHarnackMode::Pointwise).report;
        } else if (d == "2.6") {
            rep = check_weak_harnack(u, params, WeakHarnackMode::AtContacts,
                                     &get_contact())
                      .report;
        } else {
            throw ConfigError("config error at /check/definitions: unknown '" + d +
                              "'");
        }
        all_pass = all_pass && rep.pass;
        std::string name = d;
        for (char& c : name)
            if (c == '.') c = '_';
        write_json(args.out + "/check_" + name + ".json",
                   violation_report_json(rep, u.lattice()));
        std::cerr << "check " << d << ": " << (rep.pass ? "pass" : "fail") << " ("
                  << rep.witnesses.size() << " witnesses, " << rep.tested
                  << " tested)\n";
    }
    return all_pass ? 0 : 1;
}

int cmd_experiment(const CommonArgs& args) {
    const Json root = load_config(args.config);
    reject_unknown(root, {"schema_version", "seed", "experiment"}, "/");
    const std::uint64_t seed = config_seed(root, args);
    const Json& ej = need(root, "experiment", "/");
    const std::string kind = str(ej, "kind", "/experiment");
    fs::create_directories(args.out);

    bool pass = true;
    if (kind == "weak_harnack") {
        reject_unknown(ej, {"kind", "instances", "threshold_K", "instance", "grid",
                            "synthetic", "solve"},
                       "/experiment");
        const double K = num(ej, "threshold_K", "/experiment", 1.0);
        std::vector<std::vector<std::string>> rows;
        Json jrows = Json::array();
        if (ej.count("synthetic")) {
            const Lattice lat = parse_grid(need(ej, "grid", "/experiment"), "/grid");
            const GridFunction u =
                synthetic_function(lat, str(ej, "synthetic", "/experiment"));
            const WeakHarnackReport rep = weak_harnack_check(u, K);
            pass = rep.pass;
            rows.push_back({"0", "0", format_double(rep.fraction),
                            format_double(rep.smallest_K), rep.pass ? "1" : "0"});
            jrows.push_back(weak_harnack_json(rep));
        } else {
            const int n = static_cast<int>(num(ej, "instances", "/experiment", 1));
            const InstanceSpec base =
                parse_instance(need(ej, "instance", "/experiment"), "/instance", seed);
            const SolveOptions opts = parse_solve_options(ej, "/experiment");
            for (int i = 0; i < n; ++i) {
                InstanceSpec spec = base;
                spec.seed = Rng::derive(seed, 1000 + i);
                const Instance inst = build_and_solve(spec, opts);
                const GridFunction un = normalize_half_ball(inst.u);
                const WeakHarnackReport rep = weak_harnack_check(un, K);
                pass = pass && rep.smallest_K > 0;
                rows.push_back({std::to_string(i), std::to_string(spec.seed),
                                format_double(rep.fraction),
                                format_double(rep.smallest_K), rep.pass ? "1" : "0"});
                jrows.push_back(weak_harnack_json(rep));
            }
        }
        Json out;
        out["experiment"] = "weak_harnack";
        out["config"] = ej;
        out["threshold_K"] = K;
        out["rows"] = jrows;
        out["pass"] = pass;
        write_json(args.out + "/weak_harnack_report.json", out);
        write_csv(args.out + "/weak_harnack.csv",
                  {"instance", "seed", "fraction", "smallest_K", "pass"}, rows);
    } else if (kind == "oscillation_decay") {
        reject_unknown(ej, {"kind", "k_max", "grid", "synthetic", "instance", "solve"},
                       "/experiment");
        const int k_max = static_cast<int>(num(ej, "k_max", "/experiment", 7));
        GridFunction u;
        double min_radius = 0;
        if (ej.count("synthetic")) {
            const Lattice lat = parse_grid(need(ej, "grid", "/experiment"), "/grid");
            u = synthetic_function(lat, str(ej, "synthetic", "/experiment"));
        } else {
            const InstanceSpec spec =
                parse_instance(need(ej, "instance", "/experiment"), "/instance", seed);
            const SolveOptions opts = parse_solve_options(ej, "/experiment");
            u = build_and_solve(spec, opts).u;
            if (spec.family == "homogenized") min_radius = spec.eps;
        }
        const OscillationDecayReport rep =
            oscillation_decay_check(u, Point{}, k_max, min_radius);
        pass = !rep.degenerate;
        Json out;
        out["experiment"] = "oscillation_decay";
        out["config"] = ej;
        out["result"] = oscillation_decay_json(rep);
        out["pass"] = pass;
        write_json(args.out + "/oscillation_decay_report.json", out);
        std::vector<std::vector<std::string>> rows;
        for (std::size_t i = 0; i < rep.levels.size(); ++i)
            rows.push_back({std::to_string(rep.levels[i]), format_double(rep.radii[i]),
                            format_double(rep.osc[i]),
                            i > 0 ? format_double(rep.ratios[i - 1]) : ""});
        write_csv(args.out + "/oscillation_decay.csv", {"k", "radius", "osc", "ratio"},
                  rows);
    } else if (kind == "coverage") {
        reject_unknown(ej, {"kind", "grid", "synthetic", "instance", "a0", "ratio",
                            "steps", "level", "mu", "vertex_stride", "solve"},
                       "/experiment");
        CoverageParams p;
        p.a0 = num(ej, "a0", "/experiment", 1.0);
        p.ratio = num(ej, "ratio", "/experiment", 2.0);
        p.steps = static_cast<int>(num(ej, "steps", "/experiment", 4));
        p.level = static_cast<int>(num(ej, "level", "/experiment", 3));
        p.mu = num(ej, "mu", "/experiment", 0.125);
        p.vertex_stride = static_cast<int>(num(ej, "vertex_stride", "/experiment", 1));
        p.jobs = args.jobs;
        GridFunction u;
        if (ej.count("synthetic")) {
            const Lattice lat = parse_grid(need(ej, "grid", "/experiment"), "/grid");
            u = synthetic_function(lat, str(ej, "synthetic", "/experiment"));
        } else {
            const InstanceSpec spec =
                parse_instance(need(ej, "instance", "/experiment"), "/instance", seed);
            const SolveOptions opts = parse_solve_options(ej, "/experiment");
            u = normalize_half_ball(build_and_solve(spec, opts).u);
        }
        const CoverageReport rep = coverage_check(u, p);
        pass = rep.pass;
        Json out;
        out["experiment"] = "coverage";
        out["config"] = ej;
        out["result"] = coverage_json(rep);
        out["pass"] = pass;
        write_json(args.out + "/coverage_report.json", out);
        std::vector<std::vector<std::string>> rows;
        for (std::size_t i = 0; i < rep.openings.size(); ++i)
            rows.push_back({std::to_string(i), format_double(rep.openings[i]),
                            format_double(rep.fractions[i]),
                            format_double(rep.gains[i])});
        write_csv(args.out + "/coverage.csv", {"step", "opening", "fraction", "gain"},
                  rows);
    } else if (kind == "separation") {
        reject_unknown(ej, {"kind", "grid", "synthetic", "instance", "opening", "r",
                            "C0", "vertex_stride", "solve"},
                       "/experiment");
        const double opening = num(ej, "opening", "/experiment", 1.0);
        const double C0 = num(ej, "C0", "/experiment", 8.0);
        const int stride = static_cast<int>(num(ej, "vertex_stride", "/experiment", 1));
        GridFunction u;
        double r = 0;
        if (ej.count("synthetic")) {
            const Lattice lat = parse_grid(need(ej, "grid", "/experiment"), "/grid");
            u = synthetic_function(lat, str(ej, "synthetic", "/experiment"));
            r = num(ej, "r", "/experiment", 4 * lat.spacing());
        } else {
            const InstanceSpec spec =
                parse_instance(need(ej, "instance", "/experiment"), "/instance", seed);
            const SolveOptions opts = parse_solve_options(ej, "/experiment");
            u = normalize_half_ball(build_and_solve(spec, opts).u);
            r = num(ej, "r", "/experiment", 2 * spec.grid_spacing());
        }
        const SeparationReport rep = vertex_contact_separation(
            u, opening, vertex_sample(u.lattice(), stride), r, C0);
        pass = rep.min_ratio > 0;
        Json out;
        out["experiment"] = "separation";
        out["config"] = ej;
        out["result"] = separation_json(rep, u.lattice().dim());
        out["pass"] = pass;
        write_json(args.out + "/separation_report.json", out);
        write_csv(args.out + "/separation.csv",
                  {"pairs", "contacts", "min_ratio", "max_ratio"},
                  {{std::to_string(rep.pairs_tested), std::to_string(rep.contacts_used),
                    format_double(rep.min_ratio), format_double(rep.max_ratio)}});
    } else if (kind == "sweep") {
        reject_unknown(ej, {"kind", "family", "values", "track", "ratio_bound",
                            "instances", "k_max", "instance", "solve"},
                       "/experiment");
        SweepConfig cfg;
        cfg.family = str(ej, "family", "/experiment");
        for (const auto& v : need(ej, "values", "/experiment"))
            cfg.values.push_back(v.get<double>());
        cfg.base =
            parse_instance(need(ej, "instance", "/experiment"), "/instance", seed);
        cfg.base.seed = seed;
        cfg.track = str(ej, "track", "/experiment", "exponent");
        cfg.ratio_bound = num(ej, "ratio_bound", "/experiment", 1.5);
        cfg.instances = static_cast<int>(num(ej, "instances", "/experiment", 1));
        cfg.k_max = static_cast<int>(num(ej, "k_max", "/experiment", 7));
        cfg.jobs = args.jobs;
        cfg.solve = parse_solve_options(ej, "/experiment");
        const SweepReport rep = uniformity_sweep(cfg);
        pass = rep.pass;
        Json out;
        out["experiment"] = "sweep";
        out["config"] = ej;
        out["result"] = sweep_json(rep, args.timing);
        out["pass"] = pass;
        write_json(args.out + "/sweep_report.json", out);
        const std::string value_col = cfg.family == "sigma_nonlocal" ? "sigma" : "eps";
        std::vector<std::vector<std::string>> rows;
        for (const SweepRow& row : rep.rows)
            rows.push_back({format_double(row.value),
                            row.failed ? "" : format_double(row.exponent),
                            row.failed ? "" : format_double(row.smallest_K),
                            format_double(args.timing ? row.runtime_s : 0.0)});
        write_csv(args.out + "/sweep.csv", {value_col, "exponent", "K", "runtime_s"},
                  rows);
    } else if (kind == "kernel_moment") {
        reject_unknown(ej, {"kind", "dim", "sigmas", "spacings", "radius", "tolerance"},
                       "/experiment");
        const int dim = static_cast<int>(num(ej, "dim", "/experiment", 2));
        const double R = num(ej, "radius", "/experiment", 1.0);
        const double tolerance = num(ej, "tolerance", "/experiment", 0.05);
        std::vector<std::vector<std::string>> rows;
        Json jrows = Json::array();
        for (const auto& sj : need(ej, "sigmas", "/experiment")) {
            for (const auto& hj : need(ej, "spacings", "/experiment")) {
                const double sigma = sj.get<double>();
                const double h = hj.get<double>();
                const MomentReport m = kernel_moment(dim, h, sigma, R);
                const double rel =
                    m.resolved ? std::abs(m.total - m.analytic) / m.analytic : 0.0;
                pass = pass && (!m.resolved || rel <= tolerance);
                rows.push_back({format_double(sigma), format_double(h),
                                format_double(m.total), format_double(m.analytic),
                                format_double(rel), m.resolved ? "1" : "0"});
                Json r;
                r["sigma"] = sigma;
                r["h"] = h;
                r["lattice_sum"] = m.lattice_sum;
                r["center_cell"] = m.center_cell;
                r["total"] = m.total;
                r["analytic"] = m.analytic;
                r["scale_radius"] = m.scale_radius;
                r["resolved"] = m.resolved;
                jrows.push_back(r);
            }
        }
        Json out;
        out["experiment"] = "kernel_moment";
        out["config"] = ej;
        out["rows"] = jrows;
        out["pass"] = pass;
        write_json(args.out + "/kernel_moment_report.json", out);
        write_csv(args.out + "/kernel_moment.csv",
                  {"sigma", "h", "total", "analytic", "rel_err", "resolved"}, rows);
    } else {
        throw ConfigError("config error at /experiment/kind: unknown kind '" + kind +
                          "'");
    }
    std::cerr << "experiment " << kind << ": " << (pass ? "pass" : "fail") << "\n";
    return pass ? 0 : 1;
}

int cmd_validate(const CommonArgs& args) {
    load_config(args.config);
    std::cout << "config ok\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"contact-set laboratory for Harnack-type estimates"};
    app.require_subcommand(1);

    CommonArgs args;
    std::uint64_t seed_arg = 0;
    bool seed_given = false;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", args.config, "JSON config path")->required();
        cmd->add_option("--out", args.out, "output directory");
        cmd->add_option("--seed", seed_arg, "seed override")
            ->each([&](const std::string&) { seed_given = true; });
        cmd->add_option("--jobs", args.jobs, "worker cap for node-parallel steps");
        cmd->add_flag("--timing", args.timing,
                      "record wall-clock times in reports (not reproducible)");
    };
    CLI::App* solve = app.add_subcommand("solve", "build an instance and solve it");
    CLI::App* check = app.add_subcommand("check", "run class-membership checkers");
    CLI::App* experiment =
        app.add_subcommand("experiment", "run a theorem-conclusion experiment");
    CLI::App* validate = app.add_subcommand("validate", "config lint only");
    for (CLI::App* c : {solve, check, experiment, validate}) add_common(c);

    CLI11_PARSE(app, argc, argv);
    if (seed_given) args.seed = seed_arg;

    try {
        if (solve->parsed()) return cmd_solve(args);
        if (check->parsed()) return cmd_check(args);
        if (experiment->parsed()) return cmd_experiment(args);
        if (validate->parsed()) return cmd_validate(args);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const InputError& e) {
        std::cerr << e.what() << "\n";
        return 3;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
