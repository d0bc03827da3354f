#include "harnacklab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

namespace hl {

namespace {

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace

std::vector<double> boundary_values(const Lattice& lat,
                                    const std::vector<std::int64_t>& nodes,
                                    const BoundarySpec& spec, std::uint64_t seed) {
    if (spec.kind != "uniform" && spec.kind != "spike")
        throw Error("boundary spec: unknown kind '" + spec.kind + "'");
    std::vector<double> g(lat.size(), 0.0);
    Rng rng(Rng::derive(seed, 0x33));
    const double pi = 3.14159265358979323846;
    const double theta0 = 2 * pi * rng.next_unit();
    for (std::int64_t node : nodes) {
        const double base = rng.next_in(spec.base_lo, spec.base_hi);
        double val = base;
        if (spec.kind == "spike") {
            const Point p = lat.node(node);
            double dth = std::atan2(p[1], p[0]) - theta0;
            while (dth > pi) dth -= 2 * pi;
            while (dth < -pi) dth += 2 * pi;
            const double bump = std::exp(-(dth / spec.spike_width) * (dth / spec.spike_width));
            val = base + (spec.spike_height - base) * bump;
        }
        g[node] = std::min(1.0, std::max(0.0, val));
    }
    return g;
}

Instance build_and_solve(const InstanceSpec& spec, const SolveOptions& opts) {
    Instance inst;
    inst.spec = spec;
    if (spec.family == "discrete") {
        const Lattice lat = Lattice::centered(spec.dim, spec.eps, 1.0);
        const DiscreteEllipticOp op =
            DiscreteEllipticOp::random(lat, spec.lambda_min, spec.lambda_max, spec.seed);
        const std::vector<double> g =
            boundary_values(lat, boundary_nodes(lat), spec.boundary, spec.seed);
        const std::vector<double> f(lat.size(), 0.0);
        inst.u = solve_dirichlet(op, g, f, opts, &inst.solve);
    } else if (spec.family == "homogenized") {
        const Lattice lat = Lattice::centered(spec.dim, spec.spacing, 1.0);
        PeriodicDegenerateCoeffs coeffs;
        coeffs.dim = spec.dim;
        coeffs.eps = spec.eps;
        coeffs.lambda_max = spec.lambda_max;
        coeffs.floor = spec.coeff_floor;
        const std::vector<double> g =
            boundary_values(lat, boundary_nodes(lat), spec.boundary, spec.seed);
        const std::vector<double> f(lat.size(), 0.0);
        inst.u = solve_dirichlet(coeffs, lat, g, f, opts, &inst.solve);
    } else if (spec.family == "nonlocal") {
        const Lattice lat = Lattice::centered(spec.dim, spec.spacing, 2.0);
        const NonlocalKernel kernel = NonlocalKernel::random_anisotropic(
            lat, spec.sigma, spec.lambda_min, spec.lambda_max, spec.seed);
        std::vector<std::int64_t> data_nodes;
        for (std::int64_t i = 0; i < lat.size(); ++i) {
            const double r = norm(lat.node(i), lat.dim());
            if (r >= 1.0 && r <= 2.0) data_nodes.push_back(i);
        }
        const std::vector<double> g =
            boundary_values(lat, data_nodes, spec.boundary, spec.seed);
        const std::vector<double> f(lat.size(), 0.0);
        inst.u = solve_nonlocal(kernel, lat, g, f, opts, &inst.solve);
    } else {
        throw Error("instance: unknown family '" + spec.family + "'");
    }
    return inst;
}

GridFunction normalize_half_ball(const GridFunction& u) {
    double m = std::numeric_limits<double>::infinity();
    u.lattice().for_region(Ball{Point{}, 0.5}, [&](std::int64_t f, const Point&) {
        m = std::min(m, u[f]);
    });
    if (!(m > 0))
        throw Error("normalize_half_ball: minimum over B_{1/2} is " +
                    std::to_string(m) + ", cannot rescale");
    std::vector<double> v = u.values();
    for (double& x : v) x /= m;
    return GridFunction(u.lattice(), std::move(v));
}

GridFunction synthetic_function(const Lattice& lat, const std::string& name) {
    const int dim = lat.dim();
    if (name == "zero") return GridFunction::fill(lat, 0.0);
    if (name == "one") return GridFunction::fill(lat, 1.0);
    if (name == "quadratic_radial")
        return GridFunction::sample(lat, [&](const Point& p) { return norm2(p, dim); });
    if (name == "linear_x1")
        return GridFunction::sample(lat, [](const Point& p) { return p[0]; });
    if (name == "sqrt_abs_x1")
        return GridFunction::sample(lat, [](const Point& p) {
            return std::sqrt(std::abs(p[0]));
        });
    throw Error("synthetic function: unknown name '" + name + "'");
}

WeakHarnackReport weak_harnack_check(const GridFunction& u, double K) {
    u.require_finite("weak_harnack_check");
    for (double x : u.values())
        if (x < 0) throw Error("weak_harnack_check: u must be nonnegative");
    const Ball half{Point{}, 0.5};
    std::vector<double> vals;
    u.lattice().for_region(half, [&](std::int64_t f, const Point&) {
        vals.push_back(u[f]);
    });
    if (vals.empty()) throw Error("weak_harnack_check: B_{1/2} holds no node");
    const double min_half = *std::min_element(vals.begin(), vals.end());
    if (min_half > 1)
        throw Error("weak_harnack_check: min over B_{1/2} is " +
                    std::to_string(min_half) + " > 1; hypothesis u(xbar) <= 1 fails");
    WeakHarnackReport rep;
    rep.threshold_K = K;
    rep.nodes = static_cast<std::int64_t>(vals.size());
    std::int64_t hits = 0;
    for (double v : vals) hits += v <= K ? 1 : 0;
    rep.fraction = static_cast<double>(hits) / static_cast<double>(vals.size());
    rep.pass = rep.fraction >= 0.75;
    std::sort(vals.begin(), vals.end());
    const std::size_t need =
        static_cast<std::size_t>(std::ceil(0.75 * vals.size() - 1e-12));
    rep.smallest_K = vals[need - 1];
    return rep;
}

OscillationDecayReport oscillation_decay_check(const GridFunction& u, const Point& center,
                                               int k_max, double min_radius) {
    const Lattice& lat = u.lattice();
    const int dim = lat.dim();
    const double h = lat.spacing();
    OscillationDecayReport rep;
    const double resolve_limit = std::max(min_radius, 4 * h);
    for (int k = 1; k <= k_max; ++k) {
        const double r = std::ldexp(1.0, -k);
        if (r < resolve_limit * (1 - 1e-12)) {
            rep.truncated = true;
            break;
        }
        Ball ball{center, r};
        bool fits = true;
        for (int i = 0; i < dim; ++i)
            fits = fits &&
                   std::abs(center[i] - lat.center()[i]) + r <= lat.halfwidth()[i] + 1e-12;
        if (!fits) continue;
        rep.levels.push_back(k);
        rep.radii.push_back(r);
        rep.osc.push_back(oscillation(u, ball));
    }
    if (rep.levels.size() < 2)
        throw Error("oscillation_decay_check: fewer than two resolved levels");
    for (std::size_t i = 1; i < rep.osc.size(); ++i)
        rep.ratios.push_back(rep.osc[i - 1] > 0 ? rep.osc[i] / rep.osc[i - 1] : 0.0);
    // Least squares slope of log2(osc) against -k.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const std::size_t n = rep.levels.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!(rep.osc[i] > 0)) {
            rep.degenerate = true;
            rep.exponent = 0;
            break;
        }
        const double x = -static_cast<double>(rep.levels[i]);
        const double y = std::log2(rep.osc[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    if (!rep.degenerate)
        rep.exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    // Theorem-2.3 style contraction over one halving, when B_1 is available.
    bool has_unit = true;
    for (int i = 0; i < dim; ++i)
        has_unit = has_unit && std::abs(center[i] - lat.center()[i]) + 1.0 <=
                                   lat.halfwidth()[i] + 1e-12;
    if (has_unit) {
        const double o1 = oscillation(u, Ball{center, 1.0});
        const double oh = oscillation(u, Ball{center, 0.5});
        rep.eta_half = o1 > 0 ? 1.0 - oh / o1 : 0.0;
    }
    return rep;
}

CoverageReport coverage_check(const GridFunction& u, const CoverageParams& params) {
    u.require_finite("coverage_check");
    for (double x : u.values())
        if (x < 0) throw Error("coverage_check: u must be nonnegative");
    const Lattice& lat = u.lattice();
    double min_half = std::numeric_limits<double>::infinity();
    lat.for_region(Ball{Point{}, 0.5}, [&](std::int64_t f, const Point&) {
        min_half = std::min(min_half, u[f]);
    });
    if (min_half > 1)
        throw Error("coverage_check: min over B_{1/2} is " + std::to_string(min_half) +
                    " > 1; hypothesis u(xbar) <= 1 fails");

    const std::vector<Point> vertices = vertex_sample(lat, params.vertex_stride);
    CoverageReport rep;
    rep.mu = params.mu;
    rep.level = params.level;
    double prev = 0;
    for (int s = 0; s < params.steps; ++s) {
        const double a = params.a0 * std::pow(params.ratio, s);
        const ContactSet A = contact_set(u, a, vertices, params.jobs);
        const DyadicCover cover = dyadic_cover(A, u, params.level);
        const double frac = measure_fraction(
            lat,
            [&](std::int64_t, const Point& p) { return cover.covers(p, lat.dim()); },
            Ball{Point{}, 0.5});
        rep.openings.push_back(a);
        rep.fractions.push_back(frac);
        rep.gains.push_back(prev < 1 ? (frac - prev) / (1 - prev) : 0.0);
        prev = frac;
        if (!rep.reached_at && frac >= 1 - params.mu) rep.reached_at = a;
    }
    rep.pass = rep.reached_at.has_value();
    return rep;
}

SweepReport uniformity_sweep(const SweepConfig& cfg) {
    if (cfg.family != "eps_discrete" && cfg.family != "eps_homogenized" &&
        cfg.family != "sigma_nonlocal")
        throw Error("uniformity_sweep: unknown family '" + cfg.family + "'");
    if (cfg.values.empty()) throw Error("uniformity_sweep: no sweep values");
    if (cfg.track != "exponent" && cfg.track != "smallest_K")
        throw Error("uniformity_sweep: unknown tracked quantity '" + cfg.track + "'");

    SweepReport rep;
    rep.family = cfg.family;
    rep.track = cfg.track;
    rep.rows.resize(cfg.values.size());
    rep.ratio_bound = cfg.ratio_bound;

    auto run_row = [&](std::size_t idx) {
        SweepRow& row = rep.rows[idx];
        row.value = cfg.values[idx];
        const double t0 = now_s();
        try {
            double exp_max = 0, k_max_val = 0;
            for (int i = 0; i < cfg.instances; ++i) {
                InstanceSpec spec = cfg.base;
                // Same per-instance seeds across rows: the swept parameter is
                // the only thing that changes between rows.
                spec.seed = Rng::derive(cfg.base.seed, 1000 + i);
                if (cfg.family == "sigma_nonlocal") {
                    spec.family = "nonlocal";
                    spec.sigma = row.value;
                } else if (cfg.family == "eps_discrete") {
                    spec.family = "discrete";
                    spec.eps = row.value;
                } else {
                    spec.family = "homogenized";
                    spec.eps = row.value;
                }
                Instance inst = build_and_solve(spec, cfg.solve);
                // Decay is measured only at radii the instance resolves: at
                // least 4 spacings, and not below the oscillation scale for
                // the homogenization family.
                double min_radius = 4 * spec.grid_spacing();
                if (cfg.family == "eps_homogenized")
                    min_radius = std::max(min_radius, spec.eps);
                const OscillationDecayReport dec =
                    oscillation_decay_check(inst.u, Point{}, cfg.k_max, min_radius);
                const GridFunction un = normalize_half_ball(inst.u);
                const WeakHarnackReport wh = weak_harnack_check(un, 1.0);
                if (i == 0 || dec.exponent > exp_max) exp_max = dec.exponent;
                k_max_val = std::max(k_max_val, wh.smallest_K);
            }
            row.exponent = exp_max;
            row.smallest_K = k_max_val;
            row.tracked = cfg.track == "exponent" ? row.exponent : row.smallest_K;
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
        row.runtime_s = now_s() - t0;
    };

    if (cfg.jobs > 1 && rep.rows.size() > 1) {
        std::vector<std::thread> ws;
        for (std::size_t i = 0; i < rep.rows.size(); ++i) ws.emplace_back(run_row, i);
        for (auto& t : ws) t.join();
    } else {
        for (std::size_t i = 0; i < rep.rows.size(); ++i) run_row(i);
    }

    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    bool any_fail = false, all_positive = true;
    for (const SweepRow& r : rep.rows) {
        if (r.failed) {
            any_fail = true;
            continue;
        }
        lo = std::min(lo, r.tracked);
        hi = std::max(hi, r.tracked);
        all_positive = all_positive && r.tracked > 0;
    }
    rep.max_min_ratio = (lo > 0 && std::isfinite(lo)) ? hi / lo : 0.0;
    rep.pass = !any_fail && all_positive && rep.max_min_ratio <= cfg.ratio_bound &&
               rep.max_min_ratio > 0;
    return rep;
}

}  // namespace hl
