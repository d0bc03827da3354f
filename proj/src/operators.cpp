#include "harnacklab/operators.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>

namespace hl {

namespace {

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

// 64-point Gauss-Legendre nodes/weights on [0, 1], computed once by Newton
// iteration on the Legendre recurrence.
struct Gauss64 {
    double x[64], w[64];
    Gauss64() {
        const int n = 64;
        const double pi = 3.14159265358979323846;
        for (int i = 0; i < n / 2; ++i) {
            double t = std::cos(pi * (i + 0.75) / (n + 0.5));
            double p0, p1, dp;
            for (int it = 0; it < 100; ++it) {
                p0 = 1;
                p1 = t;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (t * p1 - p0) / (t * t - 1);
                const double dt = p1 / dp;
                t -= dt;
                if (std::abs(dt) < 1e-15) break;
            }
            x[i] = (1 - t) / 2;
            x[n - 1 - i] = (1 + t) / 2;
            w[i] = w[n - 1 - i] = 1.0 / ((1 - t * t) * dp * dp);
        }
    }
};

const Gauss64& gauss64() {
    static const Gauss64 g;
    return g;
}

}  // namespace

// --- discrete elliptic ------------------------------------------------------

void DiscreteEllipticOp::validate() const {
    if (static_cast<std::int64_t>(lambda.size()) != lattice.size() * lattice.dim())
        throw Error("discrete operator: coefficient count does not match lattice");
    if (!(lambda_min > 0) || !(lambda_max >= lambda_min))
        throw Error("discrete operator: need 0 < lambda_min <= lambda_max");
    for (double l : lambda)
        if (!(l >= lambda_min * (1 - 1e-12) && l <= lambda_max * (1 + 1e-12)))
            throw Error("discrete operator: coefficient outside [lambda_min, lambda_max]");
}

DiscreteEllipticOp DiscreteEllipticOp::constant(const Lattice& lat, double lam) {
    DiscreteEllipticOp op;
    op.lattice = lat;
    op.lambda.assign(lat.size() * lat.dim(), lam);
    op.lambda_min = op.lambda_max = lam;
    return op;
}

DiscreteEllipticOp DiscreteEllipticOp::random(const Lattice& lat, double lam_min,
                                              double lam_max, std::uint64_t seed) {
    DiscreteEllipticOp op;
    op.lattice = lat;
    op.lambda_min = lam_min;
    op.lambda_max = lam_max;
    op.lambda.resize(lat.size() * lat.dim());
    Rng rng(Rng::derive(seed, 0x11));
    for (double& l : op.lambda) l = rng.next_in(lam_min, lam_max);
    return op;
}

double apply_discrete(const DiscreteEllipticOp& op, const GridFunction& u,
                      std::int64_t node) {
    const Lattice& lat = op.lattice;
    if (!lat.same_grid(u.lattice()))
        throw Error("apply_discrete: operator and function grids differ");
    const int dim = lat.dim();
    int iv[kMaxDim];
    lat.decode(node, iv);
    for (int ax = 0; ax < dim; ++ax)
        if (iv[ax] == 0 || iv[ax] == lat.count(ax) - 1)
            throw Error("apply_discrete: node lies on the lattice boundary");
    const double h2 = lat.spacing() * lat.spacing();
    double s = 0;
    for (int ax = 0; ax < dim; ++ax) {
        const std::int64_t st = lat.stride(ax);
        s += op.lam(node, ax) * (u[node + st] + u[node - st] - 2 * u[node]);
    }
    return s / h2;
}

// --- degenerate periodic coefficients ---------------------------------------

double PeriodicDegenerateCoeffs::lambda_per(const Point& x) const {
    // dist_inf(frac(x/eps), D) with D = [1/4, 3/4]^n in the period cell.
    double d = 0;
    for (int i = 0; i < dim; ++i) {
        const double t = x[i] / eps;
        const double f = t - std::floor(t);
        d = std::max(d, std::max(0.0, std::abs(f - 0.5) - 0.25));
    }
    return std::min(lambda_max, lambda_max * 4 * d);
}

DiscreteEllipticOp PeriodicDegenerateCoeffs::build(const Lattice& lat) const {
    DiscreteEllipticOp op;
    op.lattice = lat;
    op.lambda.resize(lat.size() * lat.dim());
    op.lambda_min = floor;
    op.lambda_max = lambda_max;
    for (std::int64_t i = 0; i < lat.size(); ++i) {
        const double l = std::max(floor, lambda_per(lat.node(i)));
        for (int ax = 0; ax < dim; ++ax) op.lambda[i * dim + ax] = l;
    }
    return op;
}

std::vector<double> PeriodicDegenerateCoeffs::unfloored(const Lattice& lat) const {
    std::vector<double> out(lat.size());
    for (std::int64_t i = 0; i < lat.size(); ++i) out[i] = lambda_per(lat.node(i));
    return out;
}

// --- Dirichlet Gauss-Seidel --------------------------------------------------

std::vector<std::int64_t> interior_nodes(const Lattice& lat) {
    std::vector<std::int64_t> out;
    for (std::int64_t i = 0; i < lat.size(); ++i)
        if (is_interior_unit_ball(lat.node(i), lat.dim())) out.push_back(i);
    return out;
}

std::vector<std::int64_t> boundary_nodes(const Lattice& lat) {
    std::vector<std::int64_t> out;
    for (std::int64_t i = 0; i < lat.size(); ++i)
        if (!is_interior_unit_ball(lat.node(i), lat.dim())) out.push_back(i);
    return out;
}

namespace {

bool can_coarsen(const Lattice& lat, double max_spacing) {
    if (lat.spacing() * 2 > max_spacing * (1 + 1e-12)) return false;
    for (int ax = 0; ax < lat.dim(); ++ax)
        if (((lat.count(ax) - 1) / 2) % 2 != 0) return false;
    return true;
}

Lattice coarsen(const Lattice& lat) {
    return Lattice::build(lat.dim(), lat.spacing() * 2, lat.center(), lat.halfwidth());
}

// Flat index of the fine node coinciding with a coarse node.
std::int64_t fine_of_coarse(const Lattice& fine, const Lattice& coarse, std::int64_t cf) {
    int iv[kMaxDim];
    coarse.decode(cf, iv);
    int fiv[kMaxDim];
    for (int ax = 0; ax < fine.dim(); ++ax) fiv[ax] = 2 * iv[ax];
    return fine.flat(fiv);
}

// Multilinear prolongation of coarse values onto the fine lattice.
std::vector<double> prolong(const Lattice& fine, const Lattice& coarse,
                            const std::vector<double>& vc) {
    std::vector<double> vf(fine.size());
    const int dim = fine.dim();
    int iv[kMaxDim];
    for (std::int64_t f = 0; f < fine.size(); ++f) {
        fine.decode(f, iv);
        int base[kMaxDim];
        int odd[kMaxDim];
        int nodd = 0;
        for (int ax = 0; ax < dim; ++ax) {
            base[ax] = iv[ax] / 2;
            odd[ax] = iv[ax] % 2;
            nodd += odd[ax];
        }
        double acc = 0;
        const int corners = 1 << nodd;
        for (int c = 0; c < corners; ++c) {
            int civ[kMaxDim];
            int bit = 0;
            for (int ax = 0; ax < dim; ++ax) {
                civ[ax] = base[ax];
                if (odd[ax]) {
                    civ[ax] += (c >> bit) & 1;
                    ++bit;
                }
                civ[ax] = std::min(civ[ax], coarse.count(ax) - 1);
            }
            acc += vc[coarse.flat(civ)];
        }
        vf[f] = acc / corners;
    }
    return vf;
}

struct DirichletWork {
    std::vector<std::int64_t> interior;
    std::vector<double> inv_diag;  // 1 / (2 sum_i lambda_i)
    // Packed per-interior coefficients for the sweep hot loop.
    std::vector<double> lam_packed;  // dim entries per interior node
};

DirichletWork dirichlet_work(const DiscreteEllipticOp& op) {
    DirichletWork w;
    w.interior = interior_nodes(op.lattice);
    const int dim = op.lattice.dim();
    w.inv_diag.resize(w.interior.size());
    w.lam_packed.resize(w.interior.size() * dim);
    for (std::size_t k = 0; k < w.interior.size(); ++k) {
        double s = 0;
        for (int ax = 0; ax < dim; ++ax) {
            const double l = op.lam(w.interior[k], ax);
            w.lam_packed[k * dim + ax] = l;
            s += l;
        }
        w.inv_diag[k] = 1.0 / (2 * s);
    }
    return w;
}

double dirichlet_residual(const DiscreteEllipticOp& op, const DirichletWork& w,
                          const std::vector<double>& u, const std::vector<double>& f) {
    const Lattice& lat = op.lattice;
    const int dim = lat.dim();
    const double h2 = lat.spacing() * lat.spacing();
    double r = 0;
    if (dim == 2) {
        const std::int64_t s0 = lat.stride(0);
        const double* uu = u.data();
        const double* lp = w.lam_packed.data();
        for (std::size_t k = 0; k < w.interior.size(); ++k) {
            const std::int64_t n = w.interior[k];
            const double s = lp[2 * k] * (uu[n - s0] + uu[n + s0] - 2 * uu[n]) +
                             lp[2 * k + 1] * (uu[n - 1] + uu[n + 1] - 2 * uu[n]);
            r = std::max(r, std::abs(s / h2 - f[n]));
        }
        return r;
    }
    for (std::size_t k = 0; k < w.interior.size(); ++k) {
        const std::int64_t node = w.interior[k];
        double s = 0;
        for (int ax = 0; ax < dim; ++ax) {
            const std::int64_t st = lat.stride(ax);
            s += w.lam_packed[k * dim + ax] * (u[node + st] + u[node - st] - 2 * u[node]);
        }
        r = std::max(r, std::abs(s / h2 - f[node]));
    }
    return r;
}

// A fixed number of lexicographic GS sweeps; rhs is pre-scaled by inv_diag.
void run_sweeps(const DiscreteEllipticOp& op, const DirichletWork& w,
                std::vector<double>& u, const std::vector<double>& rhs, int count) {
    const Lattice& lat = op.lattice;
    const int dim = lat.dim();
    const std::size_t ni = w.interior.size();
    if (dim == 2) {
        const std::int64_t s0 = lat.stride(0);
        for (int s = 0; s < count; ++s) {
            double* uu = u.data();
            const std::int64_t* nodes = w.interior.data();
            const double* lp = w.lam_packed.data();
            const double* inv = w.inv_diag.data();
            const double* r = rhs.data();
            for (std::size_t k = 0; k < ni; ++k) {
                const std::int64_t n = nodes[k];
                uu[n] = (lp[2 * k] * (uu[n - s0] + uu[n + s0]) +
                         lp[2 * k + 1] * (uu[n - 1] + uu[n + 1])) *
                            inv[k] -
                        r[k];
            }
        }
        return;
    }
    for (int s = 0; s < count; ++s) {
        for (std::size_t k = 0; k < ni; ++k) {
            const std::int64_t node = w.interior[k];
            double acc = 0;
            for (int ax = 0; ax < dim; ++ax) {
                const std::int64_t st = lat.stride(ax);
                acc += w.lam_packed[k * dim + ax] * (u[node + st] + u[node - st]);
            }
            u[node] = acc * w.inv_diag[k] - rhs[k];
        }
    }
}

std::vector<double> scaled_rhs(const DiscreteEllipticOp& op, const DirichletWork& w,
                               const std::vector<double>& f) {
    const double h2 = op.lattice.spacing() * op.lattice.spacing();
    std::vector<double> rhs(w.interior.size());
    for (std::size_t k = 0; k < w.interior.size(); ++k)
        rhs[k] = h2 * f[w.interior[k]] * w.inv_diag[k];
    return rhs;
}

// Core Gauss-Seidel loop with a fixed lexicographic sweep; `u` enters with
// boundary values set and an initial interior guess.
void gs_iterate(const DiscreteEllipticOp& op, const DirichletWork& w,
                std::vector<double>& u, const std::vector<double>& f,
                const SolveOptions& opts, SolveReport* rep) {
    const Lattice& lat = op.lattice;
    const int dim = lat.dim();
    const double h2 = lat.spacing() * lat.spacing();
    const std::size_t ni = w.interior.size();
    std::vector<double> rhs(ni);
    for (std::size_t k = 0; k < ni; ++k)
        rhs[k] = h2 * f[w.interior[k]] * w.inv_diag[k];

    auto sweep2 = [&]() {
        // dim == 2 hot path: stride(1) == 1.
        const std::int64_t s0 = lat.stride(0);
        double* uu = u.data();
        const std::int64_t* nodes = w.interior.data();
        const double* lp = w.lam_packed.data();
        const double* inv = w.inv_diag.data();
        const double* r = rhs.data();
        for (std::size_t k = 0; k < ni; ++k) {
            const std::int64_t n = nodes[k];
            uu[n] = (lp[2 * k] * (uu[n - s0] + uu[n + s0]) +
                     lp[2 * k + 1] * (uu[n - 1] + uu[n + 1])) *
                        inv[k] -
                    r[k];
        }
    };
    auto sweep_nd = [&]() {
        for (std::size_t k = 0; k < ni; ++k) {
            const std::int64_t node = w.interior[k];
            double s = 0;
            for (int ax = 0; ax < dim; ++ax) {
                const std::int64_t st = lat.stride(ax);
                s += w.lam_packed[k * dim + ax] * (u[node + st] + u[node - st]);
            }
            u[node] = s * w.inv_diag[k] - rhs[k];
        }
    };

    std::int64_t sweeps = 0;
    double res = dirichlet_residual(op, w, u, f);
    while (res > opts.tol) {
        if (sweeps >= opts.max_sweeps)
            throw ConvergenceError(
                "solve_dirichlet: no convergence within " +
                    std::to_string(sweeps) +
                    " sweeps (residual " + std::to_string(res) + ")",
                res);
        const int burst = std::max(1, opts.check_every);
        for (int b = 0; b < burst && sweeps < opts.max_sweeps; ++b, ++sweeps) {
            if (dim == 2)
                sweep2();
            else
                sweep_nd();
        }
        res = dirichlet_residual(op, w, u, f);
    }
    if (rep) {
        rep->sweeps += sweeps;
        rep->residual = res;
        rep->converged = true;
    }
}

// Restriction of the operator/data onto the coarse lattice (coincident nodes).
DiscreteEllipticOp restrict_op(const DiscreteEllipticOp& op, const Lattice& coarse) {
    DiscreteEllipticOp c;
    c.lattice = coarse;
    c.lambda_min = op.lambda_min;
    c.lambda_max = op.lambda_max;
    const int dim = coarse.dim();
    c.lambda.resize(coarse.size() * dim);
    for (std::int64_t i = 0; i < coarse.size(); ++i) {
        const std::int64_t f = fine_of_coarse(op.lattice, coarse, i);
        for (int ax = 0; ax < dim; ++ax) c.lambda[i * dim + ax] = op.lam(f, ax);
    }
    return c;
}

// Coefficient restriction for the multigrid hierarchy: rough per-node fields
// need local averaging or the coarse operator misrepresents the fine one.
// Per axis, average the fine coefficient over the full-weighting footprint.
DiscreteEllipticOp restrict_op_averaged(const DiscreteEllipticOp& op,
                                        const Lattice& coarse) {
    DiscreteEllipticOp c;
    c.lattice = coarse;
    c.lambda_min = op.lambda_min;
    c.lambda_max = op.lambda_max;
    const Lattice& fine = op.lattice;
    const int dim = coarse.dim();
    c.lambda.resize(coarse.size() * dim);
    int civ[kMaxDim], fiv[kMaxDim], div[kMaxDim];
    int p3 = 1;
    for (int ax = 0; ax < dim; ++ax) p3 *= 3;
    for (std::int64_t i = 0; i < coarse.size(); ++i) {
        coarse.decode(i, civ);
        for (int ax = 0; ax < dim; ++ax) fiv[ax] = 2 * civ[ax];
        double acc[kMaxDim] = {0, 0, 0, 0};
        double wsum = 0;
        for (int m = 0; m < p3; ++m) {
            int mm = m;
            bool ok = true;
            double wgt = 1;
            for (int ax = 0; ax < dim; ++ax) {
                const int o = mm % 3 - 1;
                mm /= 3;
                div[ax] = fiv[ax] + o;
                wgt *= o == 0 ? 0.5 : 0.25;
                if (div[ax] < 0 || div[ax] >= fine.count(ax)) ok = false;
            }
            if (!ok) continue;
            const std::int64_t f = fine.flat(div);
            wsum += wgt;
            for (int ax = 0; ax < dim; ++ax) acc[ax] += wgt * op.lam(f, ax);
        }
        for (int ax = 0; ax < dim; ++ax) c.lambda[i * dim + ax] = acc[ax] / wsum;
    }
    return c;
}

std::vector<double> restrict_values(const Lattice& fine, const Lattice& coarse,
                                    const std::vector<double>& v) {
    std::vector<double> out(coarse.size());
    for (std::int64_t i = 0; i < coarse.size(); ++i)
        out[i] = v[fine_of_coarse(fine, coarse, i)];
    return out;
}

// Multigrid V-cycles with lexicographic GS smoothing: same fixed point and
// stopping rule as the plain sweep, O(N) work per digit. Rediscretized
// coarse operators, full-weighting restriction, bilinear prolongation.
std::vector<double> solve_mg(const DiscreteEllipticOp& op, const std::vector<double>& g,
                             const std::vector<double>& f, const SolveOptions& opts,
                             SolveReport* rep);

std::vector<double> solve_dirichlet_values(const DiscreteEllipticOp& op,
                                           const std::vector<double>& g,
                                           const std::vector<double>& f,
                                           const SolveOptions& opts, SolveReport* rep);

std::vector<double> solve_mg(const DiscreteEllipticOp& op, const std::vector<double>& g,
                             const std::vector<double>& f, const SolveOptions& opts,
                             SolveReport* rep) {
    std::vector<DiscreteEllipticOp> ops;
    ops.push_back(op);
    while (can_coarsen(ops.back().lattice, 0.25))
        ops.push_back(restrict_op_averaged(ops.back(), coarsen(ops.back().lattice)));
    const int L = static_cast<int>(ops.size());
    if (L < 2) {
        SolveOptions plain = opts;
        plain.method = "gs";
        return solve_dirichlet_values(op, g, f, plain, rep);
    }

    std::vector<DirichletWork> works(L);
    std::vector<std::vector<double>> us(L), fs(L);
    for (int l = 0; l < L; ++l) {
        works[l] = dirichlet_work(ops[l]);
        us[l].assign(ops[l].lattice.size(), 0.0);
        fs[l].assign(ops[l].lattice.size(), 0.0);
    }
    fs[0] = f;
    const Lattice& lat = op.lattice;
    for (std::int64_t i = 0; i < lat.size(); ++i)
        if (!is_interior_unit_ball(lat.node(i), lat.dim())) us[0][i] = g[i];

    const int nu = std::max(1, opts.mg_smooth);
    std::int64_t total_sweeps = 0;

    // Tensor full-weighting of the interior residual onto the coarse grid.
    auto restrict_residual = [&](int l) {
        const Lattice& fl = ops[l].lattice;
        const Lattice& cl = ops[l + 1].lattice;
        const int dim = fl.dim();
        const double h2 = fl.spacing() * fl.spacing();
        std::vector<double> r(fl.size(), 0.0);
        for (std::size_t k = 0; k < works[l].interior.size(); ++k) {
            const std::int64_t n = works[l].interior[k];
            double s = 0;
            for (int ax = 0; ax < dim; ++ax) {
                const std::int64_t st = fl.stride(ax);
                s += works[l].lam_packed[k * dim + ax] *
                     (us[l][n + st] + us[l][n - st] - 2 * us[l][n]);
            }
            r[n] = fs[l][n] - s / h2;
        }
        std::fill(fs[l + 1].begin(), fs[l + 1].end(), 0.0);
        int civ[kMaxDim], fiv[kMaxDim], div[kMaxDim];
        for (std::int64_t c = 0; c < cl.size(); ++c) {
            if (!is_interior_unit_ball(cl.node(c), dim)) continue;
            cl.decode(c, civ);
            for (int ax = 0; ax < dim; ++ax) fiv[ax] = 2 * civ[ax];
            int p3 = 1;
            for (int ax = 0; ax < dim; ++ax) p3 *= 3;
            double acc = 0;
            for (int m = 0; m < p3; ++m) {
                // Offsets in {-1,0,1}^dim via base-3 unpacking.
                int mm = m;
                bool ok = true;
                double wgt = 1;
                for (int ax = 0; ax < dim; ++ax) {
                    const int o = mm % 3 - 1;
                    mm /= 3;
                    div[ax] = fiv[ax] + o;
                    wgt *= o == 0 ? 0.5 : 0.25;
                    if (div[ax] < 0 || div[ax] >= fl.count(ax)) ok = false;
                }
                if (ok) acc += wgt * r[fl.flat(div)];
            }
            fs[l + 1][c] = acc;
        }
    };

    std::function<void(int)> vcycle = [&](int l) {
        if (l == L - 1) {
            run_sweeps(ops[l], works[l], us[l], scaled_rhs(ops[l], works[l], fs[l]), 100);
            total_sweeps += 100;
            return;
        }
        const std::vector<double> rhs = scaled_rhs(ops[l], works[l], fs[l]);
        run_sweeps(ops[l], works[l], us[l], rhs, nu);
        restrict_residual(l);
        std::fill(us[l + 1].begin(), us[l + 1].end(), 0.0);
        vcycle(l + 1);
        const std::vector<double> corr = prolong(ops[l].lattice, ops[l + 1].lattice, us[l + 1]);
        for (std::int64_t n : works[l].interior) us[l][n] += corr[n];
        run_sweeps(ops[l], works[l], us[l], rhs, nu);
        total_sweeps += 2 * nu;
    };

    double res = dirichlet_residual(ops[0], works[0], us[0], f);
    const double res0 = std::max(res, 1.0);
    int cycles = 0;
    while (res > opts.tol) {
        if (cycles > 2000 || !std::isfinite(res) || res > 1e8 * res0)
            throw ConvergenceError("solve_dirichlet: V-cycles stalled after " +
                                       std::to_string(cycles) + " cycles (residual " +
                                       std::to_string(res) + ")",
                                   res);
        vcycle(0);
        ++cycles;
        res = dirichlet_residual(ops[0], works[0], us[0], f);
    }
    if (rep) {
        rep->sweeps += total_sweeps;
        rep->residual = res;
        rep->converged = true;
        rep->levels = L;
    }
    return us[0];
}

std::vector<double> solve_dirichlet_values(const DiscreteEllipticOp& op,
                                           const std::vector<double>& g,
                                           const std::vector<double>& f,
                                           const SolveOptions& opts, SolveReport* rep) {
    if (opts.method == "mg") return solve_mg(op, g, f, opts, rep);
    if (opts.method != "gs")
        throw Error("solve_dirichlet: unknown method '" + opts.method + "'");
    const Lattice& lat = op.lattice;
    std::vector<double> u;
    if (opts.nested_init && can_coarsen(lat, 0.25)) {
        const Lattice coarse = coarsen(lat);
        SolveOptions copts = opts;
        const std::vector<double> uc = solve_dirichlet_values(
            restrict_op(op, coarse), restrict_values(lat, coarse, g),
            restrict_values(lat, coarse, f), copts, rep);
        if (rep) ++rep->levels;
        u = prolong(lat, coarse, uc);
    } else {
        u.assign(lat.size(), 0.0);
    }
    // Boundary data is exact at every non-interior node.
    for (std::int64_t i = 0; i < lat.size(); ++i)
        if (!is_interior_unit_ball(lat.node(i), lat.dim())) u[i] = g[i];
    const DirichletWork w = dirichlet_work(op);
    if (!w.interior.empty()) gs_iterate(op, w, u, f, opts, rep);
    return u;
}

}  // namespace

GridFunction solve_dirichlet(const DiscreteEllipticOp& op, const std::vector<double>& g,
                             const std::vector<double>& f, const SolveOptions& opts,
                             SolveReport* report) {
    op.validate();
    const Lattice& lat = op.lattice;
    if (static_cast<std::int64_t>(g.size()) != lat.size() ||
        static_cast<std::int64_t>(f.size()) != lat.size())
        throw Error("solve_dirichlet: data vectors must cover every lattice node");
    for (int ax = 0; ax < lat.dim(); ++ax)
        if (lat.halfwidth()[ax] < 1 - 1e-12)
            throw Error("solve_dirichlet: lattice box must contain the unit ball");
    for (double x : g)
        if (!std::isfinite(x)) throw Error("solve_dirichlet: non-finite boundary data");
    SolveReport local;
    SolveReport* rep = report ? report : &local;
    const double t0 = now_s();
    std::vector<double> u = solve_dirichlet_values(op, g, f, opts, rep);
    rep->runtime_s = now_s() - t0;
    return GridFunction(lat, std::move(u));
}

GridFunction solve_dirichlet(const PeriodicDegenerateCoeffs& coeffs, const Lattice& lat,
                             const std::vector<double>& g, const std::vector<double>& f,
                             const SolveOptions& opts, SolveReport* report) {
    if (coeffs.dim != lat.dim())
        throw Error("solve_dirichlet: coefficient/lattice dimension mismatch");
    const DiscreteEllipticOp op = coeffs.build(lat);
    SolveReport local;
    SolveReport* rep = report ? report : &local;
    GridFunction u = solve_dirichlet(op, g, f, opts, rep);
    // Sensitivity of the residual to the coefficient floor: recompute it with
    // the unfloored (possibly zero) coefficients.
    const std::vector<double> lam0 = coeffs.unfloored(lat);
    const int dim = lat.dim();
    const double h2 = lat.spacing() * lat.spacing();
    double r = 0;
    std::int64_t floored = 0;
    for (std::int64_t node : interior_nodes(lat)) {
        if (lam0[node] < coeffs.floor) ++floored;
        double s = 0;
        for (int ax = 0; ax < dim; ++ax) {
            const std::int64_t st = lat.stride(ax);
            s += lam0[node] * (u[node + st] + u[node - st] - 2 * u[node]);
        }
        r = std::max(r, std::abs(s / h2 - f[node]));
    }
    rep->floored_nodes = floored;
    rep->residual_unfloored = r;
    return u;
}

// --- nonlocal ---------------------------------------------------------------

void NonlocalKernel::validate() const {
    if (!(sigma > 0 && sigma < 2))
        throw Error("nonlocal kernel: sigma must lie in (0, 2)");
    if (!(lambda_min > 0) || !(lambda_max >= lambda_min))
        throw Error("nonlocal kernel: need 0 < lambda_min <= lambda_max");
}

NonlocalKernel NonlocalKernel::reference(int dim, double sigma) {
    NonlocalKernel k;
    k.dim = dim;
    k.sigma = sigma;
    k.validate();
    return k;
}

NonlocalKernel NonlocalKernel::random_anisotropic(const Lattice& lat, double sigma,
                                                  double lam_min, double lam_max,
                                                  std::uint64_t seed) {
    NonlocalKernel k;
    k.dim = lat.dim();
    k.sigma = sigma;
    k.lambda_min = lam_min;
    k.lambda_max = lam_max;
    k.anisotropic = true;
    k.validate();
    if (k.dim != 2)
        throw Error("nonlocal kernel: the random anisotropic family is 2-d");
    const std::int64_t n = lat.size();
    k.alpha.resize(n);
    k.beta.resize(n);
    k.axis.resize(n);
    Rng rng(Rng::derive(seed, 0x22));
    const double pi = 3.14159265358979323846;
    for (std::int64_t i = 0; i < n; ++i) {
        k.alpha[i] = lam_min + 0.5 * (lam_max - lam_min) * rng.next_unit();
        k.beta[i] = rng.next_unit() * (lam_max - k.alpha[i]);
        const double th = 2 * pi * rng.next_unit();
        k.axis[i] = point2(std::cos(th), std::sin(th));
    }
    return k;
}

double half_moment_radius(double sigma) {
    if (!(sigma > 0 && sigma < 2))
        throw Error("half_moment_radius: sigma must lie in (0, 2)");
    return std::exp2(-1.0 / (2.0 - sigma));
}

double center_cell_moment(int dim, double h, double sigma) {
    if (!(sigma > 0 && sigma < 2))
        throw Error("center_cell_moment: sigma must lie in (0, 2)");
    if (!(h > 0)) throw Error("center_cell_moment: h must be positive");
    if (dim == 1) return 2 * std::pow(h / 2, 2 - sigma);
    if (dim == 2) {
        // int_{cell} |y|^2 K_sigma dy = 8 h^{2-sigma} int_0^{pi/4}
        // (2 cos t)^{sigma-2} dt  by the polar reduction of the square.
        const Gauss64& g = gauss64();
        const double pi4 = 3.14159265358979323846 / 4;
        double s = 0;
        for (int i = 0; i < 64; ++i) {
            const double t = pi4 * g.x[i];
            s += g.w[i] * std::pow(2 * std::cos(t), sigma - 2);
        }
        s *= pi4;
        return 8 * std::pow(h, 2 - sigma) * s;
    }
    // Generic: geometric refinement, splitting the cell 3^n-wise and keeping
    // the middle subcell for the next level.
    double total = 0;
    double side = h;
    auto f = [&](const Point& y) {
        const double r = norm(y, dim);
        return r * r * (2 - sigma) * std::pow(r, -(dim + sigma));
    };
    for (int level = 0; level < 400; ++level) {
        const double sub = side / 3;
        const double vol = std::pow(sub, dim);
        int iv[kMaxDim] = {0, 0, 0, 0};
        for (int i = 0; i < dim; ++i) iv[i] = -1;
        while (true) {
            bool center = true;
            for (int i = 0; i < dim; ++i) center = center && iv[i] == 0;
            if (!center) {
                Point y{};
                for (int i = 0; i < dim; ++i) y[i] = iv[i] * sub;
                total += f(y) * vol;
            }
            int ax = dim - 1;
            while (ax >= 0) {
                if (++iv[ax] <= 1) break;
                iv[ax] = -1;
                --ax;
            }
            if (ax < 0) break;
        }
        side = sub;
        // Remaining mass is at most omega_n * (side*sqrt(n)/2)^{2-sigma}.
        if (surface_area_unit_sphere(dim) *
                std::pow(side * std::sqrt(double(dim)) / 2, 2 - sigma) <
            1e-16 * std::max(total, 1e-300))
            break;
    }
    return total;
}

MomentReport kernel_moment(int dim, double h, double sigma, double R) {
    if (!(sigma > 0 && sigma < 2))
        throw Error("kernel_moment: sigma must lie in (0, 2)");
    if (!(h > 0) || !(R > 0)) throw Error("kernel_moment: h and R must be positive");
    MomentReport rep;
    rep.scale_radius = half_moment_radius(sigma);
    rep.analytic = surface_area_unit_sphere(dim) * std::pow(R, 2 - sigma);
    rep.resolved = R >= h * (1 - 1e-12);
    if (!rep.resolved) return rep;

    const int L = static_cast<int>(std::floor(R / h + 1e-12));
    const double hn = std::pow(h, dim);
    int iv[kMaxDim] = {0, 0, 0, 0};
    for (int i = 0; i < dim; ++i) iv[i] = -L;
    double sum = 0;
    std::int64_t cells = 0;
    while (true) {
        double r2 = 0;
        bool zero = true;
        for (int i = 0; i < dim; ++i) {
            const double y = iv[i] * h;
            r2 += y * y;
            zero = zero && iv[i] == 0;
        }
        if (!zero && r2 <= R * R * (1 + 1e-14)) {
            const double r = std::sqrt(r2);
            sum += r2 * (2 - sigma) * std::pow(r, -(dim + sigma)) * hn;
            ++cells;
        }
        int ax = dim - 1;
        while (ax >= 0) {
            if (++iv[ax] <= L) break;
            iv[ax] = -L;
            --ax;
        }
        if (ax < 0) break;
    }
    rep.lattice_sum = sum;
    rep.center_cell = center_cell_moment(dim, h, sigma);
    rep.total = rep.lattice_sum + rep.center_cell;
    rep.cells = cells;
    return rep;
}

namespace {

// Offsets 0 < |y| <= 3 on the spacing-h lattice, with radial kernel values.
struct KernelStencil {
    int L = 0;                       // max per-axis offset
    std::vector<int> delta;          // dim ints per offset
    std::vector<double> w0;          // K_sigma(|y|) h^n
    std::vector<Point> yhat;
    double w0_total = 0;             // sum of w0 (multiplier-free)
};

KernelStencil build_stencil(const NonlocalKernel& kernel, double h) {
    KernelStencil st;
    const int dim = kernel.dim;
    const double hn = std::pow(h, dim);
    st.L = static_cast<int>(std::floor(3.0 / h + 1e-12));
    int iv[kMaxDim] = {0, 0, 0, 0};
    for (int i = 0; i < dim; ++i) iv[i] = -st.L;
    while (true) {
        double r2 = 0;
        bool zero = true;
        for (int i = 0; i < dim; ++i) {
            const double y = iv[i] * h;
            r2 += y * y;
            zero = zero && iv[i] == 0;
        }
        if (!zero && r2 <= 9.0 * (1 + 1e-14)) {
            const double r = std::sqrt(r2);
            st.w0.push_back(kernel.k_sigma(r) * hn);
            Point yh{};
            for (int i = 0; i < dim; ++i) yh[i] = iv[i] * h / r;
            st.yhat.push_back(yh);
            for (int i = 0; i < dim; ++i) st.delta.push_back(iv[i]);
            st.w0_total += st.w0.back();
        }
        int ax = dim - 1;
        while (ax >= 0) {
            if (++iv[ax] <= st.L) break;
            iv[ax] = -st.L;
            --ax;
        }
        if (ax < 0) break;
    }
    return st;
}

enum NodeRole : std::uint8_t { kUnknown = 0, kData = 1, kZero = 2 };

std::vector<std::uint8_t> classify_nonlocal(const Lattice& lat) {
    std::vector<std::uint8_t> role(lat.size());
    for (std::int64_t i = 0; i < lat.size(); ++i) {
        const double r = norm(lat.node(i), lat.dim());
        role[i] = r < 1.0 ? kUnknown : (r <= 2.0 ? kData : kZero);
    }
    return role;
}

double tail_bound_coefficient(const NonlocalKernel& k) {
    // int_{|y|>3} K_sigma dy = omega_n (2 - sigma) 3^{-sigma} / sigma.
    return k.lambda_max * surface_area_unit_sphere(k.dim) * (2 - k.sigma) *
           std::pow(3.0, -k.sigma) / k.sigma;
}

}  // namespace

double apply_nonlocal(const NonlocalKernel& kernel, const GridFunction& u,
                      std::int64_t node, NonlocalApplyReport* report) {
    kernel.validate();
    const Lattice& lat = u.lattice();
    const int dim = lat.dim();
    if (kernel.dim != dim) throw Error("apply_nonlocal: dimension mismatch");
    if (kernel.anisotropic &&
        static_cast<std::int64_t>(kernel.alpha.size()) != lat.size())
        throw Error("apply_nonlocal: kernel fields do not match the lattice");
    const Point x = lat.node(node);
    if (!(norm(x, dim) < 1.0))
        throw Error("apply_nonlocal: evaluation node must lie inside the unit ball");
    const double h = lat.spacing();
    const double u0 = u[node];

    int iv0[kMaxDim];
    lat.decode(node, iv0);
    // A +/- pair is kept only when both endpoints carry declared data (stay
    // inside the box); the remainder is the neglected tail, reported below.
    auto pair_in_box = [&](const int* div) -> bool {
        for (int i = 0; i < dim; ++i) {
            if (iv0[i] + div[i] < 0 || iv0[i] + div[i] >= lat.count(i)) return false;
            if (iv0[i] - div[i] < 0 || iv0[i] - div[i] >= lat.count(i)) return false;
        }
        return true;
    };
    auto value_at = [&](const int* div, int sign) -> double {
        int iv[kMaxDim];
        for (int i = 0; i < dim; ++i) iv[i] = iv0[i] + sign * div[i];
        return u[lat.flat(iv)];
    };

    const KernelStencil st = build_stencil(kernel, h);
    const std::size_t m = st.w0.size();
    double acc = 0, dropped_weight = 0;
    std::int64_t used = 0;
    for (std::size_t j = 0; j < m; ++j) {
        const int* dv = &st.delta[j * dim];
        // Half-space enumeration: take each +/- pair once.
        int lead = 0;
        for (int i = 0; i < dim; ++i) {
            if (dv[i] != 0) {
                lead = dv[i];
                break;
            }
        }
        if (lead < 0) continue;
        const double w = st.w0[j] * kernel.multiplier(node, st.yhat[j]);
        if (!pair_in_box(dv)) {
            dropped_weight += 2 * w;
            continue;
        }
        acc += (value_at(dv, +1) + value_at(dv, -1) - 2 * u0) * w;
        used += 2;
    }

    // Singular cell: (1/2) y^T D^2u y integrated against the kernel over the
    // center cell, with the Hessian trace from second differences.
    double tr = 0;
    for (int ax = 0; ax < dim; ++ax) {
        tr += (u[node + lat.stride(ax)] + u[node - lat.stride(ax)] - 2 * u0) / (h * h);
    }
    const double corr =
        kernel.mean_multiplier(node) * center_cell_moment(dim, h, kernel.sigma) * tr /
        (2 * dim);
    acc += corr;

    if (report) {
        report->correction = corr;
        double umax = 0;
        for (double v : u.values()) umax = std::max(umax, std::abs(v));
        report->tail_bound =
            (std::abs(u0) + umax) * (dropped_weight + tail_bound_coefficient(kernel));
        report->cells = used;
    }
    return acc;
}

GridFunction solve_nonlocal(const NonlocalKernel& kernel, const Lattice& lat,
                            const std::vector<double>& g, const std::vector<double>& f,
                            const SolveOptions& opts, SolveReport* report) {
    kernel.validate();
    const int dim = lat.dim();
    if (kernel.dim != dim) throw Error("solve_nonlocal: dimension mismatch");
    for (int ax = 0; ax < dim; ++ax)
        if (lat.halfwidth()[ax] < 2 - 1e-12)
            throw Error("solve_nonlocal: lattice box must contain B_2");
    if (static_cast<std::int64_t>(g.size()) != lat.size() ||
        static_cast<std::int64_t>(f.size()) != lat.size())
        throw Error("solve_nonlocal: data vectors must cover every lattice node");
    if (kernel.anisotropic &&
        static_cast<std::int64_t>(kernel.alpha.size()) != lat.size())
        throw Error("solve_nonlocal: kernel fields do not match the lattice");

    SolveReport local;
    SolveReport* rep = report ? report : &local;
    const double t0 = now_s();
    const double h = lat.spacing();
    const std::vector<std::uint8_t> role = classify_nonlocal(lat);

    // Full value array: data nodes fixed at g, far nodes fixed at zero.
    std::vector<double> u(lat.size(), 0.0);
    for (std::int64_t i = 0; i < lat.size(); ++i)
        if (role[i] == kData) u[i] = g[i];

    std::vector<std::int64_t> unknowns;
    for (std::int64_t i = 0; i < lat.size(); ++i)
        if (role[i] == kUnknown) unknowns.push_back(i);
    const std::size_t nu = unknowns.size();
    if (nu == 0) return GridFunction(lat, std::move(u));

    // Nested initial guess from the half-resolution problem.
    if (opts.nested_init && can_coarsen(lat, 0.25)) {
        const Lattice coarse = coarsen(lat);
        NonlocalKernel ck = kernel;
        if (kernel.anisotropic) {
            ck.alpha.resize(coarse.size());
            ck.beta.resize(coarse.size());
            ck.axis.resize(coarse.size());
            for (std::int64_t i = 0; i < coarse.size(); ++i) {
                const std::int64_t fi = fine_of_coarse(lat, coarse, i);
                ck.alpha[i] = kernel.alpha[fi];
                ck.beta[i] = kernel.beta[fi];
                ck.axis[i] = kernel.axis[fi];
            }
        }
        SolveOptions copts = opts;
        const GridFunction uc =
            solve_nonlocal(ck, coarse, restrict_values(lat, coarse, g),
                           restrict_values(lat, coarse, f), copts, rep);
        ++rep->levels;
        const std::vector<double> guess = prolong(lat, coarse, uc.values());
        for (std::int64_t i : unknowns) u[i] = guess[i];
    }

    const KernelStencil st = build_stencil(kernel, h);
    const std::size_t m = st.w0.size();

    std::vector<std::int64_t> unknown_id(lat.size(), -1);
    for (std::size_t k = 0; k < nu; ++k) unknown_id[unknowns[k]] = static_cast<std::int64_t>(k);

    std::vector<int> coords(nu * dim);
    {
        int iv[kMaxDim];
        for (std::size_t k = 0; k < nu; ++k) {
            lat.decode(unknowns[k], iv);
            for (int i = 0; i < dim; ++i) coords[k * dim + i] = iv[i];
        }
    }

    // Fixed contribution (data nodes) and diagonal per unknown, plus the
    // singular-cell couplings. A +/- offset pair enters only when both
    // endpoints stay inside the box; the dropped remainder feeds the reported
    // tail bound.
    std::vector<double> D(nu, 0.0), Wtot(nu, 0.0), corr_w(nu, 0.0);
    double max_dropped = 0;
    const double xc = center_cell_moment(dim, h, kernel.sigma);
    for (std::size_t k = 0; k < nu; ++k) {
        const std::int64_t node = unknowns[k];
        const int* iv0 = &coords[k * dim];
        double dsum = 0, wsum = 0, dropped = 0;
        for (std::size_t j = 0; j < m; ++j) {
            const int* dv = &st.delta[j * dim];
            const double w = st.w0[j] * kernel.multiplier(node, st.yhat[j]);
            int iv[kMaxDim];
            bool pair_inside = true;
            for (int i = 0; i < dim; ++i) {
                iv[i] = iv0[i] + dv[i];
                if (iv[i] < 0 || iv[i] >= lat.count(i) || iv0[i] - dv[i] < 0 ||
                    iv0[i] - dv[i] >= lat.count(i)) {
                    pair_inside = false;
                    break;
                }
            }
            if (!pair_inside) {
                dropped += w;
                continue;
            }
            wsum += w;
            const std::int64_t tgt = lat.flat(iv);
            if (role[tgt] == kUnknown) continue;  // handled in the sweep
            if (role[tgt] == kData) dsum += w * u[tgt];
        }
        max_dropped = std::max(max_dropped, dropped);
        corr_w[k] = kernel.mean_multiplier(node) * xc / (2 * dim * h * h);
        for (int ax = 0; ax < dim; ++ax) {
            for (int s = -1; s <= 1; s += 2) {
                int iv[kMaxDim];
                for (int i = 0; i < dim; ++i) iv[i] = iv0[i];
                iv[ax] += s;
                const bool inside = iv[ax] >= 0 && iv[ax] < lat.count(ax);
                if (!inside) continue;
                const std::int64_t tgt = lat.flat(iv);
                if (role[tgt] == kData) dsum += corr_w[k] * u[tgt];
            }
        }
        D[k] = dsum;
        Wtot[k] = wsum + 2 * dim * corr_w[k];
    }

    // Unknown-to-unknown weights: cached as a dense row matrix when it fits
    // (~1.4 GB cap), else recomputed per sweep from the radial table.
    const bool cache_pairs = nu * nu <= std::size_t(180000000);
    const int tabL = st.L;
    const int tabW = 2 * tabL + 1;
    std::vector<double> w0tab;
    std::vector<Point> yhattab;
    {
        w0tab.assign(static_cast<std::size_t>(std::pow(tabW, dim)), 0.0);
        yhattab.assign(w0tab.size(), Point{});
        for (std::size_t j = 0; j < m; ++j) {
            const int* dv = &st.delta[j * dim];
            std::size_t key = 0;
            for (int i = 0; i < dim; ++i) key = key * tabW + (dv[i] + tabL);
            w0tab[key] = st.w0[j];
            yhattab[key] = st.yhat[j];
        }
    }
    auto pair_weight = [&](std::size_t krow, std::size_t kcol) -> double {
        std::size_t key = 0;
        for (int i = 0; i < dim; ++i) {
            const int d = coords[kcol * dim + i] - coords[krow * dim + i];
            if (d < -tabL || d > tabL) return 0.0;
            // Mirror endpoint must also stay in the box (symmetric horizon).
            const int mirror = coords[krow * dim + i] - d;
            if (mirror < 0 || mirror >= lat.count(i)) return 0.0;
            key = key * tabW + (d + tabL);
        }
        const double w0 = w0tab[key];
        if (w0 == 0.0) return 0.0;
        double w = w0 * kernel.multiplier(unknowns[krow], yhattab[key]);
        // Fold in the singular-cell coupling for axis neighbors.
        int manhattan = 0, nonzero = 0;
        for (int i = 0; i < dim; ++i) {
            const int d = std::abs(coords[kcol * dim + i] - coords[krow * dim + i]);
            manhattan += d;
            nonzero += d != 0;
        }
        if (manhattan == 1 && nonzero == 1) w += corr_w[krow];
        return w;
    };

    std::vector<double> pairs;
    if (cache_pairs) {
        pairs.assign(nu * nu, 0.0);
        for (std::size_t i = 0; i < nu; ++i)
            for (std::size_t j = 0; j < nu; ++j)
                if (i != j) pairs[i * nu + j] = pair_weight(i, j);
    }

    std::vector<double> uu(nu);
    for (std::size_t k = 0; k < nu; ++k) uu[k] = u[unknowns[k]];

    auto row_sum = [&](std::size_t i) -> double {
        double s = 0;
        if (cache_pairs) {
            const double* row = &pairs[i * nu];
            for (std::size_t j = 0; j < nu; ++j) s += row[j] * uu[j];
        } else {
            for (std::size_t j = 0; j < nu; ++j)
                if (j != i) s += pair_weight(i, j) * uu[j];
        }
        return s;
    };

    auto residual = [&]() -> double {
        double r = 0;
        for (std::size_t i = 0; i < nu; ++i) {
            const double li = row_sum(i) + D[i] - Wtot[i] * uu[i];
            r = std::max(r, std::abs(li - f[unknowns[i]]));
        }
        return r;
    };

    std::int64_t sweeps = 0;
    double res = residual();
    while (res > opts.tol) {
        if (sweeps >= opts.max_sweeps)
            throw ConvergenceError("solve_nonlocal: no convergence within " +
                                       std::to_string(opts.max_sweeps) +
                                       " sweeps (residual " + std::to_string(res) + ")",
                                   res);
        const int burst = std::max(1, opts.check_every);
        for (int b = 0; b < burst && sweeps < opts.max_sweeps; ++b, ++sweeps) {
            for (std::size_t i = 0; i < nu; ++i)
                uu[i] = (row_sum(i) + D[i] - f[unknowns[i]]) / Wtot[i];
        }
        res = residual();
    }
    for (std::size_t k = 0; k < nu; ++k) u[unknowns[k]] = uu[k];

    rep->sweeps += sweeps;
    rep->residual = res;
    rep->converged = true;
    double umax = 0;
    for (double v : u) umax = std::max(umax, std::abs(v));
    rep->tail_bound = 2 * umax * (max_dropped + tail_bound_coefficient(kernel));
    rep->runtime_s = now_s() - t0;
    return GridFunction(lat, std::move(u));
}

}  // namespace hl
