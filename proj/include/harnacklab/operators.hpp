#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "harnacklab/lattice.hpp"
#include "harnacklab/rng.hpp"

namespace hl {

// ---------------------------------------------------------------------------
// Discrete elliptic operator  L u(x) = sum_i lambda_i(x) [u(x+eps e_i) +
// u(x-eps e_i) - 2 u(x)] / eps^2  on the lattice, with per-node per-axis
// coefficients bounded by [lambda_min, lambda_max].
// ---------------------------------------------------------------------------
struct DiscreteEllipticOp {
    Lattice lattice;
    std::vector<double> lambda;  // node-major, axis-minor: lambda[node*dim + ax]
    double lambda_min = 1;
    double lambda_max = 1;

    double lam(std::int64_t node, int ax) const { return lambda[node * lattice.dim() + ax]; }
    void validate() const;

    static DiscreteEllipticOp constant(const Lattice& lat, double lam);
    static DiscreteEllipticOp random(const Lattice& lat, double lam_min, double lam_max,
                                     std::uint64_t seed);
};

// Stencil application at a node whose 2n axis neighbors exist; errors at box
// boundary nodes.
double apply_discrete(const DiscreteEllipticOp& op, const GridFunction& u,
                      std::int64_t node);

// ---------------------------------------------------------------------------
// Degenerate periodic coefficients for the homogenization family:
// a^{ij}(x/eps) = lambda_per(x/eps) delta^{ij}, with lambda_per vanishing on
// the closed middle cube D of side 1/2 and equal to lambda_max within
// distance 1/4 of the period-cell boundary. A small floor keeps interior
// equations solvable; its effect is reported separately.
// ---------------------------------------------------------------------------
struct PeriodicDegenerateCoeffs {
    int dim = 2;
    double eps = 0.125;        // oscillation scale
    double lambda_max = 1;
    double floor = 1e-8;

    double lambda_per(const Point& x) const;  // unfloored, evaluated at x/eps
    DiscreteEllipticOp build(const Lattice& lat) const;  // floored coefficients
    std::vector<double> unfloored(const Lattice& lat) const;
};

// ---------------------------------------------------------------------------
// Gauss-Seidel Dirichlet solver on the inscribed unit ball: interior nodes
// are |x| < 1, every node with |x| >= 1 carries the boundary data g.
// ---------------------------------------------------------------------------
struct SolveOptions {
    double tol = 1e-10;          // max-norm residual target
    std::int64_t max_sweeps = 1000000;
    bool nested_init = true;     // coarse-to-fine initial guess
    int check_every = 64;        // sweeps between residual checks
    // "gs" (default): plain Gauss-Seidel with a fixed lexicographic sweep;
    // iterates of nonnegative data stay exactly nonnegative. "mg": V-cycles
    // using the same lexicographic GS as the smoother; same fixed point and
    // stopping rule, O(N) instead of O(N^2) work, but correction steps are
    // signed, so maximum-principle experiments keep "gs".
    std::string method = "gs";
    int mg_smooth = 3;  // pre/post smoothing sweeps per V-cycle
};

struct SolveReport {
    std::int64_t sweeps = 0;
    double residual = 0;
    bool converged = false;
    int levels = 1;
    // Homogenization extras.
    std::int64_t floored_nodes = 0;
    double residual_unfloored = 0;
    // Nonlocal extras.
    double tail_bound = 0;
    double runtime_s = 0;  // informational only; never serialized into reports
};

GridFunction solve_dirichlet(const DiscreteEllipticOp& op, const std::vector<double>& g,
                             const std::vector<double>& f, const SolveOptions& opts = {},
                             SolveReport* report = nullptr);

GridFunction solve_dirichlet(const PeriodicDegenerateCoeffs& coeffs, const Lattice& lat,
                             const std::vector<double>& g, const std::vector<double>& f,
                             const SolveOptions& opts = {}, SolveReport* report = nullptr);

// ---------------------------------------------------------------------------
// Nonlocal operator of order sigma in (0, 2): kernels K_x(y) = K_sigma(y) *
// mult(x, y/|y|) with K_sigma(y) = (2 - sigma) |y|^{-n-sigma} and symmetric,
// bounded multipliers in [lambda_min, lambda_max].
// ---------------------------------------------------------------------------
struct NonlocalKernel {
    int dim = 2;
    double sigma = 1.5;
    double lambda_min = 1;
    double lambda_max = 1;
    bool anisotropic = false;
    // Per-node multiplier fields (empty for the reference kernel): the
    // multiplier at node i along direction yhat is alpha[i] + beta[i] *
    // (yhat . axis[i])^2, which stays in [lambda_min, lambda_max].
    std::vector<double> alpha, beta;
    std::vector<Point> axis;

    static NonlocalKernel reference(int dim, double sigma);
    static NonlocalKernel random_anisotropic(const Lattice& lat, double sigma,
                                             double lam_min, double lam_max,
                                             std::uint64_t seed);
    void validate() const;

    double k_sigma(double r) const {
        return (2 - sigma) * std::pow(r, -(dim + sigma));
    }
    double multiplier(std::int64_t node, const Point& yhat) const {
        if (!anisotropic) return 1.0;
        const double s = dot(yhat, axis[node], dim);
        return alpha[node] + beta[node] * s * s;
    }
    // Spherical average of the multiplier, used by the singular-cell term.
    double mean_multiplier(std::int64_t node) const {
        if (!anisotropic) return 1.0;
        return alpha[node] + beta[node] / dim;
    }
};

// Exact integral of |y|^2 K_sigma(y) over the grid cell [-h/2, h/2]^n
// (closed form for n = 1, 2; geometric refinement otherwise). This is the
// mass the midpoint rule cannot see at the singular cell.
double center_cell_moment(int dim, double h, double sigma);

// Radius r with r^{2-sigma} = 1/2: half of the |y|^2-moment of K_sigma on
// B_1 sits inside B_r.
double half_moment_radius(double sigma);

// Midpoint-rule moment integral of |y|^2 K_sigma over B_R on a spacing-h
// cell lattice, plus the exact singular-cell term. `analytic` carries the
// closed-form value omega_n R^{2-sigma} for comparison. When R < h no cell
// is resolved and the report is flagged.
struct MomentReport {
    double lattice_sum = 0;
    double center_cell = 0;
    double total = 0;
    double analytic = 0;
    double scale_radius = 0;  // half_moment_radius(sigma)
    bool resolved = false;
    std::int64_t cells = 0;
};

MomentReport kernel_moment(int dim, double h, double sigma, double R);

// Symmetrized midpoint quadrature of int (u(x+y) - u(x)) K_x(y) dy over
// |y| <= 3 with u extended by its stored values inside the box and by zero
// outside, plus a second-difference model of the singular cell. Offsets are
// enumerated in +/- pairs so odd parts cancel exactly.
struct NonlocalApplyReport {
    double correction = 0;   // singular-cell term
    double tail_bound = 0;   // bound on the neglected |y| > 3 contribution
    std::int64_t cells = 0;
};

double apply_nonlocal(const NonlocalKernel& kernel, const GridFunction& u,
                      std::int64_t node, NonlocalApplyReport* report = nullptr);

// Dirichlet problem for the nonlocal operator: unknowns at |x| < 1, data g on
// 1 <= |x| <= 2, zero outside B_2. Gauss-Seidel in lexicographic order.
GridFunction solve_nonlocal(const NonlocalKernel& kernel, const Lattice& lat,
                            const std::vector<double>& g, const std::vector<double>& f,
                            const SolveOptions& opts = {}, SolveReport* report = nullptr);

// Node classification shared by solvers and instance generators.
inline bool is_interior_unit_ball(const Point& p, int dim) { return norm2(p, dim) < 1.0; }

std::vector<std::int64_t> interior_nodes(const Lattice& lat);
std::vector<std::int64_t> boundary_nodes(const Lattice& lat);

}  // namespace hl
