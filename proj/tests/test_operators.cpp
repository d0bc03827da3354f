#include <doctest.h>

#include <cmath>
#include <cstring>

#include "harnacklab/operators.hpp"
#include "harnacklab/rng.hpp"

using namespace hl;

namespace {
const double kPi = 3.14159265358979323846;
}

TEST_CASE("apply_discrete is exact on quadratics") {
    const Lattice lat = Lattice::centered(2, 1.0 / 32, 1.0);
    const DiscreteEllipticOp op = DiscreteEllipticOp::constant(lat, 1.0);
    const GridFunction q =
        GridFunction::sample(lat, [](const Point& p) { return norm2(p, 2); });
    const GridFunction lin =
        GridFunction::sample(lat, [](const Point& p) { return p[0]; });
    const GridFunction mix =
        GridFunction::sample(lat, [](const Point& p) { return p[0] * p[1]; });
    int iv[kMaxDim];
    lat.nearest(point2(0.25, -0.125), iv);
    const std::int64_t node = lat.flat(iv);
    CHECK(apply_discrete(op, q, node) == doctest::Approx(4.0).epsilon(1e-13));
    CHECK(std::abs(apply_discrete(op, lin, node)) <= 1e-13);
    CHECK(std::abs(apply_discrete(op, mix, node)) <= 1e-13);

    // Quartic: second differences see 2 eps^2 at the origin.
    const GridFunction quart = GridFunction::sample(
        lat, [](const Point& p) { return p[0] * p[0] * p[0] * p[0]; });
    lat.nearest(Point{}, iv);
    const double eps = lat.spacing();
    CHECK(apply_discrete(op, quart, lat.flat(iv)) ==
          doctest::Approx(2 * eps * eps).epsilon(1e-12));

    // Boundary nodes are rejected.
    CHECK_THROWS_AS(apply_discrete(op, q, 0), Error);
}

TEST_CASE("apply_discrete maps x_i^2 to 2 lambda_i with random coefficients") {
    const Lattice lat = Lattice::centered(2, 1.0 / 16, 1.0);
    const DiscreteEllipticOp op = DiscreteEllipticOp::random(lat, 1.0, 10.0, 77);
    const GridFunction x2 =
        GridFunction::sample(lat, [](const Point& p) { return p[1] * p[1]; });
    int iv[kMaxDim];
    lat.nearest(point2(0.125, 0.25), iv);
    const std::int64_t node = lat.flat(iv);
    CHECK(apply_discrete(op, x2, node) ==
          doctest::Approx(2 * op.lam(node, 1)).epsilon(1e-13));
}

TEST_CASE("solve_dirichlet reproduces stencil-exact data") {
    const Lattice lat = Lattice::centered(2, 1.0 / 32, 1.0);
    SUBCASE("linear boundary data with random coefficients") {
        const DiscreteEllipticOp op = DiscreteEllipticOp::random(lat, 1.0, 10.0, 5);
        const GridFunction gfun =
            GridFunction::sample(lat, [](const Point& p) { return p[0]; });
        SolveReport rep;
        SolveOptions opts;
        opts.tol = 1e-11;
        const GridFunction u =
            solve_dirichlet(op, gfun.values(), std::vector<double>(lat.size(), 0.0),
                            opts, &rep);
        CHECK(rep.converged);
        double err = 0;
        for (std::int64_t i = 0; i < lat.size(); ++i)
            err = std::max(err, std::abs(u[i] - gfun[i]));
        CHECK(err <= 1e-9);
    }
    SUBCASE("harmonic quadratic with a scalar coefficient field") {
        // lambda_1 == lambda_2 pointwise: x1^2 - x2^2 stays stencil-exact.
        DiscreteEllipticOp op = DiscreteEllipticOp::random(lat, 1.0, 10.0, 6);
        for (std::int64_t i = 0; i < lat.size(); ++i)
            op.lambda[i * 2 + 1] = op.lambda[i * 2];
        const GridFunction gfun = GridFunction::sample(
            lat, [](const Point& p) { return p[0] * p[0] - p[1] * p[1]; });
        SolveOptions opts;
        opts.tol = 1e-11;
        const GridFunction u = solve_dirichlet(
            op, gfun.values(), std::vector<double>(lat.size(), 0.0), opts);
        double err = 0;
        for (std::int64_t i = 0; i < lat.size(); ++i)
            err = std::max(err, std::abs(u[i] - gfun[i]));
        CHECK(err <= 1e-9);
    }
}

TEST_CASE("solve_dirichlet obeys the maximum principle") {
    const Lattice lat = Lattice::centered(2, 1.0 / 32, 1.0);
    Rng rng(123);
    const DiscreteEllipticOp op = DiscreteEllipticOp::random(lat, 1.0, 10.0, 9);
    std::vector<double> g(lat.size(), 0.0);
    for (std::int64_t i : boundary_nodes(lat)) g[i] = rng.next_unit();
    const GridFunction u =
        solve_dirichlet(op, g, std::vector<double>(lat.size(), 0.0));
    for (std::int64_t i = 0; i < lat.size(); ++i) {
        CHECK(u[i] >= 0.0);
        CHECK(u[i] <= 1.0);
    }
}

TEST_CASE("discrete comparison principle") {
    const Lattice lat = Lattice::centered(2, 1.0 / 32, 1.0);
    const DiscreteEllipticOp op = DiscreteEllipticOp::random(lat, 1.0, 10.0, 4242);
    Rng rng(99);
    std::vector<double> gv(lat.size(), 0.0);
    for (std::int64_t i : boundary_nodes(lat)) gv[i] = rng.next_unit();
    std::vector<double> gu = gv;
    for (std::int64_t i : boundary_nodes(lat)) gu[i] += 0.25;
    // L u = -0.3 <= 0.1 = L v and u >= v on the boundary, so u >= v everywhere.
    const GridFunction u =
        solve_dirichlet(op, gu, std::vector<double>(lat.size(), -0.3));
    const GridFunction v =
        solve_dirichlet(op, gv, std::vector<double>(lat.size(), 0.1));
    for (std::int64_t i = 0; i < lat.size(); ++i) CHECK(u[i] >= v[i] - 1e-8);
}

TEST_CASE("degenerate periodic coefficients") {
    PeriodicDegenerateCoeffs c;
    c.dim = 2;
    c.eps = 0.25;
    c.lambda_max = 3.0;
    // Middle of the period cell: coefficient vanishes.
    CHECK(c.lambda_per(point2(0.125, 0.125)) == 0.0);
    // Period-cell corner: full ellipticity.
    CHECK(c.lambda_per(point2(0.0, 0.0)) == doctest::Approx(3.0));
    CHECK(c.lambda_per(point2(0.25, 0.0)) == doctest::Approx(3.0));
    // Periodicity in x/eps.
    CHECK(c.lambda_per(point2(0.3, -0.7)) ==
          doctest::Approx(c.lambda_per(point2(0.3 + 0.25, -0.7 + 0.5))));

    const Lattice lat = Lattice::centered(2, 1.0 / 32, 1.0);
    SolveReport rep;
    const GridFunction gfun =
        GridFunction::sample(lat, [](const Point& p) { return p[0]; });
    const GridFunction u = solve_dirichlet(
        c, lat, gfun.values(), std::vector<double>(lat.size(), 0.0), {}, &rep);
    CHECK(rep.floored_nodes > 0);
    double err = 0;
    for (std::int64_t i = 0; i < lat.size(); ++i)
        err = std::max(err, std::abs(u[i] - gfun[i]));
    CHECK(err <= 1e-8);
    CHECK(rep.residual_unfloored <= 1e-7);
}

TEST_CASE("half_moment_radius matches r^{2-sigma} = 1/2") {
    CHECK(half_moment_radius(1.0) == 0.5);
    CHECK(half_moment_radius(1.5) == 0.25);
    CHECK(half_moment_radius(1.9) ==
          doctest::Approx(std::ldexp(1.0, -10)).epsilon(1e-12));
    CHECK_THROWS_AS(half_moment_radius(2.0), Error);
}

TEST_CASE("center_cell_moment closed forms") {
    // n = 1: exact antiderivative.
    CHECK(center_cell_moment(1, 0.25, 1.5) ==
          doctest::Approx(2 * std::pow(0.125, 0.5)).epsilon(1e-13));
    // n = 2: bracket the angular closed form between the exact masses of the
    // inscribed and circumscribed disks, and cross-check against a crude
    // geometric refinement (midpoint rule, biased low by a few percent).
    for (double sigma : {0.5, 1.0, 1.5, 1.9}) {
        const double h = 1.0 / 64;
        double oracle = 0;
        double side = h;
        for (int level = 0; level < 500; ++level) {
            const double sub = side / 3;
            for (int i = -1; i <= 1; ++i)
                for (int j = -1; j <= 1; ++j) {
                    if (i == 0 && j == 0) continue;
                    const double r = std::hypot(i * sub, j * sub);
                    oracle += (2 - sigma) * std::pow(r, -sigma) * sub * sub;
                }
            side = sub;
            // Stop once the remaining mass is negligible, well before pow
            // overflows on the shrinking radius.
            if (side < h * 1e-60 ||
                std::pow(side / h, 2 - sigma) < 1e-15) break;
        }
        const double exact = center_cell_moment(2, h, sigma);
        CHECK(exact >= oracle);
        CHECK(exact <= oracle * 1.15);
        const double lo = 2 * kPi * std::pow(h / 2, 2 - sigma);
        const double hi = 2 * kPi * std::pow(h / std::sqrt(2.0), 2 - sigma);
        CHECK(exact >= lo);
        CHECK(exact <= hi);
    }
}

TEST_CASE("kernel_moment approaches omega_n") {
    SUBCASE("sigma = 1.5") {
        const MomentReport rep = kernel_moment(2, 1.0 / 128, 1.5, 1.0);
        CHECK(rep.resolved);
        CHECK(std::abs(rep.total - 2 * kPi) / (2 * kPi) <= 0.02);
        CHECK(rep.center_cell > 0);
    }
    SUBCASE("sigma = 1 at the half-moment radius") {
        const MomentReport rep = kernel_moment(2, 1.0 / 128, 1.0, 0.5);
        CHECK(std::abs(rep.total - kPi) / kPi <= 0.01);
        CHECK(rep.analytic == doctest::Approx(kPi));
    }
    SUBCASE("unresolved scale is flagged, not faked") {
        const MomentReport rep = kernel_moment(2, 1.0 / 256, 1.9, std::ldexp(1.0, -10));
        CHECK_FALSE(rep.resolved);
        CHECK(rep.scale_radius == doctest::Approx(std::ldexp(1.0, -10)));
        CHECK(rep.analytic > 0);
    }
    SUBCASE("halving h shrinks the error") {
        // The midpoint error scales like h^{2-sigma}: halving h gains a
        // factor 2^{2-sigma}, i.e. >= 2 for sigma <= 1 and sqrt(2) ~ 1.41 at
        // sigma = 1.5 (measured 1.419 there; asserted with a small margin).
        for (double sigma : {0.5, 1.0}) {
            const double e1 =
                std::abs(kernel_moment(2, 1.0 / 64, sigma, 1.0).total - 2 * kPi);
            const double e2 =
                std::abs(kernel_moment(2, 1.0 / 128, sigma, 1.0).total - 2 * kPi);
            CAPTURE(sigma);
            CHECK(e1 / e2 >= 1.5);
        }
        const double e1 = std::abs(kernel_moment(2, 1.0 / 64, 1.5, 1.0).total - 2 * kPi);
        const double e2 = std::abs(kernel_moment(2, 1.0 / 128, 1.5, 1.0).total - 2 * kPi);
        CHECK(e1 / e2 >= 1.35);
    }
}

TEST_CASE("apply_nonlocal basics") {
    const Lattice lat = Lattice::centered(2, 1.0 / 32, 2.0);
    const NonlocalKernel k = NonlocalKernel::reference(2, 1.5);
    int iv[kMaxDim];
    lat.nearest(Point{}, iv);
    const std::int64_t origin = lat.flat(iv);

    const GridFunction c = GridFunction::fill(lat, 2.5);
    CHECK(apply_nonlocal(k, c, origin) == 0.0);

    // Odd functions are annihilated exactly by the paired enumeration.
    const GridFunction odd = GridFunction::sample(
        lat, [](const Point& p) { return p[0] * p[0] * p[0]; });
    CHECK(apply_nonlocal(k, odd, origin) == 0.0);

    const GridFunction x1 =
        GridFunction::sample(lat, [](const Point& p) { return p[0]; });
    CHECK(std::abs(apply_nonlocal(k, x1, origin)) <= 1e-12);

    CHECK_THROWS_AS(NonlocalKernel::reference(2, 2.5), Error);
    // Evaluation outside the unit ball is rejected.
    lat.nearest(point2(1.5, 0.0), iv);
    CHECK_THROWS_AS(apply_nonlocal(k, c, lat.flat(iv)), Error);
}

TEST_CASE("apply_nonlocal quadratic at the origin matches the moment integral") {
    // u = |x|^2/2 in B_1 and zero outside: the value at 0 is half the
    // moment of K_sigma over B_1, i.e. omega_2/2 = pi.
    const Lattice lat = Lattice::centered(2, 1.0 / 128, 2.0);
    const NonlocalKernel k = NonlocalKernel::reference(2, 1.5);
    const GridFunction u = GridFunction::sample(lat, [](const Point& p) {
        return norm(p, 2) <= 1.0 ? 0.5 * norm2(p, 2) : 0.0;
    });
    int iv[kMaxDim];
    lat.nearest(Point{}, iv);
    NonlocalApplyReport rep;
    const double val = apply_nonlocal(k, u, lat.flat(iv), &rep);
    CHECK(std::abs(val - kPi) / kPi <= 0.02);
    CHECK(rep.correction > 0);

    // Linearity.
    const GridFunction x1 =
        GridFunction::sample(lat, [](const Point& p) { return p[0]; });
    GridFunction sum = u;
    for (std::int64_t i = 0; i < lat.size(); ++i) sum[i] += x1[i];
    const double vs = apply_nonlocal(k, sum, lat.flat(iv));
    const double vu = apply_nonlocal(k, u, lat.flat(iv));
    const double vx = apply_nonlocal(k, x1, lat.flat(iv));
    CHECK(vs == doctest::Approx(vu + vx).epsilon(1e-10));
}

TEST_CASE("solve_nonlocal zero data gives the zero solution") {
    const Lattice lat = Lattice::centered(2, 1.0 / 16, 2.0);
    const NonlocalKernel k = NonlocalKernel::reference(2, 1.5);
    const std::vector<double> z(lat.size(), 0.0);
    const GridFunction u = solve_nonlocal(k, lat, z, z);
    for (std::int64_t i = 0; i < lat.size(); ++i) CHECK(u[i] == 0.0);
}

TEST_CASE("solve_nonlocal converges and respects the maximum principle") {
    const Lattice lat = Lattice::centered(2, 1.0 / 32, 2.0);
    const NonlocalKernel k = NonlocalKernel::reference(2, 1.5);
    std::vector<double> g(lat.size(), 0.0);
    for (std::int64_t i = 0; i < lat.size(); ++i) {
        const double r = norm(lat.node(i), 2);
        if (r >= 1.0 && r <= 2.0) g[i] = 1.0;
    }
    SolveReport rep;
    SolveOptions opts;
    opts.tol = 1e-8;
    const GridFunction u =
        solve_nonlocal(k, lat, g, std::vector<double>(lat.size(), 0.0), opts, &rep);
    CHECK(rep.converged);
    CHECK(rep.residual <= 1e-8);
    CHECK(rep.sweeps > 0);
    for (std::int64_t i = 0; i < lat.size(); ++i) {
        CHECK(u[i] >= 0.0);
        CHECK(u[i] <= 1.0 + 1e-12);
    }
    // Interior values are strictly positive and below the data level.
    int iv[kMaxDim];
    lat.nearest(Point{}, iv);
    CHECK(u[lat.flat(iv)] > 0.0);
    CHECK(u[lat.flat(iv)] < 1.0);
}

TEST_CASE("solve_nonlocal with an anisotropic random kernel stays bounded") {
    const Lattice lat = Lattice::centered(2, 1.0 / 16, 2.0);
    const NonlocalKernel k = NonlocalKernel::random_anisotropic(lat, 1.5, 1.0, 10.0, 31);
    for (std::int64_t i = 0; i < lat.size(); ++i) {
        const Point yh = point2(std::cos(0.3), std::sin(0.3));
        const double m = k.multiplier(i, yh);
        CHECK(m >= 1.0 - 1e-12);
        CHECK(m <= 10.0 + 1e-12);
    }
    std::vector<double> g(lat.size(), 0.0);
    for (std::int64_t i = 0; i < lat.size(); ++i) {
        const double r = norm(lat.node(i), 2);
        if (r >= 1.0 && r <= 2.0) g[i] = 0.5 + 0.5 * std::sin(3 * lat.node(i)[0]);
    }
    SolveOptions opts;
    opts.tol = 1e-9;
    const GridFunction u =
        solve_nonlocal(k, lat, g, std::vector<double>(lat.size(), 0.0), opts);
    for (std::int64_t i = 0; i < lat.size(); ++i) {
        CHECK(u[i] >= 0.0);
        CHECK(u[i] <= 1.0 + 1e-12);
    }
}

TEST_CASE("solvers are bitwise deterministic") {
    const Lattice lat = Lattice::centered(2, 1.0 / 16, 1.0);
    const DiscreteEllipticOp op = DiscreteEllipticOp::random(lat, 1.0, 10.0, 2024);
    Rng rng(7);
    std::vector<double> g(lat.size(), 0.0);
    for (std::int64_t i : boundary_nodes(lat)) g[i] = rng.next_unit();
    const std::vector<double> f(lat.size(), 0.0);
    const GridFunction u1 = solve_dirichlet(op, g, f);
    const GridFunction u2 = solve_dirichlet(op, g, f);
    CHECK(std::memcmp(u1.values().data(), u2.values().data(),
                      sizeof(double) * u1.values().size()) == 0);
}

TEST_CASE("one-dimensional solve reproduces linear data") {
    const Lattice lat = Lattice::centered(1, 1.0 / 32, 1.0);
    const DiscreteEllipticOp op = DiscreteEllipticOp::random(lat, 1.0, 10.0, 3);
    const GridFunction lin =
        GridFunction::sample(lat, [](const Point& p) { return 0.5 * p[0] + 0.25; });
    SolveOptions opts;
    opts.tol = 1e-12;
    const GridFunction u = solve_dirichlet(
        op, lin.values(), std::vector<double>(lat.size(), 0.0), opts);
    for (std::int64_t i = 0; i < lat.size(); ++i)
        CHECK(std::abs(u[i] - lin[i]) <= 1e-10);
}
