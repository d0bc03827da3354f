#include <doctest.h>

#include <cmath>
#include <set>

#include "harnacklab/classes.hpp"
#include "harnacklab/operators.hpp"

using namespace hl;

namespace {

ClassParams local_params(double lambda, double a, double r, Region omega) {
    ClassParams p;
    p.lambda = lambda;
    p.a_lo = p.a_hi = a;
    p.r = r;
    p.omega = omega;
    return p;
}

}  // namespace

TEST_CASE("local supersolution check passes on u == 0 with Lambda > 1") {
    const Lattice lat = Lattice::centered(2, 1.0 / 32, 1.0);
    const GridFunction u = GridFunction::fill(lat, 0.0);
    const ClassParams p = local_params(4.0, 1.0, 0.25, Ball{Point{}, 1.0});
    const ViolationReport rep =
        check_supersolution_local(u, p, direction_sample(2, 32), {1.0});
    CHECK(rep.pass);
    CHECK(rep.tested > 0);
}

TEST_CASE("local supersolution check fails on its own comparison profile") {
    const double lambda = 4.0;
    const Lattice lat = Lattice::centered(2, 1.0 / 32, 1.0);
    const GridFunction u = GridFunction::sample(lat, [&](const Point& p) {
        return (lambda / 2) * p[0] * p[0] - 0.5 * norm2(p, 2);
    });
    // Keep tested centers where the forced gradient satisfies |b| <= 1.
    const ClassParams p = local_params(lambda, 1.0, 1.0 / 16, Ball{Point{}, 0.3});
    const auto dirs = direction_sample(2, 32);
    const ViolationReport rep = check_supersolution_local(u, p, dirs, {1.0});
    CHECK_FALSE(rep.pass);
    // Self-touching at every tested center (direction e1 matches exactly).
    std::set<std::int64_t> hit;
    for (const ClassWitness& w : rep.witnesses) hit.insert(w.x0_node);
    const std::size_t combos_per_center = dirs.size() * 2;  // xi x b
    CHECK(hit.size() == rep.tested / combos_per_center);

    // Witness margins reproduce under re-evaluation.
    for (std::size_t i = 0; i < std::min<std::size_t>(rep.witnesses.size(), 50); ++i) {
        const ClassWitness& w = rep.witnesses[i];
        CHECK(std::abs(reevaluate_witness(u, p, dirs, w) - w.margin) <= 1e-10);
    }
}

TEST_CASE("local check margins are monotone in Lambda") {
    const Lattice lat = Lattice::centered(2, 1.0 / 16, 1.0);
    const GridFunction u = GridFunction::sample(lat, [](const Point& p) {
        return std::sin(3 * p[0]) * std::cos(2 * p[1]);
    });
    const auto dirs = direction_sample(2, 8);
    const ClassParams p1 = local_params(2.0, 1.0, 0.25, Ball{Point{}, 0.5});
    const ClassParams p2 = local_params(6.0, 1.0, 0.25, Ball{Point{}, 0.5});
    ClassWitness probe;
    int iv[kMaxDim];
    lat.nearest(point2(0.125, -0.25), iv);
    probe.x0_node = lat.flat(iv);
    probe.a = 1.0;
    probe.b_index = 0;
    for (int xi = 0; xi < 8; ++xi) {
        probe.xi_index = xi;
        CHECK(reevaluate_witness(u, p2, dirs, probe) <=
              reevaluate_witness(u, p1, dirs, probe) + 1e-14);
    }
}

TEST_CASE("local check verdicts are scale invariant") {
    const Lattice lat = Lattice::centered(2, 1.0 / 32, 1.0);
    const double lambda = 4.0;
    const GridFunction u = GridFunction::sample(lat, [&](const Point& p) {
        return (lambda / 2) * p[0] * p[0] - 0.5 * norm2(p, 2) + 0.01 * p[1];
    });
    GridFunction u2 = u;
    for (double& v : u2.values()) v *= 2.0;
    const ClassParams p = local_params(lambda, 1.0, 1.0 / 16, Ball{Point{}, 0.25});
    const ClassParams p2 = local_params(lambda, 2.0, 1.0 / 16, Ball{Point{}, 0.25});
    const auto dirs = direction_sample(2, 16);
    const ViolationReport r1 = check_supersolution_local(u, p, dirs, {1.0});
    const ViolationReport r2 = check_supersolution_local(u2, p2, dirs, {2.0});
    CHECK(r1.pass == r2.pass);
    REQUIRE(r1.witnesses.size() == r2.witnesses.size());
    for (std::size_t i = 0; i < r1.witnesses.size(); ++i) {
        CHECK(r1.witnesses[i].x0_node == r2.witnesses[i].x0_node);
        CHECK(r1.witnesses[i].xi_index == r2.witnesses[i].xi_index);
        CHECK(r2.witnesses[i].margin ==
              doctest::Approx(2 * r1.witnesses[i].margin).epsilon(1e-13));
    }
}

TEST_CASE("local check on a discrete-harmonic solution (unit coefficients)") {
    // lambda_i == 1: the membership threshold is Lambda > 4 in two dimensions.
    const Lattice lat = Lattice::centered(2, 1.0 / 32, 1.0);
    const DiscreteEllipticOp op = DiscreteEllipticOp::constant(lat, 1.0);
    std::vector<double> g(lat.size(), 0.0);
    for (std::int64_t i : boundary_nodes(lat)) {
        const Point p = lat.node(i);
        const double th = std::atan2(p[1], p[0]);
        g[i] = 0.5 + 0.4 * std::sin(2 * th + 0.7);
    }
    const std::vector<double> f(lat.size(), 0.0);
    const GridFunction u = solve_dirichlet(op, g, f);
    const ClassParams p = local_params(5.0, 1.0, 4.0 / 32, Ball{Point{}, 1.0});
    const ViolationReport rep =
        check_supersolution_local(u, p, direction_sample(2, 32), {1.0});
    CHECK(rep.pass);
}

TEST_CASE("local check requires a resolved neighborhood") {
    const Lattice lat = Lattice::centered(2, 1.0 / 16, 1.0);
    const GridFunction u = GridFunction::fill(lat, 0.0);
    const ClassParams p = local_params(4.0, 1.0, 1.0 / 32, Ball{Point{}, 1.0});
    CHECK_THROWS_AS(check_supersolution_local(u, p, direction_sample(2, 4), {1.0}),
                    Error);
}

TEST_CASE("global supersolution check passes on u == 0") {
    const Lattice lat = Lattice::centered(2, 1.0 / 32, 1.0);
    const GridFunction u = GridFunction::fill(lat, 0.0);
    const std::vector<Point> vertices = {Point{}, point2(0.25, 0.0), point2(0.0, -0.25)};
    const ContactSet A = contact_set(u, 1.0, vertices);
    CHECK(A.admissible_count() == 3);
    const ClassParams p = local_params(4.0, 1.0, 4.0 / 32, Ball{Point{}, 1.0});
    const ViolationReport rep =
        check_supersolution_global(u, p, A, direction_sample(2, 16));
    CHECK(rep.pass);
    CHECK(rep.tested > 0);
}

TEST_CASE("global supersolution check detects a constructed touching") {
    const Lattice lat = Lattice::centered(2, 1.0 / 32, 1.0);
    const double lambda = 4.0, r = 0.125, t = 0.01;
    const double c0 = 9.0 / 32;  // largest admissible offset for vertex 0
    const GridFunction u = GridFunction::sample(lat, [&](const Point& p) {
        const double P = -0.5 * norm2(p, 2) + c0;
        double v = std::max(P, 0.0) + t * norm2(p, 2);
        if (norm(p, 2) <= r) v += (lambda / 2) * p[0] * p[0];
        return v;
    });
    const ContactSet A = contact_set(u, 1.0, {Point{}});
    REQUIRE(A.admissible_count() == 1);
    CHECK(lat.node(A.records[0].contact_node)[0] == 0.0);
    CHECK(lat.node(A.records[0].contact_node)[1] == 0.0);
    const ClassParams p = local_params(lambda, 1.0, r, Ball{Point{}, 1.0});
    const ViolationReport rep =
        check_supersolution_global(u, p, A, direction_sample(2, 32));
    CHECK_FALSE(rep.pass);
    REQUIRE(!rep.witnesses.empty());
    CHECK(rep.witnesses[0].xi_index == 0);  // direction e1
}

TEST_CASE("global check reports vacuous pass on an empty contact set") {
    const Lattice lat = Lattice::centered(2, 1.0 / 32, 1.0);
    const GridFunction u = GridFunction::fill(lat, 1.0);  // all slides inadmissible
    const ContactSet A = contact_set(u, 1.0, {Point{}});
    CHECK(A.admissible_count() == 0);
    const ClassParams p = local_params(4.0, 1.0, 0.125, Ball{Point{}, 1.0});
    const ViolationReport rep =
        check_supersolution_global(u, p, A, direction_sample(2, 8));
    CHECK(rep.pass);
    CHECK(rep.vacuous);
}

TEST_CASE("weak-Harnack pointwise: zero function passes with fraction one") {
    const Lattice lat = Lattice::centered(2, 1.0 / 32, 1.0);
    const GridFunction u = GridFunction::fill(lat, 0.0);
    ClassParams p;
    p.lambda = 1;
    p.weak_M = 1;
    p.weak_a = 1;
    p.rho = 0.125;
    p.delta = 0.05;
    p.omega = Ball{Point{}, 1.0};
    const WeakHarnackResult res = check_weak_harnack(u, p, WeakHarnackMode::Pointwise);
    CHECK(res.report.pass);
    CHECK(res.report.tested > 0);
    CHECK(res.smallest_M == 0.0);
}

TEST_CASE("weak-Harnack pointwise: half-ball spike fails") {
    const Lattice lat = Lattice::centered(2, 1.0 / 32, 1.0);
    const double M = 2.0, a = 1.0, rho = 0.25;
    GridFunction u = GridFunction::fill(lat, 0.0);
    for (std::int64_t i = 0; i < lat.size(); ++i) {
        const Point p = lat.node(i);
        if (norm(p, 2) <= rho && p[1] > 0) u[i] = 10 * M * a;
    }
    ClassParams prm;
    prm.lambda = 1;
    prm.weak_M = M;
    prm.weak_a = a;
    prm.rho = rho;
    prm.delta = 0.05;
    prm.omega = Ball{Point{}, 1.0};
    const WeakHarnackResult res = check_weak_harnack(u, prm, WeakHarnackMode::Pointwise);
    CHECK_FALSE(res.report.pass);
    bool found_origin = false;
    for (const ClassWitness& w : res.report.witnesses) {
        const Point p = lat.node(w.x0_node);
        if (p[0] == 0.0 && p[1] == 0.0) {
            found_origin = true;
            CHECK(w.fraction > 0.4);
            CHECK(w.fraction < 0.6);
        }
    }
    CHECK(found_origin);
    CHECK(res.smallest_M >= 10 * M);
}

TEST_CASE("weak-Harnack threshold sets are monotone in a") {
    const Lattice lat = Lattice::centered(2, 1.0 / 32, 1.0);
    const GridFunction u = GridFunction::sample(lat, [](const Point& p) {
        return norm2(p, 2) * 3.0;
    });
    const Ball b{point2(0.125, 0.125), 0.25};
    const double M = 1.5;
    for (double a1 : {0.25, 0.5}) {
        const double a2 = 2 * a1;
        std::int64_t h1 = 0, h2 = 0;
        lat.for_region(b, [&](std::int64_t f, const Point&) {
            if (u[f] <= M * a1) ++h1;
            if (u[f] <= M * a2) ++h2;
        });
        CHECK(h2 >= h1);
    }
}

TEST_CASE("weak-Harnack rejects negative functions") {
    const Lattice lat = Lattice::centered(2, 1.0 / 16, 1.0);
    GridFunction u = GridFunction::fill(lat, 0.0);
    u[3] = -1e-3;
    ClassParams p;
    p.lambda = 1;
    p.rho = 0.25;
    p.omega = Ball{Point{}, 1.0};
    CHECK_THROWS_AS(check_weak_harnack(u, p, WeakHarnackMode::Pointwise), Error);
}

TEST_CASE("weak-Harnack at contact points") {
    const Lattice lat = Lattice::centered(2, 1.0 / 32, 1.0);
    const GridFunction u =
        GridFunction::sample(lat, [](const Point& p) { return norm2(p, 2); });
    const ContactSet A = contact_set(u, 1.0, vertex_sample(lat, 4));
    ClassParams p;
    p.lambda = 1;
    p.weak_M = 10.0;
    p.weak_a = 1.0;
    p.rho = 0.125;
    p.delta = 0.0;
    p.omega = Ball{Point{}, 1.0};
    const WeakHarnackResult res =
        check_weak_harnack(u, p, WeakHarnackMode::AtContacts, &A);
    CHECK(res.report.pass);
    CHECK(res.report.tested > 0);
    CHECK(res.smallest_M <= 10.0);
    CHECK(res.smallest_M > 0.0);
}

TEST_CASE("opening schedules double up to the interval top") {
    const auto s = opening_schedule(1.0, 8.0);
    REQUIRE(s.size() == 4);
    CHECK(s[0] == 1.0);
    CHECK(s[3] == 8.0);
    const auto t = opening_schedule(1.0, 5.0);
    CHECK(t.back() == 5.0);
    const auto one = opening_schedule(2.0, 2.0);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == 2.0);
}

TEST_CASE("local check tolerance band at the smallest resolved scale") {
    // With Lambda barely over the two-dimensional threshold 4, the
    // conservative tolerance admits marginal witnesses at r = 2h (its
    // curvature slack is +-2a there); they disappear at r = 4h. Margins
    // outside the band never appear either way.
    const Lattice lat = Lattice::centered(2, 1.0 / 32, 1.0);
    const DiscreteEllipticOp op = DiscreteEllipticOp::constant(lat, 1.0);
    std::vector<double> g(lat.size(), 0.0);
    for (std::int64_t i : boundary_nodes(lat)) {
        const Point p = lat.node(i);
        g[i] = 0.5 + 0.4 * std::sin(2 * std::atan2(p[1], p[0]) + 0.7);
    }
    const GridFunction u =
        solve_dirichlet(op, g, std::vector<double>(lat.size(), 0.0));
    const auto dirs = direction_sample(2, 32);
    const ClassParams tight = local_params(5.0, 1.0, 2.0 / 32, Ball{Point{}, 1.0});
    const ViolationReport at2 = check_supersolution_local(u, tight, dirs, {1.0});
    for (const ClassWitness& w : at2.witnesses) {
        CHECK(w.marginal);
        CHECK(w.margin <= 0.0);
    }
    const ClassParams wide = local_params(5.0, 1.0, 4.0 / 32, Ball{Point{}, 1.0});
    CHECK(check_supersolution_local(u, wide, dirs, {1.0}).pass);
}

TEST_CASE("local check worker count does not change witnesses") {
    const double lambda = 4.0;
    const Lattice lat = Lattice::centered(2, 1.0 / 32, 1.0);
    const GridFunction u = GridFunction::sample(lat, [&](const Point& p) {
        return (lambda / 2) * p[0] * p[0] - 0.5 * norm2(p, 2) + 0.02 * p[1];
    });
    // Omega wide enough that the x0 set crosses the parallel threshold.
    const ClassParams p = local_params(lambda, 1.0, 1.0 / 16, Ball{Point{}, 0.6});
    const auto dirs = direction_sample(2, 16);
    const ViolationReport r1 = check_supersolution_local(u, p, dirs, {1.0}, 1);
    const ViolationReport r3 = check_supersolution_local(u, p, dirs, {1.0}, 3);
    REQUIRE(r1.witnesses.size() == r3.witnesses.size());
    for (std::size_t i = 0; i < r1.witnesses.size(); ++i) {
        CHECK(r1.witnesses[i].x0_node == r3.witnesses[i].x0_node);
        CHECK(r1.witnesses[i].xi_index == r3.witnesses[i].xi_index);
        CHECK(r1.witnesses[i].margin == r3.witnesses[i].margin);
    }
}
