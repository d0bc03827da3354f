#include <doctest.h>

#include <cmath>

#include "harnacklab/lattice.hpp"

using namespace hl;

namespace {
const double kPi = 3.14159265358979323846;
}

TEST_CASE("lattice node counts") {
    const Lattice l2 = Lattice::centered(2, 1.0 / 64, 1.0);
    CHECK(l2.size() == 129 * 129);
    CHECK(l2.count(0) == 129);

    const Lattice l1 = Lattice::centered(1, 0.5, 1.0);
    CHECK(l1.size() == 5);
    for (int i = 0; i < 5; ++i) CHECK(l1.coord(0, i) == doctest::Approx(-1 + 0.5 * i));

    CHECK_THROWS_AS(Lattice::centered(2, 0.3, 1.0), Error);
    CHECK_THROWS_AS(Lattice::centered(0, 0.5, 1.0), Error);
    CHECK_THROWS_AS(Lattice::centered(2, -0.5, 1.0), Error);
}

TEST_CASE("lattice node coordinates are exact and lexicographic") {
    const Lattice lat = Lattice::centered(2, 0.25, 1.0);
    // Axis 0 most significant.
    CHECK(lat.node(0)[0] == -1.0);
    CHECK(lat.node(0)[1] == -1.0);
    CHECK(lat.node(1)[1] == -0.75);
    CHECK(lat.node(1)[0] == -1.0);
    int iv[kMaxDim];
    for (std::int64_t f = 0; f < lat.size(); ++f) {
        lat.decode(f, iv);
        CHECK(lat.flat(iv) == f);
    }
}

TEST_CASE("measure_fraction basics") {
    const Lattice lat = Lattice::centered(2, 1.0 / 128, 1.0);
    const Ball half{Point{}, 0.5};
    CHECK(measure_fraction(lat, [](std::int64_t, const Point&) { return true; }, half) ==
          1.0);

    const double f = measure_fraction(
        lat, [](std::int64_t, const Point& p) { return p[0] < 0; }, half);
    CHECK(std::abs(f - 0.5) <= 2.0 / 128);

    const double g = measure_fraction(
        lat, [](std::int64_t, const Point& p) { return norm(p, 2) <= 0.25; },
        CubeRegion{Point{}, 1.0});
    CHECK(std::abs(g - kPi / 16) <= 0.01);

    // Region with no nodes: a tiny ball strictly between nodes.
    CHECK_THROWS_AS(measure_fraction(lat, [](std::int64_t, const Point&) { return true; },
                                     Ball{point2(1.0 / 512, 1.0 / 512), 1.0 / 1024}),
                    Error);
}

TEST_CASE("measure_fraction monotone in the indicator") {
    const Lattice lat = Lattice::centered(2, 1.0 / 32, 1.0);
    const Ball half{Point{}, 0.5};
    auto weak = [](std::int64_t, const Point& p) { return p[0] + p[1] < 0.3; };
    auto strong = [&](std::int64_t f, const Point& p) {
        return p[0] + p[1] < 0.3 && p[0] > -0.2;
    };
    CHECK(measure_fraction(lat, strong, half) <= measure_fraction(lat, weak, half));
}

TEST_CASE("oscillation") {
    const Lattice lat = Lattice::centered(2, 1.0 / 32, 1.0);
    const GridFunction c = GridFunction::fill(lat, 3.25);
    CHECK(oscillation(c, Ball{Point{}, 0.5}) == 0.0);

    const GridFunction x1 =
        GridFunction::sample(lat, [](const Point& p) { return p[0]; });
    CHECK(oscillation(x1, Ball{Point{}, 0.25}) == doctest::Approx(0.5).epsilon(1e-14));

    const GridFunction q =
        GridFunction::sample(lat, [](const Point& p) { return norm2(p, 2); });
    CHECK(oscillation(q, Ball{Point{}, 0.5}) == doctest::Approx(0.25).epsilon(1e-14));

    CHECK_THROWS_AS(oscillation(c, Ball{point2(1.0 / 128, 0), 1.0 / 256}), Error);
}

TEST_CASE("oscillation invariances") {
    const Lattice lat = Lattice::centered(2, 1.0 / 16, 1.0);
    const GridFunction u =
        GridFunction::sample(lat, [](const Point& p) { return p[0] * p[0] - p[1]; });
    const Ball b{point2(0.125, -0.25), 0.375};
    const double base = oscillation(u, b);

    GridFunction shifted = u;
    for (double& v : shifted.values()) v += 4.5;
    CHECK(oscillation(shifted, b) == doctest::Approx(base).epsilon(1e-13));

    GridFunction scaled = u;
    for (double& v : scaled.values()) v *= 2.0;
    CHECK(oscillation(scaled, b) == doctest::Approx(2 * base).epsilon(1e-14));
}

TEST_CASE("refinement consistency at h and h/2") {
    for (const char* which : {"x1", "r2"}) {
        const Lattice lat1 = Lattice::centered(2, 1.0 / 64, 1.0);
        const Lattice lat2 = Lattice::centered(2, 1.0 / 128, 1.0);
        auto fn = [&](const Point& p) {
            return std::string(which) == "x1" ? p[0] : norm2(p, 2);
        };
        const GridFunction u1 = GridFunction::sample(lat1, fn);
        const GridFunction u2 = GridFunction::sample(lat2, fn);
        const Ball half{Point{}, 0.5};
        const double o1 = oscillation(u1, half);
        const double o2 = oscillation(u2, half);
        CHECK(std::abs(o1 - o2) <= 4.0 / 64);
        auto ind = [](std::int64_t, const Point& p) { return p[0] < 0; };
        const double f1 = measure_fraction(lat1, ind, half);
        const double f2 = measure_fraction(lat2, ind, half);
        CHECK(std::abs(f1 - f2) <= 4.0 / 64);
    }
}

TEST_CASE("dyadic cubes") {
    DyadicCube root;
    root.level = 0;
    root.dim = 2;

    const auto cubes = dyadic_cubes_at_level(2, root);
    CHECK(cubes.size() == 16);
    for (const DyadicCube& c : cubes) CHECK(c.side() == doctest::Approx(0.25));

    const auto self = dyadic_cubes_at_level(0, root);
    REQUIRE(self.size() == 1);
    CHECK(self[0] == root);

    DyadicCube root1;
    root1.level = 0;
    root1.dim = 1;
    CHECK(dyadic_cubes_at_level(3, root1).size() == 8);

    CHECK_THROWS_AS(dyadic_cubes_at_level(1, DyadicCube{2, 2, {}}), Error);
}

TEST_CASE("dyadic cubes partition the root") {
    DyadicCube root;
    root.level = 1;
    root.dim = 2;
    root.index = {1, -1, 0, 0};
    const auto cubes = dyadic_cubes_at_level(3, root);
    CHECK(cubes.size() == 16);  // 2^{2*(3-1)}
    // Every sampled point of the root lies in exactly one child cube.
    for (double x = root.lo(0) + 0.01; x < root.lo(0) + root.side(); x += 0.07) {
        for (double y = root.lo(1) + 0.01; y < root.lo(1) + root.side(); y += 0.07) {
            int hits = 0;
            for (const DyadicCube& c : cubes) hits += c.contains(point2(x, y)) ? 1 : 0;
            CHECK(hits == 1);
        }
    }
}

TEST_CASE("cube_containing uses the half-open convention") {
    const DyadicCube c = cube_containing(Point{}, 3, 2);
    CHECK(c.index[0] == 0);
    CHECK(c.index[1] == 0);
    const DyadicCube d = cube_containing(point2(-1e-9, 0.0), 3, 2);
    CHECK(d.index[0] == -1);
    const DyadicCube e = cube_containing(point2(0.125, 0.2), 3, 2);
    CHECK(e.index[0] == 1);
    CHECK(e.index[1] == 1);
}
