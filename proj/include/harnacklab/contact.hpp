#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "harnacklab/lattice.hpp"

namespace hl {

// Paraboloids must be nonpositive outside this ball for admissibility, which
// pins c_y <= (a/2)(3/4 - |y|)^2 for a vertex y inside it.
inline constexpr double kVertexBallRadius = 0.75;

// Downward paraboloid P(x) = -(opening/2)|x - vertex|^2 + offset.
struct Paraboloid {
    double opening = 1;
    Point vertex{};
    double offset = 0;

    double eval(const Point& x, int dim) const {
        return -(opening / 2) * dist2(x, vertex, dim) + offset;
    }
    double admissible_bound(int dim) const {
        const double slack = kVertexBallRadius - norm(vertex, dim);
        return slack <= 0 ? 0.0 : (opening / 2) * slack * slack;
    }
    bool admissible(int dim) const { return offset <= admissible_bound(dim); }
};

struct ContactRecord {
    Paraboloid paraboloid;
    std::int64_t contact_node = -1;
    bool admissible = false;
};

// Contact set A_a(u): the nodes touched from below by some admissible
// paraboloid of the given opening. Inadmissible slides are kept in `records`
// (flagged) for diagnostics but excluded from the node set.
struct ContactSet {
    double opening = 1;
    std::vector<ContactRecord> records;  // one per vertex, in sample order

    // Distinct contact nodes of admissible records, sorted by flat index.
    std::vector<std::int64_t> nodes() const;
    std::size_t admissible_count() const;
};

// Slide the paraboloid of the given opening and vertex up from below until it
// touches u: offset = min over all lattice nodes of u(x) + (a/2)|x - y|^2,
// contact at the argmin (ties -> lexicographically smallest node).
ContactRecord slide_to_touch(const GridFunction& u, double opening, const Point& vertex);

ContactSet contact_set(const GridFunction& u, double opening,
                       const std::vector<Point>& vertices, int jobs = 1);

// Level-l dyadic cover A^l_a(u): the cubes containing at least one contact
// node, each point mapped to its unique half-open cube. Errors if 2^{-level}
// is finer than the lattice spacing (cover would be unresolved).
struct DyadicCover {
    int level = 0;
    std::vector<DyadicCube> cubes;  // sorted, distinct
    double measure = 0;             // count * 2^{-level*dim}
    bool covers(const Point& p, int dim) const;
};

DyadicCover dyadic_cover(const ContactSet& A, const GridFunction& u, int level);

// Barrier phi(x) = |x|^{-gamma} - beta with gamma = 4*Lambda and beta chosen
// so phi vanishes on |x| = 6*sqrt(n); p_sigma is the radial paraboloid of
// opening d = gamma * sigma^{-gamma-2} tangent to phi on |x| = sigma.
struct BarrierProfile {
    int dim = 0;
    double lambda = 0;
    double gamma = 0;
    double beta = 0;
    double sigma = 0;
    double tangent_opening = 0;  // d
    double tangent_offset = 0;   // value of p_sigma at the origin

    double phi(const Point& x) const {
        return std::pow(norm(x, dim), -gamma) - beta;
    }
    double phi_radial(double r) const { return std::pow(r, -gamma) - beta; }
    double p_sigma(const Point& x) const {
        return -(tangent_opening / 2) * norm2(x, dim) + tangent_offset;
    }
    double p_sigma_radial(double r) const {
        return -(tangent_opening / 2) * r * r + tangent_offset;
    }
};

BarrierProfile barrier_profile(int dim, double lambda, double sigma);

// Contact-point separation versus vertex separation: the minimum of
// |z1 - z2| / |y1 - y2| over pairs of admissible contacts z in B_{5/8}
// whose vertices are at least C0 * r apart.
struct SeparationReport {
    double min_ratio = 0;
    double max_ratio = 0;
    std::size_t pairs_tested = 0;
    std::size_t contacts_used = 0;
    // Witness pair achieving the minimum.
    Point y1{}, y2{}, z1{}, z2{};
};

SeparationReport vertex_contact_separation(const GridFunction& u, double opening,
                                           const std::vector<Point>& vertices,
                                           double r, double c0_separation);

// Default vertex sample: all lattice nodes in the closed 3/4-ball, optionally
// strided per axis.
std::vector<Point> vertex_sample(const Lattice& lat, int stride = 1);

}  // namespace hl
