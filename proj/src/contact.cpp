#include "harnacklab/contact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <thread>

namespace hl {

namespace {

// Core of the slide: minimize u(x) + (a/2)|x - y|^2 over all nodes.
// Separable squared distances let us prune whole index slabs: once the
// penalty of a slab plus the global minimum of u exceeds the current best,
// no node in it can win.
ContactRecord slide_impl(const GridFunction& u, double opening, const Point& vertex,
                         double u_min) {
    const Lattice& lat = u.lattice();
    const int dim = lat.dim();
    const double a2 = opening / 2;

    // Per-axis squared offsets.
    std::vector<double> sq[kMaxDim];
    for (int ax = 0; ax < dim; ++ax) {
        sq[ax].resize(lat.count(ax));
        for (int i = 0; i < lat.count(ax); ++i) {
            const double d = lat.coord(ax, i) - vertex[ax];
            sq[ax][i] = d * d;
        }
    }

    double best = std::numeric_limits<double>::infinity();
    std::int64_t best_node = -1;

    int iv[kMaxDim] = {0, 0, 0, 0};
    const std::int64_t inner = lat.count(dim - 1);
    std::int64_t flat = 0;
    // Iterate all slabs over the leading dim-1 axes; innermost axis is a
    // tight loop.
    while (true) {
        double slab_pen = 0;
        for (int ax = 0; ax + 1 < dim; ++ax) slab_pen += sq[ax][iv[ax]];
        if (u_min + a2 * slab_pen < best) {
            const double* us = &u.values()[flat];
            const double* qs = sq[dim - 1].data();
            for (std::int64_t j = 0; j < inner; ++j) {
                const double val = us[j] + a2 * (slab_pen + qs[j]);
                if (val < best) {
                    best = val;
                    best_node = flat + j;
                }
            }
        }
        flat += inner;
        int ax = dim - 2;
        while (ax >= 0) {
            if (++iv[ax] < lat.count(ax)) break;
            iv[ax] = 0;
            --ax;
        }
        if (ax < 0) break;
    }

    ContactRecord rec;
    rec.paraboloid = Paraboloid{opening, vertex, best};
    rec.contact_node = best_node;
    rec.admissible = rec.paraboloid.admissible(dim);
    return rec;
}

void check_vertex(const Point& vertex, int dim) {
    if (norm(vertex, dim) > kVertexBallRadius + 1e-12)
        throw Error("slide_to_touch: vertex lies outside the 3/4 ball");
}

}  // namespace

ContactRecord slide_to_touch(const GridFunction& u, double opening, const Point& vertex) {
    if (!(opening > 0)) throw Error("slide_to_touch: opening must be positive");
    check_vertex(vertex, u.lattice().dim());
    u.require_finite("slide_to_touch");
    return slide_impl(u, opening, vertex, u.min_value());
}

ContactSet contact_set(const GridFunction& u, double opening,
                       const std::vector<Point>& vertices, int jobs) {
    if (vertices.empty()) throw Error("contact_set: vertex sample is empty");
    if (!(opening > 0)) throw Error("contact_set: opening must be positive");
    const int dim = u.lattice().dim();
    for (const Point& y : vertices) check_vertex(y, dim);
    u.require_finite("contact_set");
    const double u_min = u.min_value();

    ContactSet A;
    A.opening = opening;
    A.records.resize(vertices.size());
    auto run = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i)
            A.records[i] = slide_impl(u, opening, vertices[i], u_min);
    };
    if (jobs <= 1 || vertices.size() < 64) {
        run(0, vertices.size());
    } else {
        const std::size_t nw = std::min<std::size_t>(jobs, vertices.size());
        std::vector<std::thread> ws;
        const std::size_t chunk = (vertices.size() + nw - 1) / nw;
        for (std::size_t w = 0; w < nw; ++w) {
            const std::size_t lo = w * chunk;
            const std::size_t hi = std::min(vertices.size(), lo + chunk);
            if (lo < hi) ws.emplace_back(run, lo, hi);
        }
        for (auto& t : ws) t.join();
    }
    return A;
}

std::vector<std::int64_t> ContactSet::nodes() const {
    std::vector<std::int64_t> out;
    out.reserve(records.size());
    for (const ContactRecord& r : records)
        if (r.admissible) out.push_back(r.contact_node);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::size_t ContactSet::admissible_count() const {
    std::size_t n = 0;
    for (const ContactRecord& r : records) n += r.admissible ? 1 : 0;
    return n;
}

bool DyadicCover::covers(const Point& p, int dim) const {
    const DyadicCube c = cube_containing(p, level, dim);
    return std::binary_search(cubes.begin(), cubes.end(), c);
}

DyadicCover dyadic_cover(const ContactSet& A, const GridFunction& u, int level) {
    const Lattice& lat = u.lattice();
    if (std::ldexp(1.0, -level) < lat.spacing() * (1 - 1e-12))
        throw Error("dyadic_cover: level " + std::to_string(level) +
                    " is finer than the lattice spacing (cover unresolved)");
    std::set<DyadicCube> cubes;
    for (std::int64_t node : A.nodes())
        cubes.insert(cube_containing(lat.node(node), level, lat.dim()));
    DyadicCover cover;
    cover.level = level;
    cover.cubes.assign(cubes.begin(), cubes.end());
    cover.measure = static_cast<double>(cover.cubes.size()) *
                    std::ldexp(1.0, -level * lat.dim());
    return cover;
}

BarrierProfile barrier_profile(int dim, double lambda, double sigma) {
    if (dim < 1) throw Error("barrier_profile: dim must be >= 1");
    if (!(lambda > 0)) throw Error("barrier_profile: Lambda must be positive");
    const double outer = 6 * std::sqrt(static_cast<double>(dim));
    if (!(sigma > 0)) throw Error("barrier_profile: sigma must be positive");
    if (sigma > outer) throw Error("barrier_profile: sigma exceeds 6*sqrt(n)");
    BarrierProfile b;
    b.dim = dim;
    b.lambda = lambda;
    b.gamma = 4 * lambda;
    b.beta = std::pow(outer, -b.gamma);
    b.sigma = sigma;
    b.tangent_opening = b.gamma * std::pow(sigma, -b.gamma - 2);
    // Tangency at |x| = sigma: match value and radial slope.
    b.tangent_offset = b.phi_radial(sigma) + (b.tangent_opening / 2) * sigma * sigma;
    return b;
}

SeparationReport vertex_contact_separation(const GridFunction& u, double opening,
                                           const std::vector<Point>& vertices,
                                           double r, double c0_separation) {
    const Lattice& lat = u.lattice();
    const int dim = lat.dim();
    const ContactSet A = contact_set(u, opening, vertices);

    // Keep admissible contacts inside B_{5/8}.
    std::vector<Point> ys, zs;
    for (std::size_t i = 0; i < A.records.size(); ++i) {
        const ContactRecord& rec = A.records[i];
        if (!rec.admissible) continue;
        const Point z = lat.node(rec.contact_node);
        if (norm(z, dim) > 0.625) continue;
        ys.push_back(rec.paraboloid.vertex);
        zs.push_back(z);
    }
    if (ys.size() < 2)
        throw Error("vertex_contact_separation: fewer than 2 admissible contacts "
                    "in B_{5/8}");

    const double min_sep = c0_separation * r;
    SeparationReport rep;
    rep.contacts_used = ys.size();
    rep.min_ratio = std::numeric_limits<double>::infinity();
    rep.max_ratio = 0;
    for (std::size_t i = 0; i < ys.size(); ++i) {
        for (std::size_t j = i + 1; j < ys.size(); ++j) {
            const double dy = dist(ys[i], ys[j], dim);
            if (dy < min_sep) continue;
            const double ratio = dist(zs[i], zs[j], dim) / dy;
            ++rep.pairs_tested;
            if (ratio < rep.min_ratio) {
                rep.min_ratio = ratio;
                rep.y1 = ys[i];
                rep.y2 = ys[j];
                rep.z1 = zs[i];
                rep.z2 = zs[j];
            }
            rep.max_ratio = std::max(rep.max_ratio, ratio);
        }
    }
    if (rep.pairs_tested == 0)
        throw Error("vertex_contact_separation: no vertex pair is separated by "
                    "C0 * r = " + std::to_string(min_sep));
    return rep;
}

std::vector<Point> vertex_sample(const Lattice& lat, int stride) {
    if (stride < 1) throw Error("vertex_sample: stride must be >= 1");
    std::vector<Point> out;
    const int dim = lat.dim();
    lat.for_region(Ball{Point{}, kVertexBallRadius}, [&](std::int64_t f, const Point& p) {
        if (stride > 1) {
            int iv[kMaxDim];
            lat.decode(f, iv);
            for (int ax = 0; ax < dim; ++ax)
                if (iv[ax] % stride != 0) return;
        }
        out.push_back(p);
    });
    return out;
}

}  // namespace hl
