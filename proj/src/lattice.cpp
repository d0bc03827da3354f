#include "harnacklab/lattice.hpp"

#include <algorithm>
#include <cmath>

namespace hl {

Lattice Lattice::build(int dim, double spacing, const Point& center,
                       const Point& halfwidth) {
    if (dim < 1 || dim > kMaxDim)
        throw Error("lattice: dim must lie in [1, " + std::to_string(kMaxDim) +
                    "], got " + std::to_string(dim));
    if (!(spacing > 0) || !std::isfinite(spacing))
        throw Error("lattice: spacing must be a positive real");
    Lattice L;
    L.dim_ = dim;
    L.h_ = spacing;
    L.center_ = center;
    L.halfwidth_ = halfwidth;
    L.size_ = 1;
    for (int i = 0; i < dim; ++i) {
        const double hw = halfwidth[i];
        if (!(hw > 0))
            throw Error("lattice: half-width on axis " + std::to_string(i + 1) +
                        " of " + std::to_string(dim) + " must be positive");
        const double ratio = hw / spacing;
        const double rounded = std::round(ratio);
        if (rounded < 0.5 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
            throw Error("lattice: half-width " + std::to_string(hw) + " on axis " +
                        std::to_string(i + 1) + " of " + std::to_string(dim) +
                        " is not an integer multiple of spacing " +
                        std::to_string(spacing));
        L.mid_[i] = static_cast<int>(rounded);
        L.count_[i] = 2 * L.mid_[i] + 1;
        L.size_ *= L.count_[i];
        if (L.size_ > (std::int64_t(1) << 40))
            throw Error("lattice: node count too large");
    }
    std::int64_t s = 1;
    for (int i = dim - 1; i >= 0; --i) {
        L.stride_[i] = s;
        s *= L.count_[i];
    }
    return L;
}

Lattice Lattice::centered(int dim, double spacing, double halfwidth) {
    Point hw{};
    for (int i = 0; i < dim; ++i) hw[i] = halfwidth;
    return build(dim, spacing, Point{}, hw);
}

void Lattice::nearest(const Point& p, int* iv) const {
    for (int i = 0; i < dim_; ++i) {
        const long k = std::lround((p[i] - center_[i]) / h_);
        iv[i] = static_cast<int>(std::clamp<long>(k + mid_[i], 0, count_[i] - 1));
    }
}

bool Lattice::same_grid(const Lattice& o) const {
    if (dim_ != o.dim_ || h_ != o.h_) return false;
    for (int i = 0; i < dim_; ++i)
        if (center_[i] != o.center_[i] || halfwidth_[i] != o.halfwidth_[i])
            return false;
    return true;
}

std::vector<std::int64_t> Lattice::region_nodes(const Region& region) const {
    std::vector<std::int64_t> out;
    for_region(region, [&](std::int64_t f, const Point&) { out.push_back(f); });
    return out;
}

GridFunction::GridFunction(Lattice lat, std::vector<double> values)
    : lat_(std::move(lat)), v_(std::move(values)) {
    if (static_cast<std::int64_t>(v_.size()) != lat_.size())
        throw Error("grid function: value count " + std::to_string(v_.size()) +
                    " does not match lattice size " + std::to_string(lat_.size()));
}

GridFunction GridFunction::fill(const Lattice& lat, double c) {
    return GridFunction(lat, std::vector<double>(lat.size(), c));
}

GridFunction GridFunction::sample(const Lattice& lat,
                                  const std::function<double(const Point&)>& f) {
    std::vector<double> v(lat.size());
    for (std::int64_t i = 0; i < lat.size(); ++i) v[i] = f(lat.node(i));
    return GridFunction(lat, std::move(v));
}

bool GridFunction::all_finite() const {
    for (double x : v_)
        if (!std::isfinite(x)) return false;
    return true;
}

void GridFunction::require_finite(const char* who) const {
    if (!all_finite())
        throw Error(std::string(who) + ": grid function has non-finite values");
}

double GridFunction::min_value() const {
    double m = v_.empty() ? 0.0 : v_[0];
    for (double x : v_) m = std::min(m, x);
    return m;
}

double measure_fraction(const Lattice& lat,
                        const std::function<bool(std::int64_t, const Point&)>& indicator,
                        const Region& region) {
    std::int64_t total = 0, hits = 0;
    lat.for_region(region, [&](std::int64_t f, const Point& p) {
        ++total;
        if (indicator(f, p)) ++hits;
    });
    if (total == 0)
        throw Error("measure_fraction: region contains no lattice node "
                    "(under-resolved region)");
    return static_cast<double>(hits) / static_cast<double>(total);
}

double oscillation(const GridFunction& u, const Region& region) {
    bool any = false;
    double lo = 0, hi = 0;
    u.lattice().for_region(region, [&](std::int64_t f, const Point&) {
        const double x = u[f];
        if (!any) {
            lo = hi = x;
            any = true;
        } else {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    });
    if (!any) throw Error("oscillation: region contains no lattice node");
    return hi - lo;
}

DyadicCube cube_containing(const Point& p, int level, int dim) {
    DyadicCube c;
    c.level = level;
    c.dim = dim;
    for (int i = 0; i < dim; ++i)
        c.index[i] = static_cast<std::int64_t>(std::floor(std::ldexp(p[i], level)));
    return c;
}

std::vector<DyadicCube> dyadic_cubes_at_level(int level, const DyadicCube& root) {
    if (level < root.level)
        throw Error("dyadic_cubes_at_level: target level " + std::to_string(level) +
                    " is coarser than root level " + std::to_string(root.level));
    const int k = level - root.level;
    const std::int64_t per_axis = std::int64_t(1) << k;
    std::vector<DyadicCube> out;
    out.reserve(static_cast<std::size_t>(std::pow(double(per_axis), root.dim)));
    std::array<std::int64_t, kMaxDim> j{};
    while (true) {
        DyadicCube c;
        c.level = level;
        c.dim = root.dim;
        for (int i = 0; i < root.dim; ++i) c.index[i] = root.index[i] * per_axis + j[i];
        out.push_back(c);
        int ax = root.dim - 1;
        while (ax >= 0) {
            if (++j[ax] < per_axis) break;
            j[ax] = 0;
            --ax;
        }
        if (ax < 0) break;
    }
    return out;
}

}  // namespace hl
