#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "harnacklab/error.hpp"
#include "harnacklab/geometry.hpp"

namespace hl {

// Uniform lattice over an axis-aligned box. Node coordinates are exactly
// center_i + k*spacing with integer k; enumeration is lexicographic by index
// with axis 0 most significant, so every reduction that iterates nodes in
// flat order is reproducible.
class Lattice {
public:
    Lattice() = default;

    // halfwidth_i must be a positive integer multiple of spacing.
    static Lattice build(int dim, double spacing, const Point& center,
                         const Point& halfwidth);

    // Convenience: box [-w, w]^dim centered at the origin.
    static Lattice centered(int dim, double spacing, double halfwidth);

    int dim() const { return dim_; }
    double spacing() const { return h_; }
    const Point& center() const { return center_; }
    const Point& halfwidth() const { return halfwidth_; }
    std::int64_t size() const { return size_; }
    int count(int axis) const { return count_[axis]; }

    double coord(int axis, int i) const {
        return center_[axis] + (i - mid_[axis]) * h_;
    }

    Point node(std::int64_t flat) const {
        Point p{};
        for (int ax = dim_ - 1; ax >= 0; --ax) {
            const int i = static_cast<int>(flat % count_[ax]);
            flat /= count_[ax];
            p[ax] = coord(ax, i);
        }
        return p;
    }

    void decode(std::int64_t flat, int* iv) const {
        for (int ax = dim_ - 1; ax >= 0; --ax) {
            iv[ax] = static_cast<int>(flat % count_[ax]);
            flat /= count_[ax];
        }
    }

    std::int64_t flat(const int* iv) const {
        std::int64_t f = 0;
        for (int ax = 0; ax < dim_; ++ax) f = f * count_[ax] + iv[ax];
        return f;
    }

    std::int64_t stride(int axis) const { return stride_[axis]; }

    // Index of the node nearest to p along each axis (clamped to the box).
    void nearest(const Point& p, int* iv) const;

    bool in_box(const Point& p, double tol = 1e-12) const {
        for (int i = 0; i < dim_; ++i)
            if (std::abs(p[i] - center_[i]) > halfwidth_[i] + tol) return false;
        return true;
    }

    // Visit every node of `region` in lexicographic order. The callback
    // receives (flat index, node coordinates).
    template <class F>
    void for_region(const Region& region, F&& f) const;

    std::vector<std::int64_t> region_nodes(const Region& region) const;

    bool same_grid(const Lattice& o) const;

private:
    int dim_ = 0;
    double h_ = 0;
    Point center_{};
    Point halfwidth_{};
    int mid_[kMaxDim] = {0, 0, 0, 0};    // halfwidth / spacing
    int count_[kMaxDim] = {1, 1, 1, 1};  // 2*mid + 1
    std::int64_t stride_[kMaxDim] = {0, 0, 0, 0};
    std::int64_t size_ = 0;
};

// Scalar samples on every node of a lattice.
class GridFunction {
public:
    GridFunction() = default;
    GridFunction(Lattice lat, std::vector<double> values);
    static GridFunction fill(const Lattice& lat, double c);
    static GridFunction sample(const Lattice& lat,
                               const std::function<double(const Point&)>& f);

    const Lattice& lattice() const { return lat_; }
    double operator[](std::int64_t flat) const { return v_[flat]; }
    double& operator[](std::int64_t flat) { return v_[flat]; }
    const std::vector<double>& values() const { return v_; }
    std::vector<double>& values() { return v_; }

    bool all_finite() const;
    void require_finite(const char* who) const;

    double min_value() const;

private:
    Lattice lat_;
    std::vector<double> v_;
};

// Fraction of region nodes satisfying the indicator. Errors if the region
// holds no node (under-resolved region).
double measure_fraction(const Lattice& lat,
                        const std::function<bool(std::int64_t, const Point&)>& indicator,
                        const Region& region);

// max(u) - min(u) over region nodes; errors on an empty region.
double oscillation(const GridFunction& u, const Region& region);

// Dyadic cube of side 2^{-level}: prod_i [ index_i * 2^{-level},
// (index_i + 1) * 2^{-level} ). Half-open on the upper faces so every point
// belongs to exactly one cube per level.
struct DyadicCube {
    int level = 0;
    int dim = 0;
    std::array<std::int64_t, kMaxDim> index{};

    double side() const { return std::ldexp(1.0, -level); }
    double lo(int axis) const { return std::ldexp(static_cast<double>(index[axis]), -level); }
    bool contains(const Point& p) const {
        const double s = side();
        for (int i = 0; i < dim; ++i) {
            const double l = lo(i);
            if (!(p[i] >= l && p[i] < l + s)) return false;
        }
        return true;
    }
    bool operator==(const DyadicCube& o) const {
        return level == o.level && dim == o.dim && index == o.index;
    }
    bool operator<(const DyadicCube& o) const {
        if (level != o.level) return level < o.level;
        return index < o.index;
    }
};

// The unique level-l cube containing p.
DyadicCube cube_containing(const Point& p, int level, int dim);

// All level-l cubes tiling `root`; errors if l < root.level.
std::vector<DyadicCube> dyadic_cubes_at_level(int level, const DyadicCube& root);

// --- template bodies -------------------------------------------------------

template <class F>
void Lattice::for_region(const Region& region, F&& f) const {
    // Per-axis index window bounding the region, then an exact test per node.
    int lo[kMaxDim], hi[kMaxDim];
    Point c{};
    double r[kMaxDim];
    if (const Ball* b = std::get_if<Ball>(&region)) {
        c = b->center;
        for (int i = 0; i < dim_; ++i) r[i] = b->radius;
    } else {
        const CubeRegion& q = std::get<CubeRegion>(region);
        c = q.center;
        for (int i = 0; i < dim_; ++i) r[i] = q.side / 2;
    }
    for (int i = 0; i < dim_; ++i) {
        const double lo_c = c[i] - r[i] - center_[i];
        const double hi_c = c[i] + r[i] - center_[i];
        lo[i] = std::max(0, static_cast<int>(std::floor(lo_c / h_)) + mid_[i]);
        hi[i] = std::min(count_[i] - 1,
                         static_cast<int>(std::ceil(hi_c / h_)) + mid_[i]);
        if (lo[i] > hi[i]) return;
    }
    int iv[kMaxDim];
    for (int i = 0; i < dim_; ++i) iv[i] = lo[i];
    while (true) {
        Point p{};
        for (int i = 0; i < dim_; ++i) p[i] = coord(i, iv[i]);
        if (hl::contains(region, p, dim_)) f(flat(iv), p);
        int ax = dim_ - 1;
        while (ax >= 0) {
            if (++iv[ax] <= hi[ax]) break;
            iv[ax] = lo[ax];
            --ax;
        }
        if (ax < 0) break;
    }
}

}  // namespace hl
