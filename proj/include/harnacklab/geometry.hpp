#pragma once

#include <array>
#include <cmath>
#include <variant>

namespace hl {

inline constexpr int kMaxDim = 4;

// Fixed-capacity point; the active dimension is carried by the surrounding
// lattice or passed explicitly. Unused components stay zero so norms over
// kMaxDim components are safe.
using Point = std::array<double, kMaxDim>;

inline Point point1(double x) { return {x, 0, 0, 0}; }
inline Point point2(double x, double y) { return {x, y, 0, 0}; }
inline Point point3(double x, double y, double z) { return {x, y, z, 0}; }

inline double dot(const Point& a, const Point& b, int dim) {
    double s = 0;
    for (int i = 0; i < dim; ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Point& a, int dim) { return dot(a, a, dim); }

inline double norm(const Point& a, int dim) { return std::sqrt(norm2(a, dim)); }

inline double dist2(const Point& a, const Point& b, int dim) {
    double s = 0;
    for (int i = 0; i < dim; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double dist(const Point& a, const Point& b, int dim) {
    return std::sqrt(dist2(a, b, dim));
}

inline double dist_inf(const Point& a, const Point& b, int dim) {
    double m = 0;
    for (int i = 0; i < dim; ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Closed euclidean ball; node membership is |x - center| <= radius.
struct Ball {
    Point center{};
    double radius = 0;
};

// Open axis-aligned cube |x_i - center_i| < side/2 on every axis.
struct CubeRegion {
    Point center{};
    double side = 0;
};

using Region = std::variant<Ball, CubeRegion>;

inline bool contains(const Ball& b, const Point& p, int dim) {
    return dist2(p, b.center, dim) <= b.radius * b.radius;
}

inline bool contains(const CubeRegion& c, const Point& p, int dim) {
    for (int i = 0; i < dim; ++i)
        if (!(std::abs(p[i] - c.center[i]) < c.side / 2)) return false;
    return true;
}

inline bool contains(const Region& r, const Point& p, int dim) {
    return std::visit([&](const auto& g) { return contains(g, p, dim); }, r);
}

// Does the ball B_rho(x0) fit inside the region?
inline bool ball_inside(const Region& r, const Point& x0, double rho, int dim) {
    if (const Ball* b = std::get_if<Ball>(&r))
        return dist(x0, b->center, dim) <= b->radius - rho;
    const CubeRegion& c = std::get<CubeRegion>(r);
    for (int i = 0; i < dim; ++i)
        if (!(std::abs(x0[i] - c.center[i]) < c.side / 2 - rho)) return false;
    return true;
}

inline double surface_area_unit_sphere(int n) {
    // omega_n: 2 for n=1, 2*pi for n=2, 4*pi for n=3.
    const double pi = 3.14159265358979323846;
    switch (n) {
        case 1: return 2.0;
        case 2: return 2.0 * pi;
        case 3: return 4.0 * pi;
        default: {
            // 2 pi^{n/2} / Gamma(n/2)
            return 2.0 * std::pow(pi, n / 2.0) / std::tgamma(n / 2.0);
        }
    }
}

}  // namespace hl
