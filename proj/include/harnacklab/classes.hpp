#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "harnacklab/contact.hpp"
#include "harnacklab/lattice.hpp"

namespace hl {

// Quadratic comparison polynomial
//   a * [ (Lambda/2)((x-x0).xi)^2 - (1/2)|x-x0|^2 + b.(x-x0) + d ]
// with unit direction xi, |b| <= 1, |d| <= 1.
struct ComparisonQuadratic {
    double lambda = 0;
    Point xi{};
    Point b{};
    double d = 0;
    double scale = 1;  // a
    Point x0{};

    double eval(const Point& x, int dim) const {
        Point v{};
        for (int i = 0; i < dim; ++i) v[i] = x[i] - x0[i];
        const double s = dot(v, xi, dim);
        return scale * ((lambda / 2) * s * s - 0.5 * norm2(v, dim) + dot(b, v, dim) + d);
    }
};

struct ClassParams {
    double lambda = 0;        // Lambda, anisotropy of the comparison quadratic
    double a_lo = 1;          // interval I = [a_lo, a_hi] of openings
    double a_hi = 1;
    double r = 0;             // comparison scale
    double weak_M = 1;        // weak-Harnack constant M
    double weak_a = 1;        // weak-Harnack size a
    double rho = 0;           // weak-Harnack scale rho
    double delta = 0.05;      // measure defect; 0 means "holds everywhere"
    double touch_K = 4;       // touching tolerance is touch_K * a * h^2
    Region omega = Ball{Point{}, 1.0};  // region where membership is claimed

    void validate() const;
    double touch_tol(double a, double h) const { return touch_K * a * h * h; }
};

struct ClassWitness {
    std::int64_t x0_node = -1;
    int xi_index = -1;     // -1 when no direction is involved
    int b_index = -1;      // 0 = zero, 1 = gradient-matched; -1 if n/a
    double a = 0;          // opening / scale
    double margin = 0;     // the tested minimum m
    double fraction = -1;  // weak-Harnack modes only
    bool marginal = false; // |margin| within the touching tolerance
    double d = 0;          // value-matched constant (local test only)
};

struct ViolationReport {
    std::string definition;  // "2.1", "2.5", "2.2" or "2.6"
    bool pass = false;
    bool vacuous = false;    // nothing to test (e.g. empty contact set)
    std::size_t tested = 0;
    std::size_t filtered_d = 0;  // candidates dropped by the |d| <= 1 filter
    std::vector<ClassWitness> witnesses;
    ClassParams params;
};

// Deterministic unit-direction samples: uniform half-circle angles for n = 2,
// a Fibonacci sphere for n = 3. (The direction enters quadratically, so
// antipodal duplicates are redundant.)
std::vector<Point> direction_sample(int dim, int count);

// Geometric opening grid with ratio 2 spanning [a_lo, a_hi].
std::vector<double> opening_schedule(double a_lo, double a_hi);

// Local supersolution test: u cannot be touched from below at any x0 with
// B_r(x0) in omega by a * P_Lambda(x - x0). The constant d is forced by
// value matching (d = u(x0)/a) and filtered to |d| <= 1; b candidates are
// {0, grad_h u(x0)/a clipped to the unit ball}. A witness is a candidate
// whose minimum over the B_r(x0) nodes is >= -tolerance.
ViolationReport check_supersolution_local(const GridFunction& u, const ClassParams& params,
                                          const std::vector<Point>& directions,
                                          const std::vector<double>& openings,
                                          int jobs = 1);

// Global variant at contact points: u cannot be touched from below at a
// contact point x0 of P^a_y by P^a_y + a(Lambda/2)((x-x0).xi)^2 chi_{B_r(x0)}.
ViolationReport check_supersolution_global(const GridFunction& u, const ClassParams& params,
                                           const ContactSet& contact,
                                           const std::vector<Point>& directions);

enum class WeakHarnackMode { Pointwise, AtContacts };

// Weak-Harnack class test. Pointwise: every x0 with B_{2 rho}(x0) in omega and
// u(x0) <= a must have |{u <= M a} cap B_rho(x0)| >= (1-delta)|B_rho(x0)|.
// AtContacts: same with threshold P^a_y + M a at every contact record.
// Also reports the smallest M that would pass.
struct WeakHarnackResult {
    ViolationReport report;
    double smallest_M = 0;
};

WeakHarnackResult check_weak_harnack(const GridFunction& u, const ClassParams& params,
                                     WeakHarnackMode mode,
                                     const ContactSet* contact = nullptr);

// Recompute the margin of a recorded witness (reproducibility check).
double reevaluate_witness(const GridFunction& u, const ClassParams& params,
                          const std::vector<Point>& directions,
                          const ClassWitness& w);

}  // namespace hl
