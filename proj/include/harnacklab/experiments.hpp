#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "harnacklab/classes.hpp"
#include "harnacklab/contact.hpp"
#include "harnacklab/operators.hpp"

namespace hl {

// ---------------------------------------------------------------------------
// Randomized problem instances. Boundary values live in [0, 1]: an i.i.d.
// base level plus an optional angular spike, sampled node by node in
// lexicographic order so a seed pins the data exactly.
// ---------------------------------------------------------------------------
struct BoundarySpec {
    std::string kind = "spike";  // "uniform" or "spike"
    double base_lo = 0.05;
    double base_hi = 0.3;
    double spike_height = 1.0;
    double spike_width = 0.4;  // angular width (radians)
};

struct InstanceSpec {
    std::string family = "discrete";  // "discrete" | "homogenized" | "nonlocal"
    int dim = 2;
    double eps = 1.0 / 32;      // lattice spacing (discrete) / oscillation scale
    double spacing = 1.0 / 32;  // grid spacing for homogenized / nonlocal
    double sigma = 1.5;         // nonlocal order
    double lambda_min = 1;
    double lambda_max = 10;
    double coeff_floor = 1e-8;
    std::uint64_t seed = 1;
    BoundarySpec boundary;

    double grid_spacing() const { return family == "discrete" ? eps : spacing; }
};

struct Instance {
    InstanceSpec spec;
    GridFunction u;
    SolveReport solve;
};

std::vector<double> boundary_values(const Lattice& lat,
                                    const std::vector<std::int64_t>& nodes,
                                    const BoundarySpec& spec, std::uint64_t seed);

Instance build_and_solve(const InstanceSpec& spec, const SolveOptions& opts = {});

// Rescale so the minimum over B_{1/2} equals one (the weak-Harnack
// normalization); errors if the minimum is not positive.
GridFunction normalize_half_ball(const GridFunction& u);

// Synthetic grid functions used by CLI configs and tests.
GridFunction synthetic_function(const Lattice& lat, const std::string& name);

// ---------------------------------------------------------------------------
// Measure, decay, and coverage experiments.
// ---------------------------------------------------------------------------

// Measure of {u <= K} in B_{1/2}; requires u >= 0 with min over B_{1/2} <= 1.
// `smallest_K` is the least threshold reaching the 3/4 fraction.
struct WeakHarnackReport {
    double threshold_K = 0;
    double fraction = 0;
    bool pass = false;
    double smallest_K = 0;
    std::int64_t nodes = 0;
};

WeakHarnackReport weak_harnack_check(const GridFunction& u, double K);

// Oscillations over shrinking balls B_{2^{-k}}(center) and the least-squares
// slope of log2(osc) against -k.
struct OscillationDecayReport {
    std::vector<int> levels;
    std::vector<double> radii;
    std::vector<double> osc;
    std::vector<double> ratios;  // osc_k / osc_{k-1}
    double exponent = 0;
    bool truncated = false;   // k_max cut by resolution
    bool degenerate = false;  // some oscillation vanished; no fit
    double eta_half = 0;      // 1 - osc(B_1/2)/osc(B_1) when B_1 is available
};

OscillationDecayReport oscillation_decay_check(const GridFunction& u, const Point& center,
                                               int k_max, double min_radius = 0);

// Dyadic-cover coverage of B_{1/2} along a doubling opening schedule.
struct CoverageParams {
    double a0 = 1;
    double ratio = 2;
    int steps = 4;
    int level = 3;
    double mu = 0.125;
    int vertex_stride = 1;
    int jobs = 1;
};

struct CoverageReport {
    std::vector<double> openings;
    std::vector<double> fractions;
    std::vector<double> gains;  // per-step gain relative to the uncovered rest
    std::optional<double> reached_at;
    bool pass = false;
    double mu = 0;
    int level = 0;
};

CoverageReport coverage_check(const GridFunction& u, const CoverageParams& params);

// ---------------------------------------------------------------------------
// Uniformity sweeps: one row per parameter value, each row solving instances
// from the same template and recording the fitted oscillation-decay exponent
// and the smallest weak-Harnack K of the normalized solution. The verdict
// compares max/min of the tracked quantity over rows.
// ---------------------------------------------------------------------------
struct SweepConfig {
    std::string family = "sigma_nonlocal";  // also "eps_discrete", "eps_homogenized"
    std::vector<double> values;
    InstanceSpec base;
    std::string track = "exponent";  // or "smallest_K"
    double ratio_bound = 1.5;
    int instances = 1;
    int k_max = 7;
    int jobs = 1;
    SolveOptions solve;
};

struct SweepRow {
    double value = 0;
    bool failed = false;
    std::string error;
    double exponent = 0;
    double smallest_K = 0;
    double tracked = 0;
    double runtime_s = 0;
};

struct SweepReport {
    std::string family;
    std::string track;
    std::vector<SweepRow> rows;
    double max_min_ratio = 0;
    double ratio_bound = 0;
    bool pass = false;
};

SweepReport uniformity_sweep(const SweepConfig& cfg);

}  // namespace hl
