#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "harnacklab/classes.hpp"
#include "harnacklab/contact.hpp"
#include "harnacklab/experiments.hpp"
#include "harnacklab/lattice.hpp"

namespace hl {

using Json = nlohmann::ordered_json;

// Shortest round-trip decimal representation of a double.
std::string format_double(double x);

// Grid-function text format: a header line
//   # dim=<n> h=<h> box=<lo1>,<hi1>,...
// followed by one whitespace-separated "x1 ... xn value" row per node in
// lexicographic node order.
void write_grid_function(const std::string& path, const GridFunction& u);
GridFunction read_grid_function(const std::string& path);

// CSV with a header row; cells are written verbatim.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

void write_text(const std::string& path, const std::string& content);

// ContactSet export: one row per record, columns
// y1..yn, a, c_y, z1..zn, admissible.
void write_contact_csv(const std::string& path, const ContactSet& A, const Lattice& lat);

Json violation_report_json(const ViolationReport& rep, const Lattice& lat);
Json weak_harnack_json(const WeakHarnackReport& rep);
Json oscillation_decay_json(const OscillationDecayReport& rep);
Json coverage_json(const CoverageReport& rep);
Json sweep_json(const SweepReport& rep, bool include_runtime);
Json separation_json(const SeparationReport& rep, int dim);
Json solve_report_json(const SolveReport& rep, bool include_runtime);

}  // namespace hl
