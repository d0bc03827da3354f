#include "harnacklab/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hl {

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw Error("write to '" + path + "' failed");
}

void write_grid_function(const std::string& path, const GridFunction& u) {
    const Lattice& lat = u.lattice();
    std::string s;
    s.reserve(static_cast<std::size_t>(lat.size()) * 24);
    s += "# dim=" + std::to_string(lat.dim()) + " h=" + format_double(lat.spacing()) +
         " box=";
    for (int i = 0; i < lat.dim(); ++i) {
        if (i) s += ",";
        s += format_double(lat.center()[i] - lat.halfwidth()[i]) + "," +
             format_double(lat.center()[i] + lat.halfwidth()[i]);
    }
    s += "\n";
    for (std::int64_t f = 0; f < lat.size(); ++f) {
        const Point p = lat.node(f);
        for (int i = 0; i < lat.dim(); ++i) {
            s += format_double(p[i]);
            s += ' ';
        }
        s += format_double(u[f]);
        s += '\n';
    }
    write_text(path, s);
}

GridFunction read_grid_function(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "' for reading");
    std::string header;
    if (!std::getline(in, header) || header.rfind("# dim=", 0) != 0)
        throw Error("grid file '" + path + "': missing '# dim=...' header");
    int dim = 0;
    double h = 0;
    std::vector<double> bounds;
    {
        std::istringstream hs(header.substr(1));
        std::string tok;
        while (hs >> tok) {
            if (tok.rfind("dim=", 0) == 0) dim = std::stoi(tok.substr(4));
            else if (tok.rfind("h=", 0) == 0) h = std::stod(tok.substr(2));
            else if (tok.rfind("box=", 0) == 0) {
                std::istringstream bs(tok.substr(4));
                std::string cell;
                while (std::getline(bs, cell, ',')) bounds.push_back(std::stod(cell));
            }
        }
    }
    if (dim < 1 || static_cast<int>(bounds.size()) != 2 * dim || !(h > 0))
        throw Error("grid file '" + path + "': malformed header");
    Point center{}, halfwidth{};
    for (int i = 0; i < dim; ++i) {
        center[i] = (bounds[2 * i] + bounds[2 * i + 1]) / 2;
        halfwidth[i] = (bounds[2 * i + 1] - bounds[2 * i]) / 2;
    }
    const Lattice lat = Lattice::build(dim, h, center, halfwidth);
    std::vector<double> values(lat.size());
    double coord;
    for (std::int64_t f = 0; f < lat.size(); ++f) {
        for (int i = 0; i < dim; ++i)
            if (!(in >> coord))
                throw Error("grid file '" + path + "': truncated at node " +
                            std::to_string(f));
        if (!(in >> values[f]))
            throw Error("grid file '" + path + "': truncated at node " +
                        std::to_string(f));
    }
    return GridFunction(lat, std::move(values));
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::string s;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) s += ',';
        s += header[i];
    }
    s += '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) s += ',';
            s += row[i];
        }
        s += '\n';
    }
    write_text(path, s);
}

void write_contact_csv(const std::string& path, const ContactSet& A, const Lattice& lat) {
    const int dim = lat.dim();
    std::vector<std::string> header;
    for (int i = 0; i < dim; ++i) header.push_back("y" + std::to_string(i + 1));
    header.push_back("a");
    header.push_back("c_y");
    for (int i = 0; i < dim; ++i) header.push_back("z" + std::to_string(i + 1));
    header.push_back("admissible");
    std::vector<std::vector<std::string>> rows;
    rows.reserve(A.records.size());
    for (const ContactRecord& rec : A.records) {
        std::vector<std::string> row;
        for (int i = 0; i < dim; ++i) row.push_back(format_double(rec.paraboloid.vertex[i]));
        row.push_back(format_double(rec.paraboloid.opening));
        row.push_back(format_double(rec.paraboloid.offset));
        const Point z = lat.node(rec.contact_node);
        for (int i = 0; i < dim; ++i) row.push_back(format_double(z[i]));
        row.push_back(rec.admissible ? "1" : "0");
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
}

namespace {

Json point_json(const Point& p, int dim) {
    Json a = Json::array();
    for (int i = 0; i < dim; ++i) a.push_back(p[i]);
    return a;
}

}  // namespace

Json violation_report_json(const ViolationReport& rep, const Lattice& lat) {
    Json j;
    j["definition"] = rep.definition;
    j["pass"] = rep.pass;
    if (rep.vacuous) j["vacuous"] = true;
    j["tested"] = rep.tested;
    if (rep.filtered_d > 0) j["filtered_by_d_bound"] = rep.filtered_d;
    Json params;
    params["Lambda"] = rep.params.lambda;
    params["a_lo"] = rep.params.a_lo;
    params["a_hi"] = rep.params.a_hi;
    params["r"] = rep.params.r;
    params["M"] = rep.params.weak_M;
    params["a"] = rep.params.weak_a;
    params["rho"] = rep.params.rho;
    params["delta"] = rep.params.delta;
    params["touch_K"] = rep.params.touch_K;
    j["params"] = params;
    Json ws = Json::array();
    for (const ClassWitness& w : rep.witnesses) {
        Json wj;
        wj["x0"] = point_json(lat.node(w.x0_node), lat.dim());
        if (w.xi_index >= 0) wj["xi_index"] = w.xi_index;
        if (w.b_index >= 0) wj["b_index"] = w.b_index;
        wj["a"] = w.a;
        wj["margin"] = w.margin;
        if (w.fraction >= 0) wj["fraction"] = w.fraction;
        if (w.marginal) wj["marginal"] = true;
        ws.push_back(wj);
    }
    j["witnesses"] = ws;
    return j;
}

Json weak_harnack_json(const WeakHarnackReport& rep) {
    Json j;
    j["threshold_K"] = rep.threshold_K;
    j["fraction"] = rep.fraction;
    j["pass"] = rep.pass;
    j["smallest_K"] = rep.smallest_K;
    j["nodes"] = rep.nodes;
    return j;
}

Json oscillation_decay_json(const OscillationDecayReport& rep) {
    Json j;
    j["levels"] = rep.levels;
    j["radii"] = rep.radii;
    j["osc"] = rep.osc;
    j["ratios"] = rep.ratios;
    j["exponent"] = rep.exponent;
    j["truncated"] = rep.truncated;
    if (rep.degenerate) j["degenerate"] = true;
    j["eta_half"] = rep.eta_half;
    return j;
}

Json coverage_json(const CoverageReport& rep) {
    Json j;
    j["mu"] = rep.mu;
    j["level"] = rep.level;
    j["openings"] = rep.openings;
    j["fractions"] = rep.fractions;
    j["gains"] = rep.gains;
    if (rep.reached_at)
        j["reached_at"] = *rep.reached_at;
    else
        j["reached_at"] = nullptr;
    j["pass"] = rep.pass;
    return j;
}

Json sweep_json(const SweepReport& rep, bool include_runtime) {
    Json j;
    j["family"] = rep.family;
    j["track"] = rep.track;
    Json rows = Json::array();
    for (const SweepRow& r : rep.rows) {
        Json rj;
        rj["value"] = r.value;
        if (r.failed) {
            rj["failed"] = true;
            rj["error"] = r.error;
        } else {
            rj["exponent"] = r.exponent;
            rj["smallest_K"] = r.smallest_K;
            rj["tracked"] = r.tracked;
        }
        rj["runtime_s"] = include_runtime ? r.runtime_s : 0.0;
        rows.push_back(rj);
    }
    j["rows"] = rows;
    j["max_min_ratio"] = rep.max_min_ratio;
    j["ratio_bound"] = rep.ratio_bound;
    j["pass"] = rep.pass;
    return j;
}

Json separation_json(const SeparationReport& rep, int dim) {
    Json j;
    j["min_ratio"] = rep.min_ratio;
    j["max_ratio"] = rep.max_ratio;
    j["pairs_tested"] = rep.pairs_tested;
    j["contacts_used"] = rep.contacts_used;
    j["witness"] = Json{{"y1", point_json(rep.y1, dim)},
                        {"y2", point_json(rep.y2, dim)},
                        {"z1", point_json(rep.z1, dim)},
                        {"z2", point_json(rep.z2, dim)}};
    return j;
}

Json solve_report_json(const SolveReport& rep, bool include_runtime) {
    Json j;
    j["sweeps"] = rep.sweeps;
    j["residual"] = rep.residual;
    j["converged"] = rep.converged;
    j["levels"] = rep.levels;
    if (rep.floored_nodes > 0) {
        j["floored_nodes"] = rep.floored_nodes;
        j["residual_unfloored"] = rep.residual_unfloored;
    }
    if (rep.tail_bound > 0) j["tail_bound"] = rep.tail_bound;
    j["runtime_s"] = include_runtime ? rep.runtime_s : 0.0;
    return j;
}

}  // namespace hl
