#include "harnacklab/classes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

namespace hl {

namespace {

// Punctured-ball offset table around a generic interior node: relative flat
// index, relative coordinates, |v|^2.
struct BallOffsets {
    std::vector<std::int64_t> dflat;
    std::vector<Point> v;
    std::vector<double> v2;
    int margin[kMaxDim] = {0, 0, 0, 0};  // index margin needed per axis
};

BallOffsets ball_offsets(const Lattice& lat, double radius) {
    BallOffsets off;
    const int dim = lat.dim();
    const double h = lat.spacing();
    const int R = static_cast<int>(std::floor(radius / h + 1e-12));
    int iv[kMaxDim] = {0, 0, 0, 0};
    for (int i = 0; i < dim; ++i) {
        iv[i] = -R;
        off.margin[i] = R;
    }
    while (true) {
        Point p{};
        double r2 = 0;
        for (int i = 0; i < dim; ++i) {
            p[i] = iv[i] * h;
            r2 += p[i] * p[i];
        }
        bool zero = true;
        for (int i = 0; i < dim; ++i) zero = zero && iv[i] == 0;
        if (!zero && r2 <= radius * radius * (1 + 1e-14)) {
            std::int64_t df = 0;
            for (int i = 0; i < dim; ++i) df += iv[i] * lat.stride(i);
            off.dflat.push_back(df);
            off.v.push_back(p);
            off.v2.push_back(r2);
        }
        int ax = dim - 1;
        while (ax >= 0) {
            if (++iv[ax] <= R) break;
            iv[ax] = -R;
            --ax;
        }
        if (ax < 0) break;
    }
    return off;
}

// Nodes whose index keeps every offset inside the box and for which
// B_inside(x0) fits in omega.
std::vector<std::int64_t> admissible_centers(const Lattice& lat, const BallOffsets& off,
                                             const Region& omega, double inside_radius) {
    std::vector<std::int64_t> out;
    const int dim = lat.dim();
    int iv[kMaxDim];
    for (std::int64_t f = 0; f < lat.size(); ++f) {
        lat.decode(f, iv);
        bool ok = true;
        for (int i = 0; i < dim && ok; ++i)
            ok = iv[i] >= off.margin[i] && iv[i] < lat.count(i) - off.margin[i];
        if (!ok) continue;
        if (!ball_inside(omega, lat.node(f), inside_radius, dim)) continue;
        out.push_back(f);
    }
    return out;
}

}  // namespace

void ClassParams::validate() const {
    if (!(lambda > 0)) throw Error("class params: Lambda must be positive");
    if (!(a_lo > 0) || !(a_hi >= a_lo))
        throw Error("class params: need 0 < a_lo <= a_hi");
    if (!(delta >= 0 && delta < 1))
        throw Error("class params: delta must lie in [0, 1)");
    if (!(touch_K > 0)) throw Error("class params: touching tolerance factor must be positive");
}

std::vector<Point> direction_sample(int dim, int count) {
    std::vector<Point> out;
    if (dim == 1) {
        out.push_back(point1(1.0));
        return out;
    }
    if (dim == 2) {
        // (x.xi)^2 is even in xi, so half-circle angles suffice.
        const double pi = 3.14159265358979323846;
        for (int k = 0; k < count; ++k) {
            const double th = pi * k / count;
            out.push_back(point2(std::cos(th), std::sin(th)));
        }
        return out;
    }
    // Fibonacci sphere for n >= 3 (extra axes zero for n = 4).
    const double ga = 3.14159265358979323846 * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < count; ++k) {
        const double z = 1.0 - 2.0 * (k + 0.5) / count;
        const double rr = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double th = ga * k;
        Point p{};
        p[0] = rr * std::cos(th);
        p[1] = rr * std::sin(th);
        p[2] = z;
        out.push_back(p);
    }
    return out;
}

std::vector<double> opening_schedule(double a_lo, double a_hi) {
    std::vector<double> out;
    for (double a = a_lo; a <= a_hi * (1 + 1e-12); a *= 2) out.push_back(a);
    if (out.empty() || out.back() < a_hi * (1 - 1e-12)) out.push_back(a_hi);
    return out;
}

ViolationReport check_supersolution_local(const GridFunction& u, const ClassParams& params,
                                          const std::vector<Point>& directions,
                                          const std::vector<double>& openings,
                                          int jobs) {
    params.validate();
    const Lattice& lat = u.lattice();
    const int dim = lat.dim();
    const double h = lat.spacing();
    if (params.r < 2 * h * (1 - 1e-12))
        throw Error("check_supersolution_local: r below 2 lattice spacings "
                    "(neighborhood unresolved)");
    if (directions.empty() || openings.empty())
        throw Error("check_supersolution_local: empty sample");
    u.require_finite("check_supersolution_local");

    const BallOffsets off = ball_offsets(lat, params.r);
    const std::size_t nj = off.dflat.size();

    // (v . xi)^2 per direction and offset.
    std::vector<std::vector<double>> S(directions.size(), std::vector<double>(nj));
    for (std::size_t di = 0; di < directions.size(); ++di)
        for (std::size_t j = 0; j < nj; ++j) {
            const double s = dot(off.v[j], directions[di], dim);
            S[di][j] = s * s;
        }

    const std::vector<std::int64_t> centers =
        admissible_centers(lat, off, params.omega, params.r);

    ViolationReport rep;
    rep.definition = "2.1";
    rep.params = params;

    struct Chunk {
        std::vector<ClassWitness> witnesses;
        std::size_t tested = 0;
        std::size_t filtered = 0;
    };
    std::vector<Chunk> chunks;

    auto run = [&](std::size_t lo, std::size_t hi, Chunk* out) {
        std::vector<double> t(nj), grad_dot(nj);
        for (std::size_t ci = lo; ci < hi; ++ci) {
            const std::int64_t x0 = centers[ci];
            const double u0 = u[x0];
            // Discrete gradient (central differences).
            Point grad{};
            for (int ax = 0; ax < dim; ++ax)
                grad[ax] = (u[x0 + lat.stride(ax)] - u[x0 - lat.stride(ax)]) / (2 * h);
            for (double a : openings) {
                const double tol = params.touch_tol(a, h);
                const double d = u0 / a;
                // Base values u(x0+v) - u(x0) + (a/2)|v|^2.
                for (std::size_t j = 0; j < nj; ++j)
                    t[j] = u[x0 + off.dflat[j]] - u0 + (a / 2) * off.v2[j];
                // b candidates: zero and the gradient-matched one.
                Point bg{};
                for (int ax = 0; ax < dim; ++ax) bg[ax] = grad[ax] / a;
                const double bnorm = norm(bg, dim);
                if (bnorm > 1)
                    for (int ax = 0; ax < dim; ++ax) bg[ax] /= bnorm;
                for (std::size_t j = 0; j < nj; ++j) grad_dot[j] = dot(bg, off.v[j], dim);
                for (int bi = 0; bi < 2; ++bi) {
                    for (std::size_t di = 0; di < directions.size(); ++di) {
                        const double* s = S[di].data();
                        double m = std::numeric_limits<double>::infinity();
                        const double al = a * params.lambda / 2;
                        if (bi == 0) {
                            for (std::size_t j = 0; j < nj; ++j)
                                m = std::min(m, t[j] - al * s[j]);
                        } else {
                            for (std::size_t j = 0; j < nj; ++j)
                                m = std::min(m, t[j] - al * s[j] - a * grad_dot[j]);
                        }
                        ++out->tested;
                        if (m >= -tol) {
                            if (std::abs(d) > 1 + 1e-12) {
                                ++out->filtered;
                                continue;
                            }
                            ClassWitness w;
                            w.x0_node = x0;
                            w.xi_index = static_cast<int>(di);
                            w.b_index = bi;
                            w.a = a;
                            w.margin = m;
                            w.marginal = m <= tol;
                            w.d = d;
                            out->witnesses.push_back(w);
                        }
                    }
                }
            }
        }
    };

    const int nw = std::max(1, std::min<int>(jobs, 16));
    if (nw == 1 || centers.size() < 256) {
        chunks.resize(1);
        run(0, centers.size(), &chunks[0]);
    } else {
        chunks.resize(nw);
        std::vector<std::thread> ws;
        const std::size_t chunk = (centers.size() + nw - 1) / nw;
        for (int w = 0; w < nw; ++w) {
            const std::size_t lo = w * chunk;
            const std::size_t hi = std::min(centers.size(), lo + chunk);
            if (lo < hi) ws.emplace_back(run, lo, hi, &chunks[w]);
        }
        for (auto& t2 : ws) t2.join();
    }
    for (const Chunk& c : chunks) {
        rep.tested += c.tested;
        rep.filtered_d += c.filtered;
        rep.witnesses.insert(rep.witnesses.end(), c.witnesses.begin(), c.witnesses.end());
    }
    rep.vacuous = centers.empty();
    rep.pass = rep.witnesses.empty();
    return rep;
}

ViolationReport check_supersolution_global(const GridFunction& u, const ClassParams& params,
                                           const ContactSet& contact,
                                           const std::vector<Point>& directions) {
    params.validate();
    const Lattice& lat = u.lattice();
    const int dim = lat.dim();
    const double h = lat.spacing();
    if (params.r < 2 * h * (1 - 1e-12))
        throw Error("check_supersolution_global: r below 2 lattice spacings "
                    "(neighborhood unresolved)");
    u.require_finite("check_supersolution_global");
    const double a = contact.opening;
    if (a < params.a_lo * (1 - 1e-12) || a > params.a_hi * (1 + 1e-12))
        throw Error("check_supersolution_global: contact opening outside I");

    ViolationReport rep;
    rep.definition = "2.5";
    rep.params = params;

    const BallOffsets off = ball_offsets(lat, params.r);
    const std::size_t nj = off.dflat.size();
    std::vector<std::vector<double>> S(directions.size(), std::vector<double>(nj));
    for (std::size_t di = 0; di < directions.size(); ++di)
        for (std::size_t j = 0; j < nj; ++j) {
            const double s = dot(off.v[j], directions[di], dim);
            S[di][j] = s * s;
        }

    const double tol = params.touch_tol(a, h);
    int iv[kMaxDim];
    std::vector<double> t(nj);
    for (const ContactRecord& rec : contact.records) {
        if (!rec.admissible) continue;
        const std::int64_t x0 = rec.contact_node;
        lat.decode(x0, iv);
        bool inside = true;
        for (int i = 0; i < dim && inside; ++i)
            inside = iv[i] >= off.margin[i] && iv[i] < lat.count(i) - off.margin[i];
        if (!inside) continue;  // ball around the contact leaves the box
        const Point z = lat.node(x0);

        // The paraboloid stays below u globally by construction; recheck the
        // touching value as a cheap guard.
        const double pz = rec.paraboloid.eval(z, dim);
        if (std::abs(pz - u[x0]) > tol + 1e-12 * std::abs(u[x0])) continue;

        for (std::size_t j = 0; j < nj; ++j) {
            Point x{};
            for (int i = 0; i < dim; ++i) x[i] = z[i] + off.v[j][i];
            t[j] = u[x0 + off.dflat[j]] - rec.paraboloid.eval(x, dim);
        }
        for (std::size_t di = 0; di < directions.size(); ++di) {
            const double al = a * params.lambda / 2;
            double m = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < nj; ++j) m = std::min(m, t[j] - al * S[di][j]);
            ++rep.tested;
            if (m >= -tol) {
                ClassWitness w;
                w.x0_node = x0;
                w.xi_index = static_cast<int>(di);
                w.a = a;
                w.margin = m;
                w.marginal = m <= tol;
                rep.witnesses.push_back(w);
            }
        }
    }
    rep.vacuous = rep.tested == 0;
    rep.pass = rep.witnesses.empty();
    return rep;
}

WeakHarnackResult check_weak_harnack(const GridFunction& u, const ClassParams& params,
                                     WeakHarnackMode mode, const ContactSet* contact) {
    params.validate();
    const Lattice& lat = u.lattice();
    const int dim = lat.dim();
    if (!(params.rho > 0)) throw Error("check_weak_harnack: rho must be positive");
    u.require_finite("check_weak_harnack");
    for (double x : u.values())
        if (x < 0) throw Error("check_weak_harnack: u has negative values "
                               "(class requires u >= 0)");

    const double M = params.weak_M, a = params.weak_a, delta = params.delta;
    const BallOffsets off = ball_offsets(lat, params.rho);
    const std::size_t nj = off.dflat.size();
    const std::size_t ball_count = nj + 1;  // offsets plus the center

    WeakHarnackResult res;
    ViolationReport& rep = res.report;
    rep.definition = mode == WeakHarnackMode::Pointwise ? "2.2" : "2.6";
    rep.params = params;

    const std::size_t need =
        static_cast<std::size_t>(std::ceil((1 - delta) * ball_count - 1e-12));
    std::vector<double> vals(ball_count);

    auto quantile_threshold = [&](std::vector<double>& v) {
        // Smallest threshold whose sublevel set reaches (1-delta) of the ball.
        std::nth_element(v.begin(), v.begin() + (need - 1), v.end());
        return v[need - 1];
    };

    if (mode == WeakHarnackMode::Pointwise) {
        int iv[kMaxDim];
        for (std::int64_t x0 = 0; x0 < lat.size(); ++x0) {
            if (u[x0] > a) continue;
            lat.decode(x0, iv);
            bool inside = true;
            for (int i = 0; i < dim && inside; ++i)
                inside = iv[i] >= off.margin[i] && iv[i] < lat.count(i) - off.margin[i];
            if (!inside) continue;
            if (!ball_inside(params.omega, lat.node(x0), 2 * params.rho, dim)) continue;
            ++rep.tested;
            std::size_t hits = u[x0] <= M * a ? 1 : 0;
            vals[0] = u[x0];
            for (std::size_t j = 0; j < nj; ++j) {
                const double uv = u[x0 + off.dflat[j]];
                vals[j + 1] = uv;
                if (uv <= M * a) ++hits;
            }
            const double frac = static_cast<double>(hits) / ball_count;
            res.smallest_M = std::max(res.smallest_M, quantile_threshold(vals) / a);
            if (frac < 1 - delta) {
                ClassWitness w;
                w.x0_node = x0;
                w.a = a;
                w.fraction = frac;
                w.margin = frac - (1 - delta);
                rep.witnesses.push_back(w);
            }
        }
    } else {
        if (contact == nullptr)
            throw Error("check_weak_harnack: contact mode requires a contact set");
        int iv[kMaxDim];
        for (const ContactRecord& rec : contact->records) {
            if (!rec.admissible) continue;
            const std::int64_t x0 = rec.contact_node;
            lat.decode(x0, iv);
            bool inside = true;
            for (int i = 0; i < dim && inside; ++i)
                inside = iv[i] >= off.margin[i] && iv[i] < lat.count(i) - off.margin[i];
            if (!inside) continue;
            ++rep.tested;
            const Point z = lat.node(x0);
            const double ca = contact->opening;
            std::size_t hits = 0;
            vals[0] = u[x0] - rec.paraboloid.eval(z, dim);
            if (vals[0] <= M * ca) ++hits;
            for (std::size_t j = 0; j < nj; ++j) {
                Point x{};
                for (int i = 0; i < dim; ++i) x[i] = z[i] + off.v[j][i];
                const double dv = u[x0 + off.dflat[j]] - rec.paraboloid.eval(x, dim);
                vals[j + 1] = dv;
                if (dv <= M * ca) ++hits;
            }
            const double frac = static_cast<double>(hits) / ball_count;
            res.smallest_M = std::max(res.smallest_M, quantile_threshold(vals) / ca);
            if (frac < 1 - delta) {
                ClassWitness w;
                w.x0_node = x0;
                w.a = ca;
                w.fraction = frac;
                w.margin = frac - (1 - delta);
                rep.witnesses.push_back(w);
            }
        }
    }
    rep.vacuous = rep.tested == 0;
    rep.pass = rep.witnesses.empty();
    return res;
}

double reevaluate_witness(const GridFunction& u, const ClassParams& params,
                          const std::vector<Point>& directions,
                          const ClassWitness& w) {
    const Lattice& lat = u.lattice();
    const int dim = lat.dim();
    const double h = lat.spacing();
    const BallOffsets off = ball_offsets(lat, params.r);
    const std::int64_t x0 = w.x0_node;
    const double u0 = u[x0];
    const Point xi = directions.at(w.xi_index);
    Point b{};
    if (w.b_index == 1) {
        for (int ax = 0; ax < dim; ++ax)
            b[ax] = (u[x0 + lat.stride(ax)] - u[x0 - lat.stride(ax)]) / (2 * h * w.a);
        const double bn = norm(b, dim);
        if (bn > 1)
            for (int ax = 0; ax < dim; ++ax) b[ax] /= bn;
    }
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < off.dflat.size(); ++j) {
        const double s = dot(off.v[j], xi, dim);
        const double q = (params.lambda / 2) * s * s - 0.5 * off.v2[j] + dot(b, off.v[j], dim);
        m = std::min(m, u[x0 + off.dflat[j]] - u0 - w.a * q);
    }
    return m;
}

}  // namespace hl
