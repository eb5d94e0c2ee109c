#pragma once

// Finite hypercubic lattices at dyadic refinement levels: edge/plaquette
// enumeration, one-plaquette subdivision, configuration projection, and the
// coarse/fine marginal-consistency verifiers for the heat-kernel plaquette
// density.

#include <array>
#include <cstdint>
#include <map>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "heatgauge/heat_kernel.hpp"

namespace heatgauge {

enum class Boundary { Open, Periodic };

struct LatticeSpec {
    int dim = 2;
    std::vector<int> extents;  // sites per axis
    int level = 0;             // edge length 1/2^level
    Boundary boundary = Boundary::Open;
};

// Four edge ids with orientation flags, ordered so the holonomy is
// h1 h2 h3^-1 h4^-1 around the square based at its lower-left corner.
struct PlaquetteRef {
    std::array<int, 4> edges{};
    std::array<int, 4> signs{+1, +1, -1, -1};
    int site = 0;  // base corner
    int axis_a = 0, axis_b = 1;
};

struct Lattice {
    LatticeSpec spec;
    int64_t n_sites = 0;
    std::vector<std::array<int, 2>> edges;  // (site, axis), lexicographic
    std::vector<PlaquetteRef> plaquettes;
    std::vector<int> edge_at;  // n_sites*dim lookup, -1 where absent

    std::vector<int> coords(int64_t site) const {
        std::vector<int> x(spec.dim);
        for (int a = 0; a < spec.dim; ++a) {
            x[a] = int(site % spec.extents[a]);
            site /= spec.extents[a];
        }
        return x;
    }
    int64_t site_index(const std::vector<int>& x) const {
        int64_t idx = 0, stride = 1;
        for (int a = 0; a < spec.dim; ++a) {
            int c = x[a] % spec.extents[a];
            if (c < 0) c += spec.extents[a];
            idx += c * stride;
            stride *= spec.extents[a];
        }
        return idx;
    }
    int64_t neighbour(int64_t site, int axis) const {
        auto x = coords(site);
        x[axis] += 1;
        return site_index(x);
    }
    int edge_id(int64_t site, int axis) const { return edge_at[site * spec.dim + axis]; }
};

inline Lattice build(const LatticeSpec& spec) {
    if (spec.dim < 2 || spec.dim > 4) throw std::invalid_argument("dim must be 2..4");
    if (int(spec.extents.size()) != spec.dim)
        throw std::invalid_argument("extents size must equal dim");
    Lattice lat;
    lat.spec = spec;
    int64_t n = 1;
    for (int a = 0; a < spec.dim; ++a) {
        if (spec.extents[a] < 2) throw std::invalid_argument("extents must be >= 2");
        n *= spec.extents[a];
        if (n * spec.dim > (int64_t(1) << 31)) throw std::overflow_error("index space overflow");
    }
    lat.n_sites = n;
    lat.edge_at.assign(n * spec.dim, -1);

    auto forward_ok = [&](const std::vector<int>& x, int axis) {
        return spec.boundary == Boundary::Periodic || x[axis] + 1 < spec.extents[axis];
    };

    for (int64_t s = 0; s < n; ++s) {
        auto x = lat.coords(s);
        for (int a = 0; a < spec.dim; ++a) {
            if (!forward_ok(x, a)) continue;
            lat.edge_at[s * spec.dim + a] = int(lat.edges.size());
            lat.edges.push_back({int(s), a});
        }
    }
    for (int64_t s = 0; s < n; ++s) {
        auto x = lat.coords(s);
        for (int a = 0; a < spec.dim; ++a) {
            for (int b = a + 1; b < spec.dim; ++b) {
                if (!forward_ok(x, a) || !forward_ok(x, b)) continue;
                PlaquetteRef p;
                p.site = int(s);
                p.axis_a = a;
                p.axis_b = b;
                p.edges[0] = lat.edge_id(s, a);
                p.edges[1] = lat.edge_id(lat.neighbour(s, a), b);
                p.edges[2] = lat.edge_id(lat.neighbour(s, b), a);
                p.edges[3] = lat.edge_id(s, b);
                for (int e : p.edges)
                    if (e < 0) throw std::logic_error("plaquette references missing edge");
                lat.plaquettes.push_back(p);
            }
        }
    }
    return lat;
}

using FieldConfig = std::vector<GroupElement>;

inline FieldConfig identity_config(const Lattice& lat, GroupKind kind) {
    return FieldConfig(lat.edges.size(), identity(kind));
}

inline GroupElement plaquette_product(const FieldConfig& config, const PlaquetteRef& p) {
    if (config.empty()) throw std::invalid_argument("empty configuration");
    for (int e : p.edges)
        if (e < 0 || size_t(e) >= config.size())
            throw std::out_of_range("plaquette edge outside configuration");
    auto u = multiply(config[p.edges[0]], config[p.edges[1]]);
    u = multiply(u, inverse(config[p.edges[2]]));
    return multiply(u, inverse(config[p.edges[3]]));
}

// ---------------------------------------------------------------------------
// Configuration projection between dyadic refinement levels.

inline LatticeSpec refine_spec(const LatticeSpec& coarse) {
    LatticeSpec fine = coarse;
    fine.level = coarse.level + 1;
    for (int a = 0; a < coarse.dim; ++a)
        fine.extents[a] = coarse.boundary == Boundary::Open ? 2 * coarse.extents[a] - 1
                                                            : 2 * coarse.extents[a];
    return fine;
}

// Each coarse edge holonomy is the ordered product of its two fine halves.
inline FieldConfig project_config(const Lattice& fine, const FieldConfig& config,
                                  const Lattice& coarse) {
    auto expect = refine_spec(coarse.spec);
    if (fine.spec.dim != expect.dim || fine.spec.extents != expect.extents ||
        fine.spec.level != expect.level ||
        (fine.spec.boundary != coarse.spec.boundary))
        throw std::invalid_argument("fine lattice is not the one-step refinement");
    if (config.size() != fine.edges.size())
        throw std::invalid_argument("configuration does not cover the fine lattice");

    FieldConfig out;
    out.reserve(coarse.edges.size());
    for (const auto& [site, axis] : coarse.edges) {
        auto x = coarse.coords(site);
        for (auto& c : x) c *= 2;
        int64_t fs = fine.site_index(x);
        int e1 = fine.edge_id(fs, axis);
        int e2 = fine.edge_id(fine.neighbour(fs, axis), axis);
        if (e1 < 0 || e2 < 0) throw std::logic_error("refinement alignment mismatch");
        out.push_back(multiply(config[e1], config[e2]));
    }
    return out;
}

// Canonical section: put each coarse holonomy on the first fine half-edge.
inline FieldConfig lift_config(const Lattice& coarse, const FieldConfig& config,
                               const Lattice& fine, GroupKind kind) {
    FieldConfig out = identity_config(fine, kind);
    for (size_t i = 0; i < coarse.edges.size(); ++i) {
        auto [site, axis] = coarse.edges[i];
        auto x = coarse.coords(site);
        for (auto& c : x) c *= 2;
        out[fine.edge_id(fine.site_index(x), axis)] = config[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Free-group words over named symbols, for the subdivision identity.

struct Sym {
    std::string name;
    int exp = 1;  // +1 or -1
    bool operator==(const Sym& o) const { return name == o.name && exp == o.exp; }
};
using Word = std::vector<Sym>;

inline Word make_word(std::initializer_list<Sym> syms) { return Word(syms); }

inline Word inverse_word(const Word& w) {
    Word out;
    out.reserve(w.size());
    for (auto it = w.rbegin(); it != w.rend(); ++it) out.push_back({it->name, -it->exp});
    return out;
}

inline Word free_reduce(Word w) {
    Word out;
    for (const auto& s : w) {
        if (!out.empty() && out.back().name == s.name && out.back().exp == -s.exp)
            out.pop_back();
        else
            out.push_back(s);
    }
    if (out.size() == w.size()) return out;
    return free_reduce(std::move(out));
}

// Strip conjugation: a w a^-1 -> w (valid inside any central/class function).
inline Word cyclic_reduce(Word w) {
    w = free_reduce(std::move(w));
    while (w.size() >= 2 && w.front().name == w.back().name &&
           w.front().exp == -w.back().exp) {
        w.erase(w.begin());
        w.pop_back();
        w = free_reduce(std::move(w));
    }
    return w;
}

inline Word rotate_word(const Word& w, size_t k) {
    Word out;
    for (size_t i = 0; i < w.size(); ++i) out.push_back(w[(i + k) % w.size()]);
    return out;
}

inline bool cyclically_equal(const Word& a, const Word& b) {
    Word ra = cyclic_reduce(a), rb = cyclic_reduce(b);
    if (ra.size() != rb.size()) return false;
    if (ra.empty()) return true;
    for (size_t k = 0; k < ra.size(); ++k)
        if (rotate_word(ra, k) == rb) return true;
    return false;
}

// Replace every occurrence of `name` (and its inverse) by `replacement`.
inline Word substitute(const Word& w, const std::string& name, const Word& replacement) {
    Word out;
    for (const auto& s : w) {
        if (s.name != name) {
            out.push_back(s);
        } else if (s.exp == 1) {
            out.insert(out.end(), replacement.begin(), replacement.end());
        } else {
            auto inv = inverse_word(replacement);
            out.insert(out.end(), inv.begin(), inv.end());
        }
    }
    return free_reduce(std::move(out));
}

inline std::string word_to_string(const Word& w) {
    std::string s;
    for (const auto& t : w) {
        if (!s.empty()) s += ' ';
        s += t.name;
        if (t.exp == -1) s += "^-1";
    }
    return s;
}

// ---------------------------------------------------------------------------
// One-plaquette subdivision: boundary half-edges g1..g4, interior edges
// y1..y4, coarse boundary holonomies G1..G4, eight transverse slots T1..T8.

struct SubdivisionPattern {
    std::array<Word, 4> sub_loops;
    Word outer_loop;
    std::vector<std::string> transverse;
};

inline SubdivisionPattern refine_plaquette(const PlaquetteRef& p) {
    for (int e : p.edges)
        if (e < 0) throw std::invalid_argument("invalid plaquette");
    SubdivisionPattern pat;
    auto S = [](const char* n, int e = 1) { return Sym{n, e}; };
    pat.sub_loops[0] = {S("g1", -1), S("G1"), S("g2"), S("y2", -1), S("y1", -1)};
    pat.sub_loops[1] = {S("y2"), S("g2", -1), S("G2"), S("g3", -1), S("y3", -1)};
    pat.sub_loops[2] = {S("y4"), S("y3"), S("g3"), S("G3", -1), S("g4", -1)};
    pat.sub_loops[3] = {S("g1"), S("y1"), S("y4", -1), S("g4"), S("G4", -1)};
    pat.outer_loop = {S("G1"), S("G2"), S("G3", -1), S("G4", -1)};
    for (int k = 1; k <= 8; ++k) pat.transverse.push_back("T" + std::to_string(k));
    return pat;
}

// The four sub-loops, each rotated to the common base point, telescope to the
// outer loop. Rotations are searched, so the check is purely structural.
inline bool subdivision_telescopes(const SubdivisionPattern& pat) {
    const auto& L = pat.sub_loops;
    for (size_t k0 = 0; k0 < L[0].size(); ++k0)
        for (size_t k1 = 0; k1 < L[1].size(); ++k1)
            for (size_t k2 = 0; k2 < L[2].size(); ++k2)
                for (size_t k3 = 0; k3 < L[3].size(); ++k3) {
                    Word prod = rotate_word(L[0], k0);
                    for (auto [w, k] : {std::pair{&L[1], k1}, {&L[2], k2}, {&L[3], k3}}) {
                        auto r = rotate_word(*w, k);
                        prod.insert(prod.end(), r.begin(), r.end());
                    }
                    if (cyclically_equal(prod, pat.outer_loop)) return true;
                }
    return false;
}

// ---------------------------------------------------------------------------
// Marginal-consistency verifiers: the fine-lattice density at beta/4,
// integrated over the subdivision's internal variables, reproduces the
// coarse density at beta.

// Exact route: (a) symbolic cancellation — substituting X1 = g1 y1,
// X2 = g2 y2^-1, X3^-1 = y3 g3, X4^-1 = y4^-1 g4 turns the four sub-loop
// words into X_i^-1 G_i^(+/-1) X_(i+1); (b) the four-fold character-basis
// convolution of the beta/4 kernel then equals the beta kernel coefficient
// by coefficient; (c) transverse factors integrate to 1 by normalization.
inline double consistency_check_exact(GroupKind kind, double beta) {
    if (beta <= 0) throw std::invalid_argument("beta must be positive");
    PlaquetteRef p;
    p.edges = {0, 1, 2, 3};
    auto pat = refine_plaquette(p);

    auto S = [](const char* n, int e = 1) { return Sym{n, e}; };
    const std::array<std::pair<std::string, Word>, 4> subs = {{
        {"y1", {S("g1", -1), S("X1")}},   // X1 = g1 y1
        {"y2", {S("X2", -1), S("g2")}},   // X2 = g2 y2^-1
        {"y3", {S("X3", -1), S("g3", -1)}},  // X3^-1 = y3 g3
        {"y4", {S("g4"), S("X4")}},       // X4^-1 = y4^-1 g4
    }};
    const std::array<Word, 4> targets = {{
        {S("X1", -1), S("G1"), S("X2")},
        {S("X2", -1), S("G2"), S("X3")},
        {S("X3", -1), S("G3", -1), S("X4")},
        {S("X4", -1), S("G4", -1), S("X1")},
    }};
    for (int i = 0; i < 4; ++i) {
        Word w = pat.sub_loops[i];
        for (const auto& [name, rep] : subs) w = substitute(w, name, rep);
        if (!cyclically_equal(w, targets[i]))
            throw std::logic_error("subdivision word did not reduce to the chain form");
    }
    // Each transverse slot must appear exactly once (one factor each).
    std::map<std::string, int> seen;
    for (const auto& t : pat.transverse) seen[t] += 1;
    if (seen.size() != 8)
        throw std::logic_error("expected eight distinct transverse slots");
    for (const auto& [t, cnt] : seen)
        if (cnt != 1) throw std::logic_error("transverse slot repeated");

    double residual = 0.0;

    // Transverse factor: the normalized kernel at beta/4 integrates to 1.
    auto pq = make_heat_kernel_params(kind, beta / 4, 1e-14);
    auto rule = class_quadrature(kind, 4 * (pq.cutoff + 4));
    double total = 0.0;
    for (size_t i = 0; i < rule.nodes.size(); ++i)
        total += rule.weights[i] * eval(rule.nodes[i], pq);
    residual = std::max(residual, std::abs(total - 1.0));

    // Chain convolution: four beta/4 kernels collapse to one beta kernel.
    auto quarter = heat_kernel_coeffs(pq);
    auto conv = convolve_coeffs(convolve_coeffs(quarter, quarter),
                                convolve_coeffs(quarter, quarter));
    auto target = heat_kernel_coeffs(make_heat_kernel_params(kind, beta, 1e-14));
    for (const auto& [l, c] : target.c) {
        auto it = conv.c.find(l);
        double got = it == conv.c.end() ? 0.0 : it->second.real();
        residual = std::max(residual, std::abs(got - c.real()));
    }
    for (const auto& [l, c] : conv.c)
        if (!target.c.count(l)) residual = std::max(residual, std::abs(c.real()));
    return residual;
}

struct McConsistencyResult {
    std::vector<double> ratios;   // one per boundary assignment
    std::vector<double> stderrs;
    double max_deviation_sigma = 0.0;  // max |ratio - 1| / stderr
};

namespace detail {

// Samples group elements whose class distribution approximates K(., beta),
// with an exactly evaluable density w.r.t. normalized Haar measure (so
// importance weights are unbiased regardless of approximation quality).
struct KernelProposal {
    GroupKind kind;
    double beta;
    // piecewise-linear class density on a uniform psi grid (UnitQuaternion)
    int m = 0;
    double dpsi = 0.0, z = 1.0;
    std::vector<double> f, cdf;

    KernelProposal(GroupKind k, double b, int grid = 4096) : kind(k), beta(b) {
        if (kind == GroupKind::Circle) return;  // exact wrapped normal
        m = grid;
        dpsi = 2 * pi / m;
        f.assign(m + 1, 0.0);
        for (int j = 1; j < m; ++j) {
            double psi = j * dpsi;
            double s = std::sin(psi / 2);
            f[j] = std::exp(su2_theta_log(psi, beta)) * s * s / pi;
        }
        cdf.assign(m + 1, 0.0);
        for (int j = 0; j < m; ++j) cdf[j + 1] = cdf[j] + 0.5 * (f[j] + f[j + 1]) * dpsi;
        z = cdf[m];
        for (auto& c : cdf) c /= z;
    }

    GroupElement sample(std::mt19937_64& rng) const {
        if (kind == GroupKind::Circle) {
            std::normal_distribution<double> n(0.0, std::sqrt(2 * beta));
            return GroupElement::circle(n(rng));
        }
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        double u = uni(rng);
        int j = int(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin()) - 1;
        j = std::clamp(j, 0, m - 1);
        // invert the linear density a + (b-a) t/dpsi on the segment
        double a = f[j], b = f[j + 1];
        double mass = 0.5 * (a + b) * dpsi;
        double r = (u - cdf[j]) * z;  // un-normalized mass inside segment
        double t;
        if (std::abs(b - a) < 1e-300 * mass)
            t = r / std::max(a, 1e-300);
        else {
            double slope = (b - a) / dpsi;
            t = (-a + std::sqrt(a * a + 2 * slope * r)) / slope;
        }
        double psi = std::clamp(j * dpsi + t, 1e-8, 2 * pi - 1e-8);
        // uniform conjugation orbit: random rotation axis
        std::normal_distribution<double> n(0.0, 1.0);
        double x = n(rng), y = n(rng), w = n(rng);
        double norm = std::sqrt(x * x + y * y + w * w);
        double s = std::sin(psi / 2) / norm;
        return GroupElement::quaternion(std::cos(psi / 2), s * x, s * y, s * w);
    }

    double log_density(const GroupElement& g) const {  // w.r.t. normalized Haar
        if (kind == GroupKind::Circle) return circle_wrapped_log(g.angle, beta);
        double psi = std::clamp(class_angle(g), 1e-8, 2 * pi - 1e-8);
        int j = std::clamp(int(psi / dpsi), 0, m - 1);
        double t = psi - j * dpsi;
        double fh = (f[j] + (f[j + 1] - f[j]) * t / dpsi) / z;
        double s = std::sin(psi / 2);
        return std::log(fh) - std::log(s * s / pi);
    }
};

}  // namespace detail

inline GroupElement eval_word(const Word& w,
                              const std::map<std::string, GroupElement>& values,
                              GroupKind kind) {
    auto g = identity(kind);
    for (const auto& s : w) {
        auto it = values.find(s.name);
        if (it == values.end()) throw std::invalid_argument("unbound symbol " + s.name);
        g = multiply(g, s.exp == 1 ? it->second : inverse(it->second));
    }
    return g;
}

// Monte Carlo form of the same identity: with the coarse boundary holonomies
// held fixed, the Haar average over the internal half-edge and interior
// variables of the four beta/4 factors equals K(G1 G2 G3^-1 G4^-1, beta).
// The internal variables are importance-sampled: the interior edges are
// driven so that three of the four sub-plaquette holonomies are draws from a
// proposal close to the beta/4 kernel (with exactly known density), which
// keeps the weights bounded. The estimator stays an unbiased Monte Carlo of
// the original integral — the four evaluated factors are the literal
// sub-loop words, not their reduced forms.
inline McConsistencyResult consistency_check_mc(GroupKind kind, double beta,
                                                int64_t n_samples, std::mt19937_64& rng,
                                                int n_boundaries = 10) {
    if (n_samples < 10000) throw std::invalid_argument("need n_samples >= 1e4");
    PlaquetteRef pref;
    pref.edges = {0, 1, 2, 3};
    auto pat = refine_plaquette(pref);
    const double bq = beta / 4;
    detail::KernelProposal prop(kind, bq);
    auto logk = [&](const GroupElement& g, double b) {
        double d = cc_distance(g);
        if (kind == GroupKind::UnitQuaternion) d = std::min(d, 2 * pi - 1e-9);
        return stable_log_eval(kind, d, b);
    };

    McConsistencyResult res;
    for (int b = 0; b < n_boundaries; ++b) {
        std::map<std::string, GroupElement> vals;
        for (int i = 1; i <= 4; ++i) {
            // first assignment: identity boundary (known-value control)
            vals["G" + std::to_string(i)] =
                b == 0 ? identity(kind) : haar_sample(kind, rng);
        }
        auto outer = multiply(multiply(vals["G1"], vals["G2"]),
                              multiply(inverse(vals["G3"]), inverse(vals["G4"])));
        double log_denom = logk(outer, beta);

        double sum = 0.0, sum2 = 0.0;
        for (int64_t s = 0; s < n_samples; ++s) {
            for (int i = 1; i <= 4; ++i)
                vals["g" + std::to_string(i)] = haar_sample(kind, rng);
            vals["y1"] = haar_sample(kind, rng);
            auto x1 = multiply(vals["g1"], vals["y1"]);
            auto h2 = prop.sample(rng), h3 = prop.sample(rng), h4 = prop.sample(rng);
            auto x2 = multiply(multiply(inverse(vals["G1"]), x1), h2);
            auto x3 = multiply(multiply(inverse(vals["G2"]), x2), h3);
            auto x4 = multiply(multiply(vals["G3"], x3), h4);
            vals["y2"] = multiply(inverse(x2), vals["g2"]);
            vals["y3"] = multiply(inverse(x3), inverse(vals["g3"]));
            vals["y4"] = multiply(vals["g4"], x4);

            double logw = -prop.log_density(h2) - prop.log_density(h3) -
                          prop.log_density(h4) - log_denom;
            for (const auto& w : pat.sub_loops) logw += logk(eval_word(w, vals, kind), bq);
            double r = std::exp(logw);
            sum += r;
            sum2 += r * r;
        }
        double mean = sum / n_samples;
        double var = (sum2 / n_samples - mean * mean) / (n_samples - 1.0);
        double se = std::sqrt(std::max(var, 0.0));
        if (se <= 0) throw std::runtime_error("degenerate variance in consistency MC");
        res.ratios.push_back(mean);
        res.stderrs.push_back(se);
        res.max_deviation_sigma =
            std::max(res.max_deviation_sigma, std::abs(mean - 1.0) / se);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Plain-text description export.

inline void write_edges_csv(const Lattice& lat, std::ostream& os) {
    os << "edge_id,site,axis\n";
    for (size_t i = 0; i < lat.edges.size(); ++i)
        os << i << ',' << lat.edges[i][0] << ',' << lat.edges[i][1] << '\n';
}

inline void write_plaquettes_csv(const Lattice& lat, std::ostream& os) {
    os << "plaquette_id,e1,e2,e3,e4,signs\n";
    for (size_t i = 0; i < lat.plaquettes.size(); ++i) {
        const auto& p = lat.plaquettes[i];
        os << i << ',' << p.edges[0] << ',' << p.edges[1] << ',' << p.edges[2] << ','
           << p.edges[3] << ",++--\n";
    }
}

}  // namespace heatgauge
