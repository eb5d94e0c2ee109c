#pragma once

// Metropolis sampling of the heat-kernel plaquette measure and Euclidean
// observables: plaquette averages, Wilson loops (with the exact 2D value),
// temporal correlators and a correlator-based mass-gap fit.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

#include "heatgauge/lattice.hpp"

namespace heatgauge {

struct MCParams {
    double beta = 1.0;
    int n_therm = 500;
    int n_measure = 2000;
    int measure_every = 2;
    double proposal_width = 0.8;
    uint64_t seed = 1;
    int n_chains = 1;
};

// Stable ln K for any class element and beta (safe where the character
// series cancels catastrophically).
inline double log_kernel(GroupKind kind, const GroupElement& g, double beta) {
    double d = cc_distance(g);
    if (kind == GroupKind::UnitQuaternion) d = std::min(d, 2 * pi - 1e-9);
    return stable_log_eval(kind, d, beta);
}

inline double action(const Lattice& lat, const FieldConfig& config, GroupKind kind,
                     double beta) {
    double s = 0.0;
    for (const auto& p : lat.plaquettes)
        s -= log_kernel(kind, plaquette_product(config, p), beta);
    return s;
}

// ---------------------------------------------------------------------------
// Jackknife error analysis.

struct ObservableSeries {
    std::vector<double> values;
    int n_blocks = 20;
    double mean = 0.0;
    double stderr_ = 0.0;
};

inline ObservableSeries jackknife(const std::vector<double>& values, int n_blocks = 20) {
    if (n_blocks < 20) throw std::invalid_argument("need >= 20 jackknife blocks");
    if (int(values.size()) < 2 * n_blocks)
        throw std::invalid_argument("too few measurements for jackknife");
    ObservableSeries s;
    s.values = values;
    s.n_blocks = n_blocks;
    int64_t n = values.size(), per = n / n_blocks;
    double total = 0.0;
    for (double v : values) total += v;
    s.mean = total / n;
    double ss = 0.0;
    for (int b = 0; b < n_blocks; ++b) {
        double blk = 0.0;
        int64_t lo = b * per, hi = (b == n_blocks - 1) ? n : lo + per;
        for (int64_t i = lo; i < hi; ++i) blk += values[i];
        double loo = (total - blk) / (n - (hi - lo));
        ss += (loo - s.mean) * (loo - s.mean);
    }
    s.stderr_ = std::sqrt((n_blocks - 1.0) / n_blocks * ss);
    return s;
}

// Jackknife of a nonlinear function of several per-measurement quantities.
// rows: one vector per measurement; f maps the component means to the
// estimate.
inline std::pair<double, double> jackknife_fn(
    const std::vector<std::vector<double>>& rows,
    const std::function<double(const std::vector<double>&)>& f, int n_blocks = 20) {
    int64_t n = rows.size();
    if (n < 2 * n_blocks) throw std::invalid_argument("too few measurements for jackknife");
    size_t dim = rows[0].size();
    std::vector<double> total(dim, 0.0);
    for (const auto& r : rows)
        for (size_t j = 0; j < dim; ++j) total[j] += r[j];
    std::vector<double> meanv(dim);
    for (size_t j = 0; j < dim; ++j) meanv[j] = total[j] / n;
    double est = f(meanv);

    int64_t per = n / n_blocks;
    double ss = 0.0;
    for (int b = 0; b < n_blocks; ++b) {
        int64_t lo = b * per, hi = (b == n_blocks - 1) ? n : lo + per;
        std::vector<double> loo(dim);
        for (size_t j = 0; j < dim; ++j) loo[j] = total[j];
        for (int64_t i = lo; i < hi; ++i)
            for (size_t j = 0; j < dim; ++j) loo[j] -= rows[i][j];
        for (size_t j = 0; j < dim; ++j) loo[j] /= (n - (hi - lo));
        double fi = f(loo);
        ss += (fi - est) * (fi - est);
    }
    return {est, std::sqrt((n_blocks - 1.0) / n_blocks * ss)};
}

// ---------------------------------------------------------------------------
// Single-edge Metropolis with left-multiplication proposals.

class MetropolisSampler {
  public:
    MetropolisSampler(const Lattice& lat, GroupKind kind, const MCParams& params,
                      uint64_t seed)
        : lat_(lat),
          kind_(kind),
          beta_(params.beta),
          width_(params.proposal_width),
          rng_(seed),
          config_(identity_config(lat, kind)) {
        plaq_of_edge_.resize(lat.edges.size());
        for (size_t p = 0; p < lat.plaquettes.size(); ++p)
            for (int e : lat.plaquettes[p].edges) plaq_of_edge_[e].push_back(int(p));
    }

    GroupElement propose() {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        if (kind_ == GroupKind::Circle) return GroupElement::circle(width_ * u(rng_));
        std::vector<double> v{width_ * u(rng_), width_ * u(rng_), width_ * u(rng_)};
        return exp_coordinates(kind_, v);
    }

    // Local action difference for replacing edge e by r * U_e.
    double delta_action(int e, const GroupElement& r) const {
        double d = 0.0;
        FieldConfig& cfg = const_cast<FieldConfig&>(config_);
        GroupElement old = cfg[e];
        for (int p : plaq_of_edge_[e])
            d += log_kernel(kind_, plaquette_product(cfg, lat_.plaquettes[p]), beta_);
        cfg[e] = multiply(r, old);
        for (int p : plaq_of_edge_[e])
            d -= log_kernel(kind_, plaquette_product(cfg, lat_.plaquettes[p]), beta_);
        cfg[e] = old;
        return d;
    }

    double sweep() {
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        int64_t accepted = 0;
        for (size_t e = 0; e < config_.size(); ++e) {
            auto r = propose();
            double dS = delta_action(int(e), r);
            if (dS <= 0 || uni(rng_) < std::exp(-dS)) {
                config_[e] = multiply(r, config_[e]);
                ++accepted;
            }
        }
        return double(accepted) / config_.size();
    }

    // Auto-tunes the proposal width into the [0.2, 0.8] acceptance band;
    // the width is frozen once thermalization ends.
    void thermalize(int n_sweeps) {
        for (int i = 0; i < n_sweeps; ++i) {
            double acc = sweep();
            if (acc > 0.8)
                width_ = std::min(width_ * 1.15, kind_ == GroupKind::Circle ? pi : 2.0);
            else if (acc < 0.2)
                width_ = std::max(width_ * 0.85, 1e-3);
        }
    }

    double full_action() const { return action(lat_, config_, kind_, beta_); }
    const FieldConfig& config() const { return config_; }
    FieldConfig& mutable_config() { return config_; }
    double width() const { return width_; }
    GroupKind kind() const { return kind_; }

  private:
    const Lattice& lat_;
    GroupKind kind_;
    double beta_;
    double width_;
    std::mt19937_64 rng_;
    FieldConfig config_;
    std::vector<std::vector<int>> plaq_of_edge_;
};

inline FieldConfig gauge_transform(const Lattice& lat, const FieldConfig& config,
                                   const std::vector<GroupElement>& site_elems) {
    FieldConfig out = config;
    for (size_t e = 0; e < lat.edges.size(); ++e) {
        auto [s, a] = lat.edges[e];
        out[e] = multiply(multiply(site_elems[s], config[e]),
                          inverse(site_elems[lat.neighbour(s, a)]));
    }
    return out;
}

// Runs n_chains independent chains (seed stream = seed + chain index) and
// merges the per-measurement rows in chain order. `measure` maps a
// configuration to one row of observables.
inline std::vector<std::vector<double>> run_chains(
    const Lattice& lat, GroupKind kind, const MCParams& params,
    const std::function<std::vector<double>(const FieldConfig&)>& measure) {
    int nc = std::max(params.n_chains, 1);
    std::vector<std::vector<std::vector<double>>> per_chain(nc);
    auto run_one = [&](int c) {
        MetropolisSampler s(lat, kind, params, params.seed + uint64_t(c));
        s.thermalize(params.n_therm);
        auto& rows = per_chain[c];
        rows.reserve(params.n_measure);
        for (int i = 0; i < params.n_measure; ++i) {
            for (int k = 0; k < params.measure_every; ++k) s.sweep();
            rows.push_back(measure(s.config()));
        }
    };
    if (nc == 1) {
        run_one(0);
    } else {
        std::vector<std::thread> threads;
        for (int c = 0; c < nc; ++c) threads.emplace_back(run_one, c);
        for (auto& t : threads) t.join();
    }
    std::vector<std::vector<double>> rows;
    for (const auto& chain : per_chain) rows.insert(rows.end(), chain.begin(), chain.end());
    return rows;
}

// ---------------------------------------------------------------------------
// Wilson loops.

// Holonomy around an R x T rectangle in the (axis_a, axis_b) plane based at
// `site`, following positive-orientation edges.
inline GroupElement rectangle_product(const Lattice& lat, const FieldConfig& config,
                                      int64_t site, int axis_a, int axis_b, int R, int T) {
    auto kind = config.at(0).kind;
    auto u = identity(kind);
    int64_t s = site;
    auto step = [&](int axis, bool fwd) {
        if (fwd) {
            int e = lat.edge_id(s, axis);
            if (e < 0) throw std::invalid_argument("loop does not fit the lattice");
            u = multiply(u, config[e]);
            s = lat.neighbour(s, axis);
        } else {
            auto x = lat.coords(s);
            x[axis] -= 1;
            if (x[axis] < 0 && lat.spec.boundary == Boundary::Open)
                throw std::invalid_argument("loop does not fit the lattice");
            int64_t prev = lat.site_index(x);
            int e = lat.edge_id(prev, axis);
            if (e < 0) throw std::invalid_argument("loop does not fit the lattice");
            u = multiply(u, inverse(config[e]));
            s = prev;
        }
    };
    for (int i = 0; i < R; ++i) step(axis_a, true);
    for (int i = 0; i < T; ++i) step(axis_b, true);
    for (int i = 0; i < R; ++i) step(axis_a, false);
    for (int i = 0; i < T; ++i) step(axis_b, false);
    return u;
}

// Normalized real character of the loop, averaged over all placements in the
// (0,1) plane.
inline double wilson_observable(const Lattice& lat, const FieldConfig& config, int R,
                                int T, const Irrep& rep) {
    double sum = 0.0;
    int64_t count = 0;
    for (int64_t s = 0; s < lat.n_sites; ++s) {
        auto x = lat.coords(s);
        if (lat.spec.boundary == Boundary::Open &&
            (x[0] + R >= lat.spec.extents[0] || x[1] + T >= lat.spec.extents[1]))
            continue;
        auto u = rectangle_product(lat, config, s, 0, 1, R, T);
        sum += character(rep, u).real() / rep.dimension();
        ++count;
    }
    if (count == 0) throw std::invalid_argument("loop does not fit the lattice");
    return sum / count;
}

inline ObservableSeries expectation_wilson(const Lattice& lat, GroupKind kind,
                                           const MCParams& params, int R, int T,
                                           const Irrep& rep) {
    auto rows = run_chains(lat, kind, params, [&](const FieldConfig& cfg) {
        return std::vector<double>{wilson_observable(lat, cfg, R, T, rep)};
    });
    std::vector<double> vals;
    vals.reserve(rows.size());
    for (const auto& r : rows) vals.push_back(r[0]);
    return jackknife(vals);
}

// On a 2D open lattice the plaquette kernels merge under character-basis
// convolution, so the loop expectation is exactly exp(-c(rep) * beta * area).
inline double exact_2d_wilson(const Irrep& rep, double area, double beta) {
    return std::exp(-rep.casimir() * beta * area);
}

// ---------------------------------------------------------------------------
// Temporal correlator of the plaquette operator and mass-gap fit.

struct CorrelatorResult {
    std::vector<double> C;       // t = 0 .. t_max
    std::vector<double> stderr_;
};

// Connected correlator of O(t) = (1/d) Re chi_fund(U_p(t)) with the
// plaquette in the first two axes at spatial origin, averaged over time
// translations. The last axis is time.
inline CorrelatorResult temporal_correlator(const Lattice& lat, GroupKind kind,
                                            const MCParams& params, int t_max) {
    int taxis = lat.spec.dim - 1;
    int nt = lat.spec.extents[taxis];
    if (nt < 2 * t_max) throw std::invalid_argument("time extent must be >= 2 t_max");
    Irrep rep = kind == GroupKind::Circle ? Irrep::circle(1) : Irrep::su2(1);

    // plaquette ids at spatial origin for each time slice
    std::vector<int> pid(nt, -1);
    for (size_t p = 0; p < lat.plaquettes.size(); ++p) {
        const auto& pl = lat.plaquettes[p];
        if (pl.axis_a != 0 || pl.axis_b != 1) continue;
        auto x = lat.coords(pl.site);
        bool origin = true;
        for (int a = 0; a < taxis; ++a)
            if (x[a] != 0) origin = false;
        if (origin) pid[x[taxis]] = int(p);
    }
    // the operator may be absent on trailing slices (open boundary when the
    // plaquette plane includes the time axis)
    int nt_op = 0;
    while (nt_op < nt && pid[nt_op] >= 0) ++nt_op;
    if (nt_op <= t_max) throw std::invalid_argument("too few operator slices for t_max");

    bool wrap = lat.spec.boundary == Boundary::Periodic && nt_op == nt;
    auto rows = run_chains(lat, kind, params, [&](const FieldConfig& cfg) {
        std::vector<double> o(nt_op);
        for (int t = 0; t < nt_op; ++t)
            o[t] = character(rep, plaquette_product(cfg, lat.plaquettes[pid[t]])).real() /
                   rep.dimension();
        // row: [mean O, avg_s O(s) O(s+t) for t = 0..t_max]
        std::vector<double> row(t_max + 2, 0.0);
        for (int t = 0; t < nt_op; ++t) row[0] += o[t] / nt_op;
        for (int t = 0; t <= t_max; ++t) {
            int ns = wrap ? nt_op : nt_op - t;
            for (int s = 0; s < ns; ++s) row[1 + t] += o[s] * o[(s + t) % nt_op] / ns;
        }
        return row;
    });

    CorrelatorResult res;
    for (int t = 0; t <= t_max; ++t) {
        auto [c, err] = jackknife_fn(rows, [t](const std::vector<double>& m) {
            return m[1 + t] - m[0] * m[0];
        });
        res.C.push_back(c);
        res.stderr_.push_back(err);
    }
    return res;
}

struct MassGapFit {
    double m = 0.0;
    double stderr_ = 0.0;
    bool gap_defined = false;
    std::vector<double> m_eff;      // t = 1 .. t_max - 1 (NaN where undefined)
    std::vector<double> m_eff_err;
};

// Effective mass ln[C(t)/C(t+1)] plus a weighted single-exponential fit of
// ln C(t) over all usable separations (C > 0 and not consistent with zero);
// non-positive correlator values are excluded from the fit.
inline MassGapFit mass_gap_fit(const CorrelatorResult& corr) {
    MassGapFit fit;
    int tmax = int(corr.C.size()) - 1;
    for (int t = 1; t < tmax; ++t) {
        if (corr.C[t] > 0 && corr.C[t + 1] > 0) {
            fit.m_eff.push_back(std::log(corr.C[t] / corr.C[t + 1]));
            double r = std::hypot(corr.stderr_[t] / corr.C[t],
                                  corr.stderr_[t + 1] / corr.C[t + 1]);
            fit.m_eff_err.push_back(r);
        } else {
            fit.m_eff.push_back(std::numeric_limits<double>::quiet_NaN());
            fit.m_eff_err.push_back(std::numeric_limits<double>::quiet_NaN());
        }
    }

    // usable points: positive, and significant relative error when known
    std::vector<double> ts, ys, ws;
    bool weighted = true;
    for (int t = 0; t <= tmax; ++t) {
        if (!(corr.C[t] > 0)) continue;
        double rel = corr.stderr_[t] / corr.C[t];
        if (rel >= 1.0) continue;  // consistent with zero
        ts.push_back(t);
        ys.push_back(std::log(corr.C[t]));
        if (corr.stderr_[t] <= 0) weighted = false;
        ws.push_back(corr.stderr_[t] > 0 ? 1.0 / (rel * rel) : 1.0);
    }
    if (ts.size() < 3) return fit;  // gap undefined

    if (!weighted)
        for (auto& w : ws) w = 1.0;
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < ts.size(); ++i) {
        sw += ws[i];
        sx += ws[i] * ts[i];
        sy += ws[i] * ys[i];
        sxx += ws[i] * ts[i] * ts[i];
        sxy += ws[i] * ts[i] * ys[i];
    }
    double det = sw * sxx - sx * sx;
    double slope = (sw * sxy - sx * sy) / det;
    fit.m = -slope;
    if (weighted) {
        fit.stderr_ = std::sqrt(sw / det);
    } else {
        double a = (sxx * sy - sx * sxy) / det, chi2 = 0;
        for (size_t i = 0; i < ts.size(); ++i) {
            double r = ys[i] - (a + slope * ts[i]);
            chi2 += r * r;
        }
        double dof = std::max<double>(1.0, double(ts.size()) - 2.0);
        fit.stderr_ = std::sqrt(chi2 / dof * sw / det);
    }
    fit.gap_defined = fit.m > 2 * fit.stderr_;
    return fit;
}

// ---------------------------------------------------------------------------
// CSV outputs.

inline void write_observables_csv(const std::vector<std::pair<std::string, ObservableSeries>>&
                                      named,
                                  std::ostream& os) {
    os << "sweep,observable,value\n";
    for (const auto& [name, series] : named)
        for (size_t i = 0; i < series.values.size(); ++i)
            os << i << ',' << name << ',' << series.values[i] << '\n';
}

inline void write_correlator_csv(const CorrelatorResult& corr, std::ostream& os) {
    os << "t,C,stderr\n";
    for (size_t t = 0; t < corr.C.size(); ++t)
        os << t << ',' << corr.C[t] << ',' << corr.stderr_[t] << '\n';
}

inline void write_massgap_csv(const MassGapFit& fit, std::ostream& os) {
    os << "t,m_eff,stderr,fit_m,fit_err\n";
    for (size_t i = 0; i < fit.m_eff.size(); ++i)
        os << (i + 1) << ',' << fit.m_eff[i] << ',' << fit.m_eff_err[i] << ',' << fit.m
           << ',' << fit.stderr_ << '\n';
}

}  // namespace heatgauge
