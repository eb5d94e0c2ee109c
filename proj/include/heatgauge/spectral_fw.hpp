#pragma once

// Small-noise spectral pipeline: ground-state density models, drift field,
// first-exit diffusion simulation, principal Dirichlet eigenvalue estimators
// (exit-time tail, moment-generating-function threshold, finite-difference
// grid), action functional / quasi-potential, and the dynamical-system
// regularity checks (single omega-limit set, Lipschitz drift).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "heatgauge/heat_kernel.hpp"

namespace heatgauge {

namespace detail {

inline double norm2(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// d/dtheta ln K(theta, beta) on the circle, via the wrapped-Gaussian form
// (stable for every beta > 0).
inline double circle_log_kernel_deriv(double theta, double beta) {
    int kw = 1 + int(std::ceil((pi + std::sqrt(4.0 * beta * 80.0)) / (2.0 * pi)));
    double m = -std::numeric_limits<double>::infinity();
    std::vector<double> ex, d;
    for (int k = -kw; k <= kw; ++k) {
        double u = theta - 2 * pi * k;
        ex.push_back(-u * u / (4 * beta));
        d.push_back(u);
        m = std::max(m, ex.back());
    }
    double num = 0, den = 0;
    for (size_t i = 0; i < ex.size(); ++i) {
        double w = std::exp(ex[i] - m);
        den += w;
        num += -d[i] / (2 * beta) * w;
    }
    return num / den;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Ground-state density models. Coordinates live in the exponential chart at
// the identity; the density is even in the coordinates.

struct GroundStateModel {
    enum class Variant { SingleLink, QuadratureStrip, Flat };
    Variant variant = Variant::SingleLink;
    GroupKind kind = GroupKind::Circle;
    double beta = 0.5;
    int dim = 1;  // free coordinates

    // QuadratureStrip: a 2D strip of n_plaquettes unit squares stacked along
    // time; temporal links gauge-fixed to identity, the far spatial link
    // clamped to identity, the first `dim` slice links free, the rest
    // integrated numerically on a periodic grid. tail_c holds the cosine
    // coefficients of the integrated tail factor.
    int n_plaquettes = 1;
    int resolution = 0;
    std::vector<double> tail_c;

    static GroundStateModel single_link(GroupKind kind, double beta) {
        GroundStateModel m;
        m.variant = Variant::SingleLink;
        m.kind = kind;
        m.beta = beta;
        m.dim = coord_dim(kind);
        return m;
    }

    // uniform density: zero drift (pure Brownian motion), used as a control
    static GroundStateModel flat(int dim) {
        GroundStateModel m;
        m.variant = Variant::Flat;
        m.dim = dim;
        return m;
    }

    static GroundStateModel quadrature_strip(int n_free, int n_plaquettes, double beta,
                                             int resolution);

    double log_density(const std::vector<double>& th) const;
    std::vector<double> grad_log_density(const std::vector<double>& th) const;
};

namespace detail {

// Numeric convolution power of the circle kernel on the periodic grid
// theta_j = 2pi j / N, chosen so that theta_i + theta_{j-i} == theta_j mod 2pi
// and the index convolution is exact.
inline std::vector<double> circle_kernel_conv_power(double beta, int m, int N) {
    std::vector<double> k(N), out(N);
    for (int j = 0; j < N; ++j) {
        double th = j * 2 * pi / N;
        if (th > pi) th -= 2 * pi;
        k[j] = std::exp(circle_wrapped_log(th, beta));
    }
    out = k;
    for (int p = 1; p < m; ++p) {
        std::vector<double> next(N, 0.0);
        for (int j = 0; j < N; ++j)
            for (int i = 0; i < N; ++i) next[j] += out[i] * k[(j - i + N) % N] / N;
        out = next;
    }
    return out;
}

// Cosine coefficients c_n, n = 0..nmax, of an even periodic grid function.
inline std::vector<double> grid_cosine_coeffs(const std::vector<double>& vals, int nmax) {
    int N = int(vals.size());
    std::vector<double> c(nmax + 1, 0.0);
    for (int n = 0; n <= nmax; ++n) {
        double s = 0;
        for (int j = 0; j < N; ++j) s += vals[j] * std::cos(n * j * 2 * pi / N);
        c[n] = s * (n == 0 ? 1.0 : 2.0) / N;
    }
    return c;
}

}  // namespace detail

inline GroundStateModel GroundStateModel::quadrature_strip(int n_free, int n_plaquettes,
                                                           double beta, int resolution) {
    if (n_free < 1 || n_free > 5)
        throw std::invalid_argument("quadrature strip supports 1..5 free coordinates");
    if (n_plaquettes < n_free)
        throw std::invalid_argument("need at least one plaquette per free coordinate");
    GroundStateModel m;
    m.variant = Variant::QuadratureStrip;
    m.kind = GroupKind::Circle;
    m.beta = beta;
    m.dim = n_free;
    m.n_plaquettes = n_plaquettes;
    m.resolution = resolution;

    int tail_kernels = n_plaquettes - n_free + 1;
    auto coarse = detail::circle_kernel_conv_power(beta, tail_kernels, resolution);
    auto fine = detail::circle_kernel_conv_power(beta, tail_kernels, 2 * resolution);
    // resolution check: compare the two grids at shared accuracy
    int nmax = truncation_cutoff(GroupKind::Circle, beta * tail_kernels, 1e-12) + 2;
    if (2 * nmax + 2 > resolution)
        throw std::invalid_argument("quadrature resolution too low for the kernel bandwidth");
    auto cc = detail::grid_cosine_coeffs(coarse, nmax);
    auto cf = detail::grid_cosine_coeffs(fine, nmax);
    for (int n = 0; n <= nmax; ++n)
        if (std::abs(cc[n] - cf[n]) > 0.01 * std::max(1.0, std::abs(cf[n])))
            throw std::invalid_argument("quadrature resolution too low (grids disagree > 1%)");
    m.tail_c = cf;
    return m;
}

inline double GroundStateModel::log_density(const std::vector<double>& th) const {
    if (int(th.size()) != dim) throw std::invalid_argument("coordinate dimension mismatch");
    if (variant == Variant::Flat) return 0.0;
    if (variant == Variant::SingleLink) {
        if (kind == GroupKind::Circle) return circle_wrapped_log(th[0], beta);
        double r = std::min(detail::norm2(th), 2 * pi - 1e-9);
        return su2_theta_log(r, beta);
    }
    double s = 0.0;
    for (int t = 0; t + 1 < dim; ++t)
        s += circle_wrapped_log(th[t] - th[t + 1], beta);
    double tail = 0.0;
    for (size_t n = 0; n < tail_c.size(); ++n) tail += tail_c[n] * std::cos(n * th[dim - 1]);
    if (tail <= 0) throw std::runtime_error("non-positive integrated density");
    return s + std::log(tail);
}

inline std::vector<double> GroundStateModel::grad_log_density(
    const std::vector<double>& th) const {
    if (int(th.size()) != dim) throw std::invalid_argument("coordinate dimension mismatch");
    std::vector<double> g(dim, 0.0);
    if (variant == Variant::Flat) return g;
    if (variant == Variant::SingleLink) {
        if (kind == GroupKind::Circle) {
            g[0] = detail::circle_log_kernel_deriv(th[0], beta);
            return g;
        }
        auto p = make_heat_kernel_params(kind, beta);
        return log_grad(exp_coordinates(kind, th), p);
    }
    for (int t = 0; t + 1 < dim; ++t) {
        double d = detail::circle_log_kernel_deriv(th[t] - th[t + 1], beta);
        g[t] += d;
        g[t + 1] -= d;
    }
    double tail = 0.0, dtail = 0.0;
    for (size_t n = 0; n < tail_c.size(); ++n) {
        tail += tail_c[n] * std::cos(n * th[dim - 1]);
        dtail += -double(n) * tail_c[n] * std::sin(n * th[dim - 1]);
    }
    g[dim - 1] += dtail / tail;
    return g;
}

// Drift of the ground-state diffusion (noise-independent normalization; the
// coupling only scales the noise term).
inline std::vector<double> drift(const GroundStateModel& model,
                                 const std::vector<double>& th) {
    auto g = model.grad_log_density(th);
    for (auto& x : g) x *= 0.5;
    return g;
}

// ---------------------------------------------------------------------------
// First-exit simulation from the coordinate ball |theta| < R.

struct SDEParams {
    double g = 0.5;
    double dt = 0.002;
    double R = 1.0;
    int64_t max_steps = 100000000;
    int n_traj = 2000;
    uint64_t seed = 1;
    int n_threads = 1;
};

struct ExitRecord {
    double tau = 0.0;
    std::vector<double> exit_point;
    int64_t steps = 0;
    bool censored = false;
};

inline double sup_drift_norm(const GroundStateModel& model, double R) {
    double sup = 0.0;
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> u(-R, R);
    for (int i = 0; i < 2048; ++i) {
        std::vector<double> th(model.dim);
        do {
            for (auto& x : th) x = u(rng);
        } while (detail::norm2(th) >= R);
        sup = std::max(sup, detail::norm2(drift(model, th)));
    }
    return sup;
}

inline void validate_sde(const GroundStateModel& model, const SDEParams& p) {
    double rmax = model.kind == GroupKind::Circle ? pi : 2 * pi;
    if (p.R <= 0 || p.R >= rmax)
        throw std::invalid_argument("domain radius outside the coordinate chart");
    double bound = p.R * p.R / (100.0 * std::max(1.0, sup_drift_norm(model, p.R)));
    if (p.dt > bound) throw std::invalid_argument("dt exceeds the stability bound");
}

inline ExitRecord euler_maruyama_exit(const GroundStateModel& model, const SDEParams& p,
                                      std::mt19937_64& rng, std::vector<double> th) {
    if (detail::norm2(th) >= p.R) throw std::invalid_argument("start outside the domain");
    std::normal_distribution<double> n(0.0, 1.0);
    double sdt = std::sqrt(p.dt);
    ExitRecord rec;
    std::vector<double> prev(th);
    for (int64_t step = 1; step <= p.max_steps; ++step) {
        prev = th;
        auto b = drift(model, th);
        for (int i = 0; i < model.dim; ++i) th[i] += b[i] * p.dt + p.g * sdt * n(rng);
        if (detail::norm2(th) >= p.R) {
            // linear interpolation of the boundary crossing
            double aa = 0, bb = 0, cc = -p.R * p.R;
            for (int i = 0; i < model.dim; ++i) {
                double d = th[i] - prev[i];
                aa += d * d;
                bb += 2 * prev[i] * d;
                cc += prev[i] * prev[i];
            }
            double s = aa > 0 ? (-bb + std::sqrt(std::max(bb * bb - 4 * aa * cc, 0.0))) /
                                    (2 * aa)
                              : 1.0;
            s = std::clamp(s, 0.0, 1.0);
            rec.tau = (step - 1 + s) * p.dt;
            rec.steps = step;
            rec.exit_point.resize(model.dim);
            for (int i = 0; i < model.dim; ++i)
                rec.exit_point[i] = prev[i] + s * (th[i] - prev[i]);
            return rec;
        }
    }
    rec.tau = p.max_steps * p.dt;
    rec.steps = p.max_steps;
    rec.exit_point = th;
    rec.censored = true;
    return rec;
}

// Per-trajectory RNG streams derived from (seed, index); the result order is
// index order regardless of thread count.
inline std::vector<ExitRecord> simulate_exits(const GroundStateModel& model,
                                              const SDEParams& p,
                                              const std::vector<double>& start) {
    validate_sde(model, p);
    std::vector<ExitRecord> records(p.n_traj);
    auto run_range = [&](int lo, int hi) {
        for (int i = lo; i < hi; ++i) {
            std::seed_seq seq{uint32_t(p.seed), uint32_t(p.seed >> 32), uint32_t(i)};
            std::mt19937_64 rng(0);
            {
                std::vector<uint32_t> init(4);
                seq.generate(init.begin(), init.end());
                rng.seed((uint64_t(init[0]) << 32) ^ init[1] ^ (uint64_t(init[2]) << 16) ^
                         init[3]);
            }
            records[i] = euler_maruyama_exit(model, p, rng, start);
        }
    };
    int nt = std::max(1, p.n_threads);
    if (nt == 1) {
        run_range(0, p.n_traj);
    } else {
        std::vector<std::thread> threads;
        int per = (p.n_traj + nt - 1) / nt;
        for (int t = 0; t < nt; ++t)
            threads.emplace_back(run_range, t * per, std::min(p.n_traj, (t + 1) * per));
        for (auto& t : threads) t.join();
    }
    return records;
}

// ---------------------------------------------------------------------------
// Principal-eigenvalue estimators.

struct EigenvalueEstimate {
    double lambda0 = 0.0;       // survival-tail estimator
    double stderr_ = 0.0;
    double lambda0_mgf = 0.0;   // moment-generating-function threshold
    double mgf_stderr_ = 0.0;
    double window_start = 0.0;  // tail-fit window start (time units)
    int64_t n_tail = 0;
};

namespace detail {

struct Ols {
    double slope = 0, intercept = 0, r2 = 0;
};

inline Ols ols_fit(const std::vector<double>& x, const std::vector<double>& y) {
    double n = double(x.size()), sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        syy += y[i] * y[i];
    }
    Ols o;
    double det = n * sxx - sx * sx;
    o.slope = (n * sxy - sx * sy) / det;
    o.intercept = (sy - o.slope * sx) / n;
    double sstot = syy - sy * sy / n, ssres = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        double r = y[i] - (o.intercept + o.slope * x[i]);
        ssres += r * r;
    }
    o.r2 = sstot > 0 ? 1.0 - ssres / sstot : 1.0;
    return o;
}

// The MGF M(lam) = E[e^{lam tau}] has a simple pole at the principal
// eigenvalue, so 1/M(lam) vanishes there. Fit 1/M by a quadratic over rates
// safely below the pole (where the empirical mean is still reliable, i.e. its
// largest term carries at most 5% of the sum) and extrapolate to the root.
inline double mgf_threshold(const std::vector<double>& taus) {
    double tmax = 0;
    for (double t : taus) tmax = std::max(tmax, t);
    auto scaled_mean = [&](double lam) {  // M(lam) * e^{-lam tmax}
        double s = 0;
        for (double t : taus) s += std::exp(lam * (t - tmax));
        return s / taus.size();
    };
    auto share = [&](double lam) { return 1.0 / (taus.size() * scaled_mean(lam)); };
    double lo = 0.0, hi = 1.0;
    while (share(hi) <= 0.05 && hi < 1e6) hi *= 2;
    if (hi >= 1e6) return hi;
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        (share(mid) <= 0.05 ? lo : hi) = mid;
    }
    double lam_max = 0.5 * (lo + hi);

    // quadratic least squares of 1/M over lam in [0.2, 0.7] lam_max
    const int npts = 11;
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, b0 = 0, b1 = 0, b2 = 0;
    for (int i = 0; i < npts; ++i) {
        double lam = (0.2 + 0.5 * i / (npts - 1)) * lam_max;
        double y = std::exp(-lam * tmax) / scaled_mean(lam);
        double l2 = lam * lam;
        s0 += 1; s1 += lam; s2 += l2; s3 += l2 * lam; s4 += l2 * l2;
        b0 += y; b1 += lam * y; b2 += l2 * y;
    }
    // solve the 3x3 normal equations by Cramer's rule
    auto det3 = [](double a, double b, double c, double d, double e, double f,
                   double g, double h, double i) {
        return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
    };
    double D = det3(s0, s1, s2, s1, s2, s3, s2, s3, s4);
    double c0 = det3(b0, s1, s2, b1, s2, s3, b2, s3, s4) / D;
    double c1 = det3(s0, b0, s2, s1, b1, s3, s2, b2, s4) / D;
    double c2 = det3(s0, s1, b0, s1, s2, b1, s2, s3, b2) / D;
    // smallest real root of c2 x^2 + c1 x + c0 beyond half the fit window
    double disc = c1 * c1 - 4 * c2 * c0;
    if (std::abs(c2) > 1e-300 && disc >= 0) {
        double sq = std::sqrt(disc);
        double r1 = (-c1 - sq) / (2 * c2), r2 = (-c1 + sq) / (2 * c2);
        if (r1 > r2) std::swap(r1, r2);
        if (r1 > 0.35 * lam_max) return r1;
        if (r2 > 0.35 * lam_max) return r2;
    }
    return c1 != 0 ? -c0 / c1 : lam_max;  // fall back to the linear part
}

}  // namespace detail

inline EigenvalueEstimate eigenvalue_from_exits(const std::vector<ExitRecord>& records) {
    std::vector<double> taus;
    int64_t censored = 0;
    for (const auto& r : records)
        r.censored ? void(++censored) : taus.push_back(r.tau);
    if (int64_t(taus.size()) < 1000)
        throw std::invalid_argument("need >= 1000 uncensored exits");
    if (double(censored) / records.size() > 0.05)
        throw std::runtime_error("censoring exceeds 5%: estimate invalid");
    std::sort(taus.begin(), taus.end());
    int64_t n = taus.size();

    // survival-tail fit: smallest window start whose log-survival curve is
    // linear (r^2 >= 0.99) with at least 10% of the samples beyond it
    EigenvalueEstimate est;
    bool found = false;
    for (int qi = 0; qi <= 17; ++qi) {
        int64_t i0 = int64_t(qi * 0.05 * n);
        if (n - i0 < std::max<int64_t>(50, n / 10)) break;
        std::vector<double> x, y;
        for (int64_t i = i0; i < n - 1; ++i) {
            x.push_back(taus[i]);
            y.push_back(std::log(double(n - i) / n));
        }
        auto fit = detail::ols_fit(x, y);
        if (fit.r2 >= 0.99 && fit.slope < 0) {
            est.lambda0 = -fit.slope;
            est.window_start = taus[i0];
            est.n_tail = n - i0;
            est.stderr_ = est.lambda0 / std::sqrt(double(est.n_tail));
            found = true;
            break;
        }
    }
    if (!found) throw std::runtime_error("no linear tail region in the survival curve");

    // MGF threshold with bootstrap error
    est.lambda0_mgf = detail::mgf_threshold(taus);
    std::mt19937_64 rng(0xB00757u);
    std::uniform_int_distribution<int64_t> pick(0, n - 1);
    std::vector<double> boot;
    for (int b = 0; b < 200; ++b) {
        std::vector<double> resample(n);
        for (auto& t : resample) t = taus[pick(rng)];
        boot.push_back(detail::mgf_threshold(resample));
    }
    double bm = std::accumulate(boot.begin(), boot.end(), 0.0) / boot.size(), ss = 0;
    for (double v : boot) ss += (v - bm) * (v - bm);
    est.mgf_stderr_ = std::sqrt(ss / (boot.size() - 1));
    return est;
}

// ---------------------------------------------------------------------------
// Finite-difference Dirichlet eigenvalue of -(g^2/2) Laplacian - b . grad on
// the ball, zero boundary data. 1D: nonsymmetric tridiagonal + inverse power
// iteration; 2D: masked disc grid in symmetrized (Schroedinger) form + CG.

namespace detail {

inline double dirichlet_lambda_1d(const GroundStateModel& model, double g, double R,
                                  int n) {
    double h = 2 * R / n;
    int m = n - 1;  // interior points
    std::vector<double> lo(m), di(m), up(m);
    double c = g * g / (2 * h * h);
    for (int i = 0; i < m; ++i) {
        double x = -R + (i + 1) * h;
        double b = drift(model, {x})[0];
        // -A with A u = (g^2/2) u'' + b u'
        di[i] = 2 * c;
        lo[i] = -c + b / (2 * h);
        up[i] = -c - b / (2 * h);
    }
    // inverse power iteration with the Thomas solver
    std::vector<double> v(m, 1.0), w(m);
    double lambda = 0;
    for (int it = 0; it < 500; ++it) {
        // solve T w = v
        std::vector<double> cp(m), dp(m);
        cp[0] = up[0] / di[0];
        dp[0] = v[0] / di[0];
        for (int i = 1; i < m; ++i) {
            double denom = di[i] - lo[i] * cp[i - 1];
            cp[i] = up[i] / denom;
            dp[i] = (v[i] - lo[i] * dp[i - 1]) / denom;
        }
        w[m - 1] = dp[m - 1];
        for (int i = m - 2; i >= 0; --i) w[i] = dp[i] - cp[i] * w[i + 1];
        double nn = norm2(w);
        for (auto& x : w) x /= nn;
        // Rayleigh-style estimate lambda = (v . w)^-1 with previous v... use
        // T w_normalized dotted with w
        double num = 0;
        for (int i = 0; i < m; ++i) {
            double tw = di[i] * w[i] + (i > 0 ? lo[i] * w[i - 1] : 0.0) +
                        (i + 1 < m ? up[i] * w[i + 1] : 0.0);
            num += tw * w[i];
        }
        if (std::abs(num - lambda) < 1e-13 * std::max(1.0, std::abs(num))) {
            lambda = num;
            break;
        }
        lambda = num;
        v = w;
    }
    return lambda;
}

inline double dirichlet_lambda_2d(const GroundStateModel& model, double g, double R,
                                  int n) {
    // symmetrized form: H = -(g^2/2) Lap + |b|^2/(2 g^2) + (div b)/2, same
    // Dirichlet spectrum as the drift generator
    double h = 2 * R / n;
    int m = n - 1;
    std::vector<int> idx(m * m, -1);
    std::vector<double> pot;
    std::vector<std::pair<double, double>> xy;
    int count = 0;
    const double eps = 1e-5;
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i) {
            double x = -R + (i + 1) * h, y = -R + (j + 1) * h;
            if (x * x + y * y >= R * R) continue;
            idx[j * m + i] = count++;
            xy.emplace_back(x, y);
            auto b = drift(model, {x, y});
            double divb =
                (drift(model, {x + eps, y})[0] - drift(model, {x - eps, y})[0]) / (2 * eps) +
                (drift(model, {x, y + eps})[1] - drift(model, {x, y - eps})[1]) / (2 * eps);
            pot.push_back((b[0] * b[0] + b[1] * b[1]) / (2 * g * g) + divb / 2);
        }
    double c = g * g / (2 * h * h);
    auto apply = [&](const std::vector<double>& u, std::vector<double>& out) {
        for (int k = 0; k < count; ++k) out[k] = (4 * c + pot[k]) * u[k];
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < m; ++i) {
                int k = idx[j * m + i];
                if (k < 0) continue;
                auto nb = [&](int ii, int jj) -> double {
                    if (ii < 0 || jj < 0 || ii >= m || jj >= m) return 0.0;
                    int kk = idx[jj * m + ii];
                    return kk < 0 ? 0.0 : u[kk];
                };
                out[k] -= c * (nb(i - 1, j) + nb(i + 1, j) + nb(i, j - 1) + nb(i, j + 1));
            }
    };
    // inverse power iteration; inner solves by conjugate gradient
    std::vector<double> v(count, 1.0), w(count), r(count), p(count), ap(count);
    double lambda = 0;
    for (int it = 0; it < 200; ++it) {
        // CG solve H w = v
        std::fill(w.begin(), w.end(), 0.0);
        r = v;
        p = r;
        double rs = std::inner_product(r.begin(), r.end(), r.begin(), 0.0);
        for (int cg = 0; cg < 4000 && rs > 1e-22; ++cg) {
            apply(p, ap);
            double alpha = rs / std::inner_product(p.begin(), p.end(), ap.begin(), 0.0);
            for (int k = 0; k < count; ++k) {
                w[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            double rs2 = std::inner_product(r.begin(), r.end(), r.begin(), 0.0);
            for (int k = 0; k < count; ++k) p[k] = r[k] + (rs2 / rs) * p[k];
            rs = rs2;
        }
        double nn = norm2(w);
        for (auto& x : w) x /= nn;
        apply(w, ap);
        double num = std::inner_product(ap.begin(), ap.end(), w.begin(), 0.0);
        if (std::abs(num - lambda) < 1e-11 * std::max(1.0, std::abs(num))) {
            lambda = num;
            break;
        }
        lambda = num;
        v = w;
    }
    return lambda;
}

}  // namespace detail

inline double dirichlet_eigenvalue_fd(const GroundStateModel& model, double g, double R,
                                      int grid_n) {
    if (grid_n < 200) throw std::invalid_argument("need grid_n >= 200");
    if (model.dim > 2) throw std::invalid_argument("grid eigensolver supports 1D and 2D");
    auto solve = model.dim == 1 ? detail::dirichlet_lambda_1d : detail::dirichlet_lambda_2d;
    double l1 = solve(model, g, R, grid_n);
    double l2 = solve(model, g, R, 2 * grid_n);
    return (4 * l2 - l1) / 3;  // Richardson for the O(h^2) scheme
}

// Residual of the discretized drift generator applied to the constant
// function (must vanish: the transformed ground state is constant).
inline double generator_constant_residual(const GroundStateModel& model, double g,
                                          double R, int grid_n) {
    double h = 2 * R / grid_n, c = g * g / (2 * h * h), worst = 0;
    for (int i = 1; i < grid_n; ++i) {
        double x = -R + i * h;
        double b = drift(model, {x})[0];
        // A 1 = (g^2/2)(1 - 2 + 1)/h^2 + b (1 - 1)/(2h)
        double row = c * (1.0 - 2.0 + 1.0) + b / (2 * h) * (1.0 - 1.0);
        worst = std::max(worst, std::abs(row));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Action functional, minimization, quasi-potential.

struct Path {
    std::vector<std::vector<double>> knots;
    double total_time = 1.0;
};

inline double action_functional(const Path& path, const GroundStateModel& model) {
    size_t nk = path.knots.size();
    if (nk < 2) return 0.0;
    double ds = path.total_time / double(nk - 1), I = 0.0;
    int d = int(path.knots[0].size());
    for (size_t k = 0; k + 1 < nk; ++k) {
        std::vector<double> v(d);
        for (int i = 0; i < d; ++i) v[i] = (path.knots[k + 1][i] - path.knots[k][i]) / ds;
        auto b0 = drift(model, path.knots[k]);
        auto b1 = drift(model, path.knots[k + 1]);
        double f0 = 0, f1 = 0;
        for (int i = 0; i < d; ++i) {
            f0 += (v[i] - b0[i]) * (v[i] - b0[i]);
            f1 += (v[i] - b1[i]) * (v[i] - b1[i]);
        }
        I += 0.5 * ds * 0.5 * (f0 + f1);
    }
    return I;
}

struct MinimizeResult {
    double value = 0.0;
    Path path;
    bool converged = false;
};

inline MinimizeResult minimize_action(const GroundStateModel& model,
                                      const std::vector<double>& start,
                                      const std::vector<double>& boundary, int n_knots,
                                      double t_horizon, double R) {
    if (n_knots < 16) throw std::invalid_argument("need at least 16 knots");
    MinimizeResult res;
    if (detail::norm2(start) >= R) {  // already on the boundary: empty path
        res.value = 0.0;
        res.converged = true;
        res.path.knots = {start, start};
        res.path.total_time = 0;
        return res;
    }
    int d = int(start.size());
    Path p;
    p.total_time = t_horizon;
    p.knots.resize(n_knots);
    for (int k = 0; k < n_knots; ++k) {
        p.knots[k].resize(d);
        double s = double(k) / (n_knots - 1);
        for (int i = 0; i < d; ++i) p.knots[k][i] = start[i] + s * (boundary[i] - start[i]);
    }
    double I = action_functional(p, model);
    double step = 0.1;
    const double fd = 1e-6;
    for (int iter = 0; iter < 4000; ++iter) {
        // numerical gradient over interior knots
        std::vector<std::vector<double>> grad(n_knots, std::vector<double>(d, 0.0));
        double gnorm = 0;
        for (int k = 1; k + 1 < n_knots; ++k)
            for (int i = 0; i < d; ++i) {
                double save = p.knots[k][i];
                p.knots[k][i] = save + fd;
                double ip = action_functional(p, model);
                p.knots[k][i] = save - fd;
                double im = action_functional(p, model);
                p.knots[k][i] = save;
                grad[k][i] = (ip - im) / (2 * fd);
                gnorm += grad[k][i] * grad[k][i];
            }
        gnorm = std::sqrt(gnorm);
        if (gnorm < 1e-10) {
            res.converged = true;
            break;
        }
        // backtracking line search
        bool moved = false;
        for (int bt = 0; bt < 40; ++bt) {
            Path trial = p;
            for (int k = 1; k + 1 < n_knots; ++k)
                for (int i = 0; i < d; ++i) trial.knots[k][i] -= step * grad[k][i];
            double It = action_functional(trial, model);
            if (It < I - 1e-14) {
                p = trial;
                I = It;
                moved = true;
                step *= 1.3;
                break;
            }
            step *= 0.5;
        }
        if (!moved || step < 1e-14) {
            res.converged = true;
            break;
        }
    }
    res.value = I;
    res.path = p;
    return res;
}

// Flow integration of d theta/dt = b via fixed-step RK4; returns the final
// point after the drift has effectively stalled.
inline std::vector<double> integrate_flow(const GroundStateModel& model,
                                          std::vector<double> th, double dt = 0.01,
                                          double t_max = 400.0) {
    auto f = [&](const std::vector<double>& x) { return drift(model, x); };
    int d = int(th.size());
    for (double t = 0; t < t_max; t += dt) {
        auto k1 = f(th);
        std::vector<double> tmp(d);
        for (int i = 0; i < d; ++i) tmp[i] = th[i] + 0.5 * dt * k1[i];
        auto k2 = f(tmp);
        for (int i = 0; i < d; ++i) tmp[i] = th[i] + 0.5 * dt * k2[i];
        auto k3 = f(tmp);
        for (int i = 0; i < d; ++i) tmp[i] = th[i] + dt * k3[i];
        auto k4 = f(tmp);
        double move = 0;
        for (int i = 0; i < d; ++i) {
            double delta = dt / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
            th[i] += delta;
            move = std::max(move, std::abs(delta));
        }
        if (move < 1e-13) break;
    }
    return th;
}

struct OmegaLimitReport {
    std::vector<std::vector<double>> limit_points;  // cluster representatives
    int inward_violations = 0;
    double max_residual = 0.0;  // largest |final - cluster| distance
};

inline OmegaLimitReport omega_limit_check(const GroundStateModel& model, double R,
                                          int n_starts, std::mt19937_64& rng,
                                          const std::function<std::vector<double>(
                                              const std::vector<double>&)>& drift_override =
                                              nullptr) {
    auto b = [&](const std::vector<double>& x) {
        return drift_override ? drift_override(x) : drift(model, x);
    };
    OmegaLimitReport rep;
    std::uniform_real_distribution<double> u(-R, R);
    for (int s = 0; s < n_starts; ++s) {
        std::vector<double> th(model.dim);
        do {
            for (auto& x : th) x = u(rng);
        } while (detail::norm2(th) >= R);
        // RK4 with the (possibly overridden) drift
        int d = model.dim;
        double dt = 0.01;
        for (double t = 0; t < 400.0; t += dt) {
            auto k1 = b(th);
            std::vector<double> tmp(d);
            for (int i = 0; i < d; ++i) tmp[i] = th[i] + 0.5 * dt * k1[i];
            auto k2 = b(tmp);
            for (int i = 0; i < d; ++i) tmp[i] = th[i] + 0.5 * dt * k2[i];
            auto k3 = b(tmp);
            for (int i = 0; i < d; ++i) tmp[i] = th[i] + dt * k3[i];
            auto k4 = b(tmp);
            double move = 0;
            for (int i = 0; i < d; ++i) {
                double delta = dt / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
                th[i] += delta;
                move = std::max(move, std::abs(delta));
            }
            if (move < 1e-13) break;
        }
        bool matched = false;
        for (const auto& c : rep.limit_points) {
            std::vector<double> diff(model.dim);
            for (int i = 0; i < model.dim; ++i) diff[i] = th[i] - c[i];
            if (detail::norm2(diff) < 1e-4) {
                matched = true;
                rep.max_residual = std::max(rep.max_residual, detail::norm2(diff));
                break;
            }
        }
        if (!matched) rep.limit_points.push_back(th);
    }
    // boundary scan: drift must point inward (b . (-theta/R) > 0)
    int n_scan = model.dim == 1 ? 2 : 512;
    std::mt19937_64 srng(7);
    std::normal_distribution<double> nr(0.0, 1.0);
    for (int s = 0; s < n_scan; ++s) {
        std::vector<double> th(model.dim);
        if (model.dim == 1) {
            th[0] = s == 0 ? R : -R;
        } else {
            double nn = 0;
            for (auto& x : th) {
                x = nr(srng);
                nn += x * x;
            }
            nn = std::sqrt(nn);
            for (auto& x : th) x *= R / nn;
        }
        auto bb = b(th);
        double inward = 0;
        for (int i = 0; i < model.dim; ++i) inward += bb[i] * (-th[i] / R);
        if (inward <= 0) rep.inward_violations += 1;
    }
    return rep;
}

// Quasi-potential for gradient drift with a single attractor:
// V = ln density(attractor) - max over the boundary of ln density.
inline double quasi_potential_gradient(const GroundStateModel& model, double R) {
    if (model.dim >= 2) {
        // curl check: drift must be an exact gradient
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(-R * 0.7, R * 0.7);
        const double eps = 1e-4;
        for (int s = 0; s < 64; ++s) {
            std::vector<double> th(model.dim);
            for (auto& x : th) x = u(rng);
            for (int i = 0; i < model.dim; ++i)
                for (int j = i + 1; j < model.dim; ++j) {
                    auto tp = th, tm = th;
                    tp[j] += eps;
                    tm[j] -= eps;
                    double dbidj = (drift(model, tp)[i] - drift(model, tm)[i]) / (2 * eps);
                    tp = th;
                    tm = th;
                    tp[i] += eps;
                    tm[i] -= eps;
                    double dbjdi = (drift(model, tp)[j] - drift(model, tm)[j]) / (2 * eps);
                    if (std::abs(dbidj - dbjdi) > 1e-8)
                        throw std::runtime_error("drift is not a gradient field");
                }
        }
    }
    std::mt19937_64 rng(11);
    auto rep = omega_limit_check(model, R, 24, rng);
    if (rep.limit_points.size() != 1)
        throw std::runtime_error("multiple attractors: quasi-potential undefined here");
    double at = model.log_density(rep.limit_points[0]);

    double best = -std::numeric_limits<double>::infinity();
    if (model.dim == 1) {
        best = std::max(model.log_density({R}), model.log_density({-R}));
    } else {
        // dense direction scan plus local refinement
        std::mt19937_64 srng(5);
        std::normal_distribution<double> nr(0.0, 1.0);
        std::vector<double> bestdir(model.dim);
        for (int s = 0; s < 4096; ++s) {
            std::vector<double> dirn(model.dim);
            double nn = 0;
            for (auto& x : dirn) {
                x = nr(srng);
                nn += x * x;
            }
            nn = std::sqrt(nn);
            for (auto& x : dirn) x *= R / nn;
            double v = model.log_density(dirn);
            if (v > best) {
                best = v;
                bestdir = dirn;
            }
        }
        // refine by small tangential perturbations
        double stepsz = 0.05;
        for (int it = 0; it < 200; ++it) {
            bool improved = false;
            for (int i = 0; i < model.dim; ++i)
                for (double sgn : {1.0, -1.0}) {
                    auto trial = bestdir;
                    trial[i] += sgn * stepsz;
                    double nn = detail::norm2(trial);
                    for (auto& x : trial) x *= R / nn;
                    double v = model.log_density(trial);
                    if (v > best) {
                        best = v;
                        bestdir = trial;
                        improved = true;
                    }
                }
            if (!improved) stepsz *= 0.5;
            if (stepsz < 1e-7) break;
        }
    }
    return at - best;
}

struct LipschitzResult {
    double L = 0.0;
    double alpha = 1.0;
    bool pass = false;
};

inline double max_neighbor_slope(const GroundStateModel& model, double R, int grid_n) {
    double L = 0;
    if (model.dim == 1) {
        double h = 2 * R / grid_n;
        double prev = drift(model, {-R})[0];
        for (int i = 1; i <= grid_n; ++i) {
            double cur = drift(model, {-R + i * h})[0];
            L = std::max(L, std::abs(cur - prev) / h);
            prev = cur;
        }
        return L;
    }
    // multi-d: axis-aligned neighbor pairs inside the ball
    double h = 2 * R / grid_n;
    std::vector<int> id(model.dim, 0);
    std::function<void(int, std::vector<double>&)> rec = [&](int axis,
                                                             std::vector<double>& th) {
        if (axis == model.dim) {
            if (detail::norm2(th) >= R) return;
            auto b0 = drift(model, th);
            for (int i = 0; i < model.dim; ++i) {
                auto tn = th;
                tn[i] += h;
                if (detail::norm2(tn) >= R) continue;
                auto b1 = drift(model, tn);
                double dn = 0;
                for (int j = 0; j < model.dim; ++j) dn += (b1[j] - b0[j]) * (b1[j] - b0[j]);
                L = std::max(L, std::sqrt(dn) / h);
            }
            return;
        }
        for (int i = 0; i <= grid_n; ++i) {
            th[axis] = -R + i * h;
            rec(axis + 1, th);
        }
    };
    std::vector<double> th(model.dim, 0.0);
    rec(0, th);
    return L;
}

inline LipschitzResult lipschitz_check(const GroundStateModel& model, double R,
                                       int grid_n) {
    LipschitzResult res;
    double l1 = max_neighbor_slope(model, R, grid_n);
    double l2 = max_neighbor_slope(model, R, 2 * grid_n);
    res.L = l2;
    res.pass = std::isfinite(l2) &&
               (l2 == 0.0 ? l1 == 0.0 : std::abs(l1 - l2) / l2 <= 0.10);
    return res;
}

// ---------------------------------------------------------------------------
// Scaling fit: ln lambda0 against 1/g^2; slope estimates -V.

struct FwFit {
    double slope = 0.0, intercept = 0.0, r2 = 0.0;
};

inline FwFit fw_scaling_fit(const std::vector<double>& gs,
                            const std::vector<double>& lambda0s) {
    if (gs.size() != lambda0s.size() || gs.size() < 4)
        throw std::invalid_argument("need >= 4 coupling values");
    std::vector<double> x, y;
    for (size_t i = 0; i < gs.size(); ++i) {
        if (!(lambda0s[i] > 0)) throw std::invalid_argument("invalid eigenvalue point");
        x.push_back(1.0 / (gs[i] * gs[i]));
        y.push_back(std::log(lambda0s[i]));
    }
    auto o = detail::ols_fit(x, y);
    return {o.slope, o.intercept, o.r2};
}

// ---------------------------------------------------------------------------
// CSV outputs.

inline void write_exits_csv(const std::vector<ExitRecord>& recs, std::ostream& os) {
    os << "traj_id,tau,censored\n";
    for (size_t i = 0; i < recs.size(); ++i)
        os << i << ',' << recs[i].tau << ',' << (recs[i].censored ? 1 : 0) << '\n';
}

inline void write_survival_csv(const std::vector<ExitRecord>& recs, std::ostream& os) {
    std::vector<double> taus;
    for (const auto& r : recs)
        if (!r.censored) taus.push_back(r.tau);
    std::sort(taus.begin(), taus.end());
    os << "t,survival\n";
    int64_t n = taus.size();
    for (int64_t i = 0; i < n; ++i)
        os << taus[i] << ',' << double(n - i) / n << '\n';
}

inline void write_lambda0_csv(const std::vector<std::tuple<double, double, double,
                                                           std::string>>& rows,
                              std::ostream& os) {
    os << "g,lambda0,stderr,method\n";
    for (const auto& [g, l, e, m] : rows) os << g << ',' << l << ',' << e << ',' << m << '\n';
}

inline void write_fwfit_csv(const FwFit& fit, double v_quasi, std::ostream& os) {
    os << "slope,intercept,r2,V_quasipotential\n";
    os << fit.slope << ',' << fit.intercept << ',' << fit.r2 << ',' << v_quasi << '\n';
}

}  // namespace heatgauge
