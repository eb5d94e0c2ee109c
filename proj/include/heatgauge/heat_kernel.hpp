#pragma once

// Heat-kernel plaquette density K(g, beta) = sum_lambda d_lambda
// exp(-c(lambda) beta) chi_lambda(g) with certified truncation, its
// log-gradient, the character-basis convolution algebra, the beta
// subdivision schedule and the two-sided Gaussian estimate check.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "group.hpp"

namespace heatgauge {

struct HeatKernelParams {
    GroupKind kind = GroupKind::Circle;
    double beta = 1.0;
    double tail_tol = 1e-12;
    int cutoff = 0;  // max irrep label kept in the series
};

namespace detail {

// |d_lambda chi_lambda| <= d_lambda^2, so the absolute truncation error is
// bounded by the tail of t(label) = d^2 exp(-c beta). For the circle the
// label counts both windings +-n.
inline double series_term_bound(GroupKind kind, int label, double beta) {
    if (kind == GroupKind::Circle)
        return (label == 0 ? 1.0 : 2.0) * std::exp(-double(label) * label * beta);
    double d = label + 1.0;
    return d * d * std::exp(-0.25 * label * (label + 2.0) * beta);
}

}  // namespace detail

// Smallest cutoff whose analytic geometric-domination tail bound is <= tail_tol.
// Term ratios are strictly decreasing in the label, so once the ratio at the
// first omitted term is r < 1 the tail is bounded by term / (1 - r).
inline int truncation_cutoff(GroupKind kind, double beta, double tail_tol) {
    if (beta <= 0.0) throw std::invalid_argument("truncation_cutoff: beta must be > 0");
    if (tail_tol <= 0.0) throw std::invalid_argument("truncation_cutoff: tail_tol must be > 0");
    for (int cutoff = 0; cutoff < 200000; ++cutoff) {
        double t1 = detail::series_term_bound(kind, cutoff + 1, beta);
        double t2 = detail::series_term_bound(kind, cutoff + 2, beta);
        if (t1 <= 0.0) return cutoff;
        double r = t2 / t1;
        if (r < 1.0 && t1 / (1.0 - r) <= tail_tol) return cutoff;
    }
    throw std::runtime_error("truncation_cutoff: series impractical at this beta");
}

inline HeatKernelParams make_heat_kernel_params(GroupKind kind, double beta,
                                                double tail_tol = 1e-12) {
    if (beta <= 1e-4)
        throw std::invalid_argument(
            "heat kernel series requires beta > 1e-4; use the wrapped-Gaussian form");
    HeatKernelParams p{kind, beta, tail_tol, 0};
    p.cutoff = truncation_cutoff(kind, beta, tail_tol);
    return p;
}

// Character-basis coefficients of K(., beta): lambda -> d_lambda e^{-c beta}.
inline ClassFunctionCoeffs heat_kernel_coeffs(const HeatKernelParams& p) {
    ClassFunctionCoeffs f;
    f.kind = p.kind;
    if (p.kind == GroupKind::Circle) {
        for (int n = -p.cutoff; n <= p.cutoff; ++n)
            f.c[n] = std::exp(-double(n) * n * p.beta);
    } else {
        for (int k = 0; k <= p.cutoff; ++k)
            f.c[k] = (k + 1.0) * std::exp(-0.25 * k * (k + 2.0) * p.beta);
    }
    return f;
}

inline double eval(const GroupElement& g, const HeatKernelParams& p) {
    if (g.kind != p.kind) throw std::invalid_argument("heat kernel kind mismatch");
    if (p.kind == GroupKind::Circle) {
        double s = 1.0;
        for (int n = 1; n <= p.cutoff; ++n)
            s += 2.0 * std::exp(-double(n) * n * p.beta) * std::cos(n * g.angle);
        return s;
    }
    double psi = class_angle(g);
    double s = 0.0;
    for (int k = 0; k <= p.cutoff; ++k)
        s += (k + 1.0) * std::exp(-0.25 * k * (k + 2.0) * p.beta) * su2_character(k, psi);
    return s;
}

inline double log_eval(const GroupElement& g, const HeatKernelParams& p) {
    double v = eval(g, p);
    if (v <= 0.0)
        throw std::runtime_error("heat kernel non-positive: cutoff/beta misuse");
    return std::log(v);
}

// Lie-algebra gradient of ln K at g (1 coordinate for the circle, 3 for SU(2)).
inline std::vector<double> log_grad(const GroupElement& g, const HeatKernelParams& p) {
    if (g.kind != p.kind) throw std::invalid_argument("heat kernel kind mismatch");
    if (p.kind == GroupKind::Circle) {
        double K = 1.0, dK = 0.0;
        for (int n = 1; n <= p.cutoff; ++n) {
            double e = std::exp(-double(n) * n * p.beta);
            K += 2.0 * e * std::cos(n * g.angle);
            dK -= 2.0 * n * e * std::sin(n * g.angle);
        }
        if (K <= 0.0) throw std::runtime_error("heat kernel non-positive");
        return {dK / K};
    }
    double psi = class_angle(g);
    double x = 0.5 * psi;
    double K = 0.0, dKdpsi = 0.0;
    for (int k = 0; k <= p.cutoff; ++k) {
        int m = k + 1;
        double e = m * std::exp(-0.25 * k * (k + 2.0) * p.beta);
        K += e * su2_character(k, psi);
        // d/dpsi [sin(m x)/sin(x)] with x = psi/2
        double dchi;
        double sx = std::sin(x);
        if (std::abs(sx) < 1e-4 || std::abs(x - pi) < 1e-4) {
            double d = (x < 0.5 * pi) ? x : (x - pi);
            double sgn = (x < 0.5 * pi) ? 1.0 : ((m % 2 == 0) ? -1.0 : 1.0);
            dchi = 0.5 * sgn * (-m * (double(m) * m - 1.0) / 3.0) * d;
        } else {
            dchi = 0.5 * (m * std::cos(m * x) * sx - std::sin(m * x) * std::cos(x)) / (sx * sx);
        }
        dKdpsi += e * dchi;
    }
    if (K <= 0.0) throw std::runtime_error("heat kernel non-positive");
    auto v = torus_coordinates(g);
    double a = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (a < 1e-12) return {0.0, 0.0, 0.0};
    double r = dKdpsi / K;
    return {r * v[0] / a, r * v[1] / a, r * v[2] / a};
}

// ---------------------------------------------------------------------------
// Convolution algebra: (f * h)(g) = int f(g x) h(x^-1 g') dmu_H(x) acts on
// character coefficients as f_lambda h_lambda / d_lambda.

inline ClassFunctionCoeffs convolve_coeffs(const ClassFunctionCoeffs& f,
                                           const ClassFunctionCoeffs& h) {
    if (f.kind != h.kind) throw std::invalid_argument("convolve_coeffs kind mismatch");
    ClassFunctionCoeffs out;
    out.kind = f.kind;
    for (const auto& [label, fc] : f.c) {
        auto it = h.c.find(label);
        if (it == h.c.end()) continue;
        double d = Irrep{f.kind, label}.dimension();
        out.c[label] = fc * it->second / d;
    }
    return out;
}

enum class BetaStep { SquareToHalfSquare, SquareToRect, RectToSquare };

// Subdivision schedule: square at beta -> half-size square at beta/4,
// rectangle at beta/2; a rectangle merges back into the coarse square.
inline double beta_schedule(double beta, BetaStep step) {
    if (beta <= 0.0) throw std::invalid_argument("beta_schedule: beta must be > 0");
    switch (step) {
        case BetaStep::SquareToHalfSquare: return beta / 4.0;
        case BetaStep::SquareToRect: return beta / 2.0;
        case BetaStep::RectToSquare: return beta * 2.0;
    }
    throw std::logic_error("unreachable");
}

// |int K(g x, b1) K(x^-1 h, b2) dmu_H(x) - K(g h, b1 + b2)| by quadrature.
inline double convolution_check(GroupKind kind, double beta1, double beta2,
                                const GroupElement& g, const GroupElement& h,
                                const QuadratureRule& rule) {
    if (rule.group != kind || rule.kind != QuadratureKind::FullGroup)
        throw std::invalid_argument("convolution_check needs a full-group rule");
    auto p1 = make_heat_kernel_params(kind, beta1);
    auto p2 = make_heat_kernel_params(kind, beta2);
    auto p12 = make_heat_kernel_params(kind, beta1 + beta2);
    int needed = (kind == GroupKind::Circle) ? p1.cutoff + p2.cutoff
                                             : p1.cutoff + p2.cutoff;
    if (rule.resolution < needed)
        throw std::invalid_argument("convolution_check: quadrature under-resolved");
    double s = 0.0;
    for (size_t i = 0; i < rule.nodes.size(); ++i) {
        const auto& x = rule.nodes[i];
        s += rule.weights[i] * eval(multiply(g, x), p1) * eval(multiply(inverse(x), h), p2);
    }
    return std::abs(s - eval(multiply(g, h), p12));
}

// ---------------------------------------------------------------------------
// Exact theta-function (Poisson summation) forms. These are numerically
// stable where the character series loses all precision (small beta, class
// angle far from the identity) and serve as independent oracles.

// Circle: sqrt(pi/beta) sum_k exp(-(theta - 2 pi k)^2 / (4 beta)).
inline double wrapped_gaussian_oracle(double theta, double beta) {
    if (beta <= 0.0) throw std::invalid_argument("wrapped_gaussian_oracle: beta must be > 0");
    theta = wrap_angle(theta);
    // |theta - 2 pi k| >= 2 pi |k| - pi; certified once the omitted term is
    // below 1e-30 relative to the k = 0 term.
    int kw = 1 + int(std::ceil((pi + std::sqrt(4.0 * beta * 80.0)) / (2.0 * pi)));
    double s = 0.0;
    for (int k = -kw; k <= kw; ++k) {
        double d = theta - 2.0 * pi * k;
        s += std::exp(-d * d / (4.0 * beta));
    }
    return std::sqrt(pi / beta) * s;
}

inline double circle_wrapped_log(double theta, double beta) {
    theta = wrap_angle(theta);
    int kw = 1 + int(std::ceil((pi + std::sqrt(4.0 * beta * 80.0)) / (2.0 * pi)));
    double m = -std::numeric_limits<double>::infinity();
    std::vector<double> ex;
    for (int k = -kw; k <= kw; ++k) {
        double d = theta - 2.0 * pi * k;
        ex.push_back(-d * d / (4.0 * beta));
        m = std::max(m, ex.back());
    }
    double s = 0.0;
    for (double e : ex) s += std::exp(e - m);
    return 0.5 * std::log(pi / beta) + m + std::log(s);
}

// SU(2), exact identity with t = beta/4, x = psi/2:
//   K(psi, beta) = e^{beta/4} sqrt(pi/t) / (4 t sin x) *
//                  sum_n (x - 2 pi n) exp(-(x - 2 pi n)^2 / (4 t)).
inline double su2_theta_log(double psi, double beta) {
    if (beta <= 0.0) throw std::invalid_argument("su2_theta_log: beta must be > 0");
    double t = 0.25 * beta;
    double x = 0.5 * psi;
    if (x < 1e-6) {
        // positive-term character series is stable at the identity
        int cutoff = truncation_cutoff(GroupKind::UnitQuaternion, beta, 1e-14);
        double s = 0.0;
        for (int k = 0; k <= cutoff; ++k)
            s += (k + 1.0) * (k + 1.0) * std::exp(-0.25 * k * (k + 2.0) * beta);
        return std::log(s);
    }
    if (x >= pi) throw std::invalid_argument("su2_theta_log: psi must be < 2 pi");
    int kw = 1 + int(std::ceil((pi + std::sqrt(4.0 * t * 80.0)) / (2.0 * pi)));
    double m = -std::numeric_limits<double>::infinity();
    std::vector<double> ex;
    std::vector<double> pre;
    for (int n = -kw; n <= kw; ++n) {
        double d = x - 2.0 * pi * n;
        ex.push_back(-d * d / (4.0 * t));
        pre.push_back(d);
        m = std::max(m, ex.back());
    }
    double s = 0.0;
    for (size_t i = 0; i < ex.size(); ++i) s += pre[i] * std::exp(ex[i] - m);
    if (s <= 0.0) throw std::runtime_error("su2_theta_log: non-positive kernel");
    return 0.25 * beta + 0.5 * std::log(pi / t) - std::log(4.0 * t) - std::log(std::sin(x)) +
           m + std::log(s);
}

// Stable ln K(g, beta) for any beta > 0 (used by the Gaussian-bound scan and
// by short-time calibration oracles).
inline double stable_log_eval(GroupKind kind, double class_dist, double beta) {
    if (kind == GroupKind::Circle) return circle_wrapped_log(class_dist, beta);
    return su2_theta_log(class_dist, beta);
}

// ---------------------------------------------------------------------------
// Two-sided Gaussian estimate: fits constants with c2 < 4 < c4 such that
//   c1 V^-1 exp(-d^2/(c2 beta)) <= K(g,beta) <= c3 V^-1 exp(-d^2/(c4 beta))
// at every grid point, with V = beta^(dim/2) as ball-volume proxy.

struct GaussianBoundFit {
    double c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0;
    bool pass = false;
};

inline GaussianBoundFit gaussian_bound_check(GroupKind kind,
                                             const std::vector<double>& betas,
                                             int grid_n,
                                             double c2 = 3.8, double c4 = 4.2) {
    if (grid_n < 8) throw std::invalid_argument("gaussian_bound_check: grid too small");
    for (double b : betas)
        if (b <= 0.0 || b > 1.0)
            throw std::invalid_argument("gaussian_bound_check: betas must lie in (0, 1]");
    double dim = kind == GroupKind::Circle ? 1.0 : 3.0;
    double dmax = kind == GroupKind::Circle ? pi : 2.0 * pi - 0.05;
    double ln_c1 = std::numeric_limits<double>::infinity();
    double ln_c3 = -std::numeric_limits<double>::infinity();
    for (double beta : betas) {
        double lnV = 0.5 * dim * std::log(beta);
        for (int i = 0; i < grid_n; ++i) {
            double d = 1e-3 + (dmax - 1e-3) * i / (grid_n - 1.0);
            double lnK = stable_log_eval(kind, d, beta);
            if (!std::isfinite(lnK))
                throw std::runtime_error("gaussian_bound_check: fit infeasible");
            ln_c1 = std::min(ln_c1, lnK + lnV + d * d / (c2 * beta));
            ln_c3 = std::max(ln_c3, lnK + lnV + d * d / (c4 * beta));
        }
    }
    GaussianBoundFit fit;
    fit.c2 = c2;
    fit.c4 = c4;
    fit.c1 = std::exp(ln_c1);
    fit.c3 = std::exp(ln_c3);
    fit.pass = std::isfinite(fit.c1) && std::isfinite(fit.c3) && fit.c1 > 0.0 &&
               fit.c1 <= fit.c3;
    return fit;
}

}  // namespace heatgauge
