#pragma once

// Exact arithmetic, Haar sampling, irrep data, quadrature and distance
// geometry for the two supported compact groups: the circle group U(1)
// and the group of unit quaternions SU(2).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace heatgauge {

inline constexpr double pi = std::numbers::pi;

enum class GroupKind { Circle, UnitQuaternion };

inline std::string to_string(GroupKind k) {
    return k == GroupKind::Circle ? "circle" : "unit_quaternion";
}

// Canonical branch (-pi, pi].
inline double wrap_angle(double theta) {
    double r = std::remainder(theta, 2.0 * pi);
    if (r <= -pi) r = pi;
    return r;
}

struct GroupElement {
    GroupKind kind = GroupKind::Circle;
    double angle = 0.0;                       // Circle
    std::array<double, 4> q{1.0, 0.0, 0.0, 0.0};  // UnitQuaternion (w,x,y,z)

    static GroupElement circle(double theta) {
        GroupElement g;
        g.kind = GroupKind::Circle;
        g.angle = wrap_angle(theta);
        return g;
    }
    static GroupElement quaternion(double w, double x, double y, double z) {
        GroupElement g;
        g.kind = GroupKind::UnitQuaternion;
        g.q = {w, x, y, z};
        g.renormalize();
        return g;
    }

    void renormalize() {
        if (kind == GroupKind::Circle) {
            angle = wrap_angle(angle);
            return;
        }
        double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
        if (n <= 0.0) throw std::runtime_error("degenerate quaternion");
        for (auto& c : q) c /= n;
    }
};

inline void require_same_kind(const GroupElement& a, const GroupElement& b) {
    if (a.kind != b.kind) throw std::invalid_argument("group kind mismatch");
}

inline GroupElement identity(GroupKind kind) {
    return kind == GroupKind::Circle ? GroupElement::circle(0.0)
                                     : GroupElement::quaternion(1, 0, 0, 0);
}

inline GroupElement multiply(const GroupElement& a, const GroupElement& b) {
    require_same_kind(a, b);
    if (a.kind == GroupKind::Circle) return GroupElement::circle(a.angle + b.angle);
    const auto& p = a.q;
    const auto& r = b.q;
    return GroupElement::quaternion(
        p[0] * r[0] - p[1] * r[1] - p[2] * r[2] - p[3] * r[3],
        p[0] * r[1] + p[1] * r[0] + p[2] * r[3] - p[3] * r[2],
        p[0] * r[2] - p[1] * r[3] + p[2] * r[0] + p[3] * r[1],
        p[0] * r[3] + p[1] * r[2] - p[2] * r[1] + p[3] * r[0]);
}

inline GroupElement inverse(const GroupElement& a) {
    if (a.kind == GroupKind::Circle) return GroupElement::circle(-a.angle);
    return GroupElement::quaternion(a.q[0], -a.q[1], -a.q[2], -a.q[3]);
}

inline GroupElement haar_sample(GroupKind kind, std::mt19937_64& rng) {
    if (kind == GroupKind::Circle) {
        std::uniform_real_distribution<double> u(-pi, pi);
        return GroupElement::circle(u(rng));
    }
    std::normal_distribution<double> n(0.0, 1.0);
    while (true) {
        double w = n(rng), x = n(rng), y = n(rng), z = n(rng);
        double s = w * w + x * x + y * y + z * z;
        if (s > 1e-12) return GroupElement::quaternion(w, x, y, z);
    }
}

// Class angle: Circle -> |theta|; SU(2) -> psi = 2*acos(w) in [0, 2pi].
inline double class_angle(const GroupElement& g) {
    if (g.kind == GroupKind::Circle) return std::abs(g.angle);
    double w = std::clamp(g.q[0], -1.0, 1.0);
    return 2.0 * std::acos(w);
}

// Carnot-Caratheodory distance to the identity, in the metric normalization
// fixed by c(j) = j(j+1): equals the class angle for both groups.
inline double cc_distance(const GroupElement& g) { return class_angle(g); }

inline int coord_dim(GroupKind kind) { return kind == GroupKind::Circle ? 1 : 3; }

inline std::vector<double> torus_coordinates(const GroupElement& g) {
    if (g.kind == GroupKind::Circle) return {g.angle};
    double vn = std::sqrt(g.q[1] * g.q[1] + g.q[2] * g.q[2] + g.q[3] * g.q[3]);
    double psi = class_angle(g);
    if (vn < 1e-14) {
        if (g.q[0] >= 0.0) return {0.0, 0.0, 0.0};
        return {psi, 0.0, 0.0};  // antipode, axis degenerate
    }
    return {psi * g.q[1] / vn, psi * g.q[2] / vn, psi * g.q[3] / vn};
}

inline GroupElement exp_coordinates(GroupKind kind, std::span<const double> v) {
    if (kind == GroupKind::Circle) {
        if (v.size() != 1) throw std::invalid_argument("circle takes 1 coordinate");
        return GroupElement::circle(v[0]);
    }
    if (v.size() != 3) throw std::invalid_argument("unit quaternion takes 3 coordinates");
    double a = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (a < 1e-300) return identity(kind);
    double s = std::sin(a / 2.0) / a;
    return GroupElement::quaternion(std::cos(a / 2.0), s * v[0], s * v[1], s * v[2]);
}

// ---------------------------------------------------------------------------
// Irreducible representations.
// Circle: winding n in Z, d = 1, c = n^2.
// SU(2):  k = 2j in {0,1,...}, d = k+1, c = (k/2)(k/2+1) = k(k+2)/4.

struct Irrep {
    GroupKind kind = GroupKind::Circle;
    int label = 0;

    static Irrep circle(int n) { return {GroupKind::Circle, n}; }
    static Irrep su2(int k) {
        if (k < 0) throw std::invalid_argument("SU(2) label k must be >= 0");
        return {GroupKind::UnitQuaternion, k};
    }
    static Irrep trivial(GroupKind kind) { return {kind, 0}; }

    int dimension() const { return kind == GroupKind::Circle ? 1 : label + 1; }
    double casimir() const {
        if (kind == GroupKind::Circle) return double(label) * label;
        return 0.25 * label * (label + 2.0);
    }
};

// SU(2) character as a function of the class angle psi: chi_k(psi) =
// sin((k+1)psi/2)/sin(psi/2), with the limits at psi -> 0, 2pi.
inline double su2_character(int k, double psi) {
    double x = 0.5 * psi;
    double sx = std::sin(x);
    int m = k + 1;
    if (std::abs(sx) < 1e-7) return m * std::cos(m * x) / std::cos(x);
    return std::sin(m * x) / sx;
}

inline std::complex<double> character(const Irrep& rep, const GroupElement& g) {
    if (rep.kind != g.kind) throw std::invalid_argument("irrep/element kind mismatch");
    if (rep.kind == GroupKind::Circle)
        return std::exp(std::complex<double>(0.0, rep.label * g.angle));
    return {su2_character(rep.label, class_angle(g)), 0.0};
}

// ---------------------------------------------------------------------------
// Quadrature over the group (normalized Haar).

enum class QuadratureKind { FullGroup, ClassFunction };

struct QuadratureRule {
    GroupKind group = GroupKind::Circle;
    QuadratureKind kind = QuadratureKind::ClassFunction;
    std::vector<GroupElement> nodes;
    std::vector<double> weights;
    // Largest irrep label lam such that chi_lam * conj(chi_mu) is integrated
    // exactly for all labels <= lam (ClassFunction rules), or the largest
    // polynomial degree in matrix entries handled exactly (FullGroup rules).
    int resolution = 0;
};

// Class-function rule. Circle: uniform midpoint grid on (-pi, pi].
// SU(2): midpoint grid in the class angle with Weyl density (1/pi)sin^2(psi/2).
inline QuadratureRule class_quadrature(GroupKind kind, int resolution) {
    if (resolution < 8) throw std::invalid_argument("class_quadrature: resolution must be >= 8");
    QuadratureRule rule;
    rule.group = kind;
    rule.kind = QuadratureKind::ClassFunction;
    int n = resolution;
    rule.nodes.reserve(n);
    rule.weights.reserve(n);
    if (kind == GroupKind::Circle) {
        for (int j = 0; j < n; ++j) {
            double theta = -pi + (j + 0.5) * 2.0 * pi / n;
            rule.nodes.push_back(GroupElement::circle(theta));
            rule.weights.push_back(1.0 / n);
        }
        rule.resolution = (n - 1) / 2;
    } else {
        for (int j = 0; j < n; ++j) {
            double u = pi * (j + 0.5) / n;  // psi/2
            rule.nodes.push_back(GroupElement::quaternion(std::cos(u), std::sin(u), 0, 0));
            rule.weights.push_back(2.0 / n * std::sin(u) * std::sin(u));
        }
        rule.resolution = n - 3;
    }
    return rule;
}

namespace detail {

// Gauss-Legendre nodes/weights on [-1, 1].
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
}

}  // namespace detail

// Full-group rule exact for matrix-entry polynomials up to max_degree.
// Circle: uniform grid. SU(2): class-angle midpoint rule x sphere product rule
// (Gauss-Legendre in cos(polar) x uniform azimuth).
inline QuadratureRule group_quadrature(GroupKind kind, int max_degree) {
    if (max_degree < 1) throw std::invalid_argument("group_quadrature: max_degree must be >= 1");
    QuadratureRule rule;
    rule.group = kind;
    rule.kind = QuadratureKind::FullGroup;
    rule.resolution = max_degree;
    if (kind == GroupKind::Circle) {
        int n = max_degree + 1;
        for (int j = 0; j < n; ++j) {
            rule.nodes.push_back(GroupElement::circle(-pi + (j + 0.5) * 2.0 * pi / n));
            rule.weights.push_back(1.0 / n);
        }
        return rule;
    }
    int npsi = max_degree / 2 + 3;   // exact for e^{ilu}, |l| <= max_degree+2 < 2*npsi
    int nt = max_degree / 2 + 2;     // Gauss-Legendre, exact to degree 2*nt-1
    int nphi = max_degree + 2;
    std::vector<double> gx, gw;
    detail::gauss_legendre(nt, gx, gw);
    rule.nodes.reserve(size_t(npsi) * nt * nphi);
    rule.weights.reserve(size_t(npsi) * nt * nphi);
    for (int j = 0; j < npsi; ++j) {
        double u = pi * (j + 0.5) / npsi;
        double wu = 2.0 / npsi * std::sin(u) * std::sin(u);
        double su = std::sin(u), cu = std::cos(u);
        for (int a = 0; a < nt; ++a) {
            double ct = gx[a], st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
            double wt = gw[a] / 2.0;
            for (int p = 0; p < nphi; ++p) {
                double phi = 2.0 * pi * (p + 0.5) / nphi;
                rule.nodes.push_back(GroupElement::quaternion(
                    cu, su * st * std::cos(phi), su * st * std::sin(phi), su * ct));
                rule.weights.push_back(wu * wt / nphi);
            }
        }
    }
    return rule;
}

// ---------------------------------------------------------------------------
// Central functions in the character basis.
// Circle keys are windings n in Z; SU(2) keys are labels k >= 0.

struct ClassFunctionCoeffs {
    GroupKind kind = GroupKind::Circle;
    std::map<int, std::complex<double>> c;

    std::complex<double> eval(const GroupElement& g) const {
        std::complex<double> s = 0.0;
        for (const auto& [label, coeff] : c) s += coeff * character(Irrep{kind, label}, g);
        return s;
    }
};

}  // namespace heatgauge
