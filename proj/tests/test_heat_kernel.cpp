#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "heatgauge/heat_kernel.hpp"

using namespace heatgauge;
using Catch::Approx;

namespace {
std::mt19937_64 test_rng(uint64_t seed = 1234) { return std::mt19937_64(seed); }

// Independent brute-force tail: direct summation far past the cutoff.
double brute_tail(GroupKind kind, int cutoff, double beta) {
    double s = 0.0;
    for (int l = cutoff + 1; l <= cutoff + 4000; ++l)
        s += detail::series_term_bound(kind, l, beta);
    return s;
}
}  // namespace

TEST_CASE("truncation cutoff is certified and monotone") {
    // Circle, beta=1, tol=1e-12: n=6 suffices since 2 sum_{n>=7} e^{-n^2} < 2e-21.
    int c = truncation_cutoff(GroupKind::Circle, 1.0, 1e-12);
    CHECK(c <= 6);
    CHECK(brute_tail(GroupKind::Circle, c, 1.0) <= 1e-12);

    for (auto kind : {GroupKind::Circle, GroupKind::UnitQuaternion}) {
        for (double beta : {0.25, 0.5, 1.0}) {
            int c1 = truncation_cutoff(kind, beta, 1e-12);
            CHECK(brute_tail(kind, c1, beta) <= 1e-12);
            // looser tolerance -> cutoff non-increasing
            CHECK(truncation_cutoff(kind, beta, 1e-6) <= c1);
            // doubled beta -> cutoff non-increasing
            CHECK(truncation_cutoff(kind, 2 * beta, 1e-12) <= c1);
        }
    }
}

TEST_CASE("params reject impractical beta") {
    CHECK_THROWS_AS(make_heat_kernel_params(GroupKind::Circle, 1e-5), std::invalid_argument);
    CHECK_THROWS_AS(make_heat_kernel_params(GroupKind::Circle, -1.0), std::invalid_argument);
}

TEST_CASE("circle kernel values against the wrapped-Gaussian identity") {
    auto p = make_heat_kernel_params(GroupKind::Circle, 1.0);
    // direct series sum_{n in Z} e^{-n^2} and the alternating version
    double k0 = 1.0, kpi = 1.0;
    for (int n = 1; n <= 40; ++n) {
        k0 += 2 * std::exp(-double(n) * n);
        kpi += 2 * std::exp(-double(n) * n) * ((n % 2) ? -1.0 : 1.0);
    }
    CHECK(eval(identity(GroupKind::Circle), p) == Approx(k0).epsilon(1e-12));
    CHECK(eval(identity(GroupKind::Circle), p) == Approx(1.772637).epsilon(1e-6));
    CHECK(eval(GroupElement::circle(pi), p) == Approx(kpi).epsilon(1e-12));
    CHECK(eval(GroupElement::circle(pi), p) == Approx(0.300625).epsilon(1e-5));
}

TEST_CASE("kernel integrates to one and stays positive and central") {
    auto rng = test_rng();
    for (auto kind : {GroupKind::Circle, GroupKind::UnitQuaternion}) {
        for (double beta : {0.25, 0.5, 1.0}) {
            auto p = make_heat_kernel_params(kind, beta);
            auto rule = class_quadrature(kind, 4 * (p.cutoff + 4));
            double integral = 0.0;
            for (size_t i = 0; i < rule.nodes.size(); ++i) {
                double v = eval(rule.nodes[i], p);
                CHECK(v > 0.0);
                integral += rule.weights[i] * v;
            }
            CHECK(integral == Approx(1.0).margin(1e-10));
            for (int i = 0; i < 20; ++i) {
                auto g = haar_sample(kind, rng), h = haar_sample(kind, rng);
                auto conj = multiply(multiply(h, g), inverse(h));
                CHECK(eval(conj, p) == Approx(eval(g, p)).margin(1e-10));
            }
        }
    }
}

TEST_CASE("K(e, beta) strictly decreasing in beta") {
    double prev = 1e300;
    for (double beta : {0.1, 0.2, 0.5, 1.0, 2.0}) {
        auto p = make_heat_kernel_params(GroupKind::UnitQuaternion, beta);
        double v = eval(identity(GroupKind::UnitQuaternion), p);
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("log_grad matches central finite differences") {
    auto rng = test_rng(77);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    SECTION("circle") {
        auto p = make_heat_kernel_params(GroupKind::Circle, 1.0);
        CHECK(log_grad(identity(GroupKind::Circle), p)[0] == 0.0);
        for (int i = 0; i < 100; ++i) {
            double th = pi * u(rng);
            double h = 1e-6;
            double fd = (log_eval(GroupElement::circle(th + h), p) -
                         log_eval(GroupElement::circle(th - h), p)) / (2 * h);
            double an = log_grad(GroupElement::circle(th), p)[0];
            CHECK(an == Approx(fd).epsilon(1e-6).margin(1e-9));
            // oddness
            CHECK(log_grad(GroupElement::circle(-th), p)[0] == Approx(-an).margin(1e-12));
        }
        // explicit spot check at theta = 1
        double h = 1e-6;
        double fd = (log_eval(GroupElement::circle(1.0 + h), p) -
                     log_eval(GroupElement::circle(1.0 - h), p)) / (2 * h);
        CHECK(log_grad(GroupElement::circle(1.0), p)[0] == Approx(fd).epsilon(1e-6));
    }

    SECTION("unit quaternion") {
        auto p = make_heat_kernel_params(GroupKind::UnitQuaternion, 0.5);
        auto z = log_grad(identity(GroupKind::UnitQuaternion), p);
        CHECK(z[0] == 0.0);
        for (int i = 0; i < 100; ++i) {
            std::vector<double> v{1.5 * u(rng), 1.5 * u(rng), 1.5 * u(rng)};
            auto g = exp_coordinates(GroupKind::UnitQuaternion, v);
            auto grad = log_grad(g, p);
            for (int c = 0; c < 3; ++c) {
                auto vp = v, vm = v;
                double h = 1e-6;
                vp[c] += h;
                vm[c] -= h;
                double fd = (log_eval(exp_coordinates(GroupKind::UnitQuaternion, vp), p) -
                             log_eval(exp_coordinates(GroupKind::UnitQuaternion, vm), p)) /
                            (2 * h);
                CHECK(grad[c] == Approx(fd).epsilon(2e-6).margin(1e-8));
            }
        }
    }
}

TEST_CASE("coefficient convolution algebra") {
    for (auto kind : {GroupKind::Circle, GroupKind::UnitQuaternion}) {
        auto quarter = heat_kernel_coeffs(make_heat_kernel_params(kind, 0.25));
        auto half = heat_kernel_coeffs(make_heat_kernel_params(kind, 0.5));
        auto conv = convolve_coeffs(quarter, quarter);
        for (const auto& [l, c] : conv.c) {
            auto it = half.c.find(l);
            if (it == half.c.end()) continue;
            CHECK(std::abs(c - it->second) < 1e-14);
        }
        // constant function (trivial rep only) is the convolution identity
        ClassFunctionCoeffs one;
        one.kind = kind;
        one.c[0] = 1.0;
        auto idconv = convolve_coeffs(one, half);
        for (const auto& [l, c] : idconv.c) CHECK(std::abs(c - half.c.at(l)) < 1e-15);
    }
}

TEST_CASE("circle numeric convolution on a 512 grid") {
    auto p4 = make_heat_kernel_params(GroupKind::Circle, 0.25);
    auto p2 = make_heat_kernel_params(GroupKind::Circle, 0.5);
    const int N = 512;
    double maxerr = 0.0;
    for (double sep : {0.0, 0.3, 1.1, 2.7}) {
        double s = 0.0;
        for (int j = 0; j < N; ++j) {
            double x = -pi + (j + 0.5) * 2 * pi / N;
            s += eval(GroupElement::circle(sep - x), p4) * eval(GroupElement::circle(x), p4) / N;
        }
        maxerr = std::max(maxerr, std::abs(s - eval(GroupElement::circle(sep), p2)));
    }
    CHECK(maxerr < 1e-10);
}

TEST_CASE("convolution check (semigroup) via full-group quadrature") {
    auto rng = test_rng(5150);
    for (auto kind : {GroupKind::Circle, GroupKind::UnitQuaternion}) {
        int deg = truncation_cutoff(kind, 0.25, 1e-12) * 2 + 2;
        auto rule = group_quadrature(kind, deg);
        auto e = identity(kind);
        CHECK(convolution_check(kind, 0.5, 0.5, e, e, rule) < 1e-10);
        for (int i = 0; i < 20; ++i) {
            auto g = haar_sample(kind, rng), h = haar_sample(kind, rng);
            CHECK(convolution_check(kind, 0.25, 0.25, g, h, rule) < 1e-8);
            CHECK(convolution_check(kind, 0.25, 0.5, g, h, rule) < 1e-8);
        }
        // under-resolved rule must be rejected
        auto tiny = group_quadrature(kind, 2);
        CHECK_THROWS_AS(convolution_check(kind, 0.25, 0.25, e, e, tiny), std::invalid_argument);
    }
}

TEST_CASE("beta schedule") {
    CHECK(beta_schedule(1.0, BetaStep::SquareToHalfSquare) == Approx(0.25));
    CHECK(beta_schedule(1.0, BetaStep::SquareToRect) == Approx(0.5));
    CHECK(beta_schedule(0.5, BetaStep::RectToSquare) == Approx(1.0));
    // two half-square convolutions then one rect convolution reproduce beta=1
    double bh = beta_schedule(1.0, BetaStep::SquareToHalfSquare);
    CHECK(bh + bh == Approx(beta_schedule(1.0, BetaStep::SquareToRect)));
    CHECK(beta_schedule(bh + bh, BetaStep::RectToSquare) == Approx(1.0));
}

TEST_CASE("wrapped Gaussian oracle") {
    CHECK(wrapped_gaussian_oracle(0.0, 0.5) == Approx(std::sqrt(2 * pi)).epsilon(1e-5));
    CHECK(wrapped_gaussian_oracle(2.0, 0.5) == Approx(0.3395).epsilon(1e-3));
    // Poisson-summation identity: series and theta form computed independently
    for (double beta : {0.05, 0.1, 0.5, 1.0, 2.0}) {
        auto p = make_heat_kernel_params(GroupKind::Circle, beta);
        double maxerr = 0.0;
        for (int i = 0; i < 1024; ++i) {
            double th = -pi + (i + 0.5) * 2 * pi / 1024;
            maxerr = std::max(maxerr,
                              std::abs(eval(GroupElement::circle(th), p) -
                                       wrapped_gaussian_oracle(th, beta)));
        }
        CHECK(maxerr < 1e-10);
    }
}

TEST_CASE("su2 theta form agrees with the character series") {
    for (double beta : {0.3, 0.5, 1.0}) {
        auto p = make_heat_kernel_params(GroupKind::UnitQuaternion, beta);
        for (double psi : {0.2, 0.9, 2.0, 3.5, 5.0}) {
            auto g = GroupElement::quaternion(std::cos(psi / 2), std::sin(psi / 2), 0, 0);
            CHECK(su2_theta_log(psi, beta) == Approx(std::log(eval(g, p))).margin(1e-10));
        }
    }
}

TEST_CASE("cc_distance short-time calibration") {
    // lim_{beta->0} -4 beta ln[K(g,beta)/K(e,beta)] = d(g)^2, extrapolated
    // from beta in {0.02, 0.01, 0.005} (the correction is linear in beta).
    auto check_cal = [](GroupKind kind, double d) {
        double v1 = 0, v2 = 0;
        double vals[3];
        int i = 0;
        for (double b : {0.02, 0.01, 0.005}) {
            double lr = stable_log_eval(kind, d, b) - stable_log_eval(kind, 1e-9, b);
            vals[i++] = -4.0 * b * lr;
        }
        v1 = vals[1];
        v2 = vals[2];
        double extrap = 2 * v2 - v1;
        CHECK(std::abs(extrap - d * d) / (d * d) <= 0.02);
    };
    check_cal(GroupKind::Circle, 1.2);
    check_cal(GroupKind::Circle, 2.5);
    check_cal(GroupKind::UnitQuaternion, 0.5);
    check_cal(GroupKind::UnitQuaternion, 1.0);
    check_cal(GroupKind::UnitQuaternion, 2.0);
}

TEST_CASE("two-sided Gaussian bound fit") {
    auto circ = gaussian_bound_check(GroupKind::Circle, {0.1, 0.2, 0.5}, 200);
    CHECK(circ.pass);
    CHECK(circ.c2 < 4.0);
    CHECK(circ.c4 > 4.0);
    CHECK(circ.c1 > 0.0);
    CHECK(circ.c1 <= circ.c3);

    auto su2 = gaussian_bound_check(GroupKind::UnitQuaternion, {0.1, 0.2, 0.5}, 200);
    CHECK(su2.pass);
    CHECK(su2.c1 > 0.0);
    CHECK(su2.c1 <= su2.c3);
}
