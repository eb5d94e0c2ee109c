#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "heatgauge/measure_mc.hpp"

using namespace heatgauge;
using Catch::Approx;

namespace {

// Regularized upper incomplete gamma Q(a, x) for chi-squared p-values.
double gammq(double a, double x) {
    auto gser = [&](double xx) {
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1;
            del *= xx / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-14) break;
        }
        return sum * std::exp(-xx + a * std::log(xx) - std::lgamma(a));
    };
    auto gcf = [&](double xx) {
        double b = xx + 1 - a, c = 1e300, d = 1 / b, h = d;
        for (int i = 1; i < 500; ++i) {
            double an = -i * (i - a);
            b += 2;
            d = an * d + b;
            if (std::abs(d) < 1e-300) d = 1e-300;
            c = b + an / c;
            if (std::abs(c) < 1e-300) c = 1e-300;
            d = 1 / d;
            double del = d * c;
            h *= del;
            if (std::abs(del - 1.0) < 1e-14) break;
        }
        return std::exp(-xx + a * std::log(xx) - std::lgamma(a)) * h;
    };
    if (x <= 0) return 1.0;
    return x < a + 1 ? 1.0 - gser(x) : gcf(x);
}

}  // namespace

TEST_CASE("action values and invariances") {
    auto lat = build({2, {2, 2}, 0, Boundary::Open});
    auto cfg = identity_config(lat, GroupKind::Circle);
    CHECK(action(lat, cfg, GroupKind::Circle, 1.0) == Approx(-std::log(1.772637)).epsilon(1e-5));

    // additivity: total action equals the sum of per-plaquette terms
    auto big = build({2, {4, 4}, 0, Boundary::Periodic});
    std::mt19937_64 rng(17);
    for (auto kind : {GroupKind::Circle, GroupKind::UnitQuaternion}) {
        auto c = identity_config(big, kind);
        for (auto& g : c) g = haar_sample(kind, rng);
        double total = 0.0;
        for (const auto& p : big.plaquettes)
            total -= log_kernel(kind, plaquette_product(c, p), 0.7);
        CHECK(action(big, c, kind, 0.7) == Approx(total).margin(1e-12));

        // gauge invariance
        std::vector<GroupElement> lam;
        for (int64_t s = 0; s < big.n_sites; ++s) lam.push_back(haar_sample(kind, rng));
        auto gc = gauge_transform(big, c, lam);
        CHECK(action(big, gc, kind, 0.7) ==
              Approx(action(big, c, kind, 0.7)).margin(1e-10));
    }
}

TEST_CASE("incremental action difference equals full recomputation") {
    auto lat = build({3, {3, 3, 3}, 0, Boundary::Periodic});
    for (auto kind : {GroupKind::Circle, GroupKind::UnitQuaternion}) {
        MCParams params;
        params.beta = 0.6;
        MetropolisSampler s(lat, kind, params, 99);
        for (int i = 0; i < 5; ++i) s.sweep();
        std::mt19937_64 rng(5);
        for (int trial = 0; trial < 25; ++trial) {
            int e = int(rng() % lat.edges.size());
            auto r = haar_sample(kind, rng);
            double s0 = s.full_action();
            double dS = s.delta_action(e, r);
            auto old = s.mutable_config()[e];
            s.mutable_config()[e] = multiply(r, old);
            CHECK(s.full_action() - s0 == Approx(dS).margin(1e-10));
            s.mutable_config()[e] = old;
        }
    }
}

TEST_CASE("acceptance approaches one in the flat-density limit") {
    auto lat = build({2, {4, 4}, 0, Boundary::Periodic});
    MCParams params;
    params.beta = 80.0;  // kernel nearly constant: trivial character dominates
    MetropolisSampler s(lat, GroupKind::Circle, params, 3);
    double acc = 0;
    for (int i = 0; i < 20; ++i) acc += s.sweep() / 20;
    CHECK(acc > 0.95);
}

TEST_CASE("proposal width auto-tunes into the acceptance band") {
    auto lat = build({2, {4, 4}, 0, Boundary::Periodic});
    MCParams params;
    params.beta = 0.05;  // sharply peaked density: initial width far too wide
    params.proposal_width = 3.0;
    MetropolisSampler s(lat, GroupKind::Circle, params, 12);
    s.thermalize(300);
    double acc = 0;
    for (int i = 0; i < 20; ++i) acc += s.sweep() / 20;
    CHECK(acc >= 0.2);
    CHECK(acc <= 0.8);
}

TEST_CASE("same seed gives a byte-identical chain") {
    auto lat = build({2, {3, 3}, 0, Boundary::Periodic});
    MCParams params;
    auto run = [&] {
        MetropolisSampler s(lat, GroupKind::UnitQuaternion, params, 321);
        for (int i = 0; i < 50; ++i) s.sweep();
        return s.config();
    };
    auto a = run(), b = run();
    for (size_t i = 0; i < a.size(); ++i)
        for (int c = 0; c < 4; ++c) CHECK(a[i].q[c] == b[i].q[c]);
}

TEST_CASE("single-plaquette holonomy histogram matches the density") {
    auto lat = build({2, {2, 2}, 0, Boundary::Open});
    MCParams params;
    params.beta = 1.0;
    MetropolisSampler s(lat, GroupKind::Circle, params, 777);
    s.thermalize(300);

    const int nbins = 32, nsamp = 100000;
    std::vector<int64_t> hist(nbins, 0);
    for (int i = 0; i < nsamp; ++i) {
        for (int k = 0; k < 5; ++k) s.sweep();
        double th = plaquette_product(s.config(), lat.plaquettes[0]).angle;
        int b = std::min(int((th + pi) / (2 * pi) * nbins), nbins - 1);
        hist[b] += 1;
    }
    auto kp = make_heat_kernel_params(GroupKind::Circle, 1.0);
    double chi2 = 0.0;
    for (int b = 0; b < nbins; ++b) {
        double p = 0.0;
        const int sub = 200;
        for (int j = 0; j < sub; ++j) {
            double th = -pi + (b + (j + 0.5) / sub) * 2 * pi / nbins;
            p += eval(GroupElement::circle(th), kp) / (sub * nbins);
        }
        double expect = nsamp * p;
        chi2 += (hist[b] - expect) * (hist[b] - expect) / expect;
    }
    double pval = gammq((nbins - 1) / 2.0, chi2 / 2.0);
    CHECK(pval > 0.01);
}

TEST_CASE("jackknife") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(5.0, 2.0);
    std::vector<double> v;
    for (int i = 0; i < 4000; ++i) v.push_back(n(rng));
    auto s = jackknife(v);
    CHECK(s.mean == Approx(5.0).margin(0.15));
    double naive = 2.0 / std::sqrt(4000.0);
    CHECK(s.stderr_ > naive / std::sqrt(2.0));
    CHECK(s.stderr_ < naive * 2.0);
    CHECK_THROWS_AS(jackknife(v, 10), std::invalid_argument);
    CHECK_THROWS_AS(jackknife(std::vector<double>(30, 1.0)), std::invalid_argument);
}

TEST_CASE("exact 2D Wilson values") {
    CHECK(exact_2d_wilson(Irrep::trivial(GroupKind::Circle), 7.0, 1.0) == 1.0);
    CHECK(exact_2d_wilson(Irrep::circle(1), 2.0, 1.0) == Approx(std::exp(-2.0)));
    CHECK(exact_2d_wilson(Irrep::su2(1), 1.0, 1.0) == Approx(std::exp(-0.75)));
}

TEST_CASE("2D open-boundary Wilson loops reproduce the exact area law") {
    auto lat = build({2, {8, 8}, 0, Boundary::Open});
    MCParams params;
    params.beta = 1.0;
    params.n_therm = 300;
    params.n_measure = 4000;
    params.measure_every = 2;
    params.seed = 4242;

    struct Case { int R, T; double area; };
    for (auto [R, T, area] : {Case{1, 1, 1}, Case{2, 1, 2}, Case{2, 2, 4}}) {
        auto s = expectation_wilson(lat, GroupKind::Circle, params, R, T, Irrep::circle(1));
        double exact = exact_2d_wilson(Irrep::circle(1), area, 1.0);
        INFO("R=" << R << " T=" << T << " mean=" << s.mean << " err=" << s.stderr_);
        CHECK(std::abs(s.mean - exact) <= 3 * s.stderr_);
    }

    // trivial representation: identically one
    params.n_measure = 100;
    params.n_therm = 10;
    auto triv = expectation_wilson(lat, GroupKind::Circle, params, 1, 1,
                                   Irrep::trivial(GroupKind::Circle));
    CHECK(triv.mean == Approx(1.0).margin(1e-14));
    CHECK(triv.stderr_ == Approx(0.0).margin(1e-14));

    // loop larger than the lattice is refused
    CHECK_THROWS_AS(expectation_wilson(lat, GroupKind::Circle, params, 9, 1, Irrep::circle(1)),
                    std::invalid_argument);
}

TEST_CASE("chain merge is deterministic and chain-count independent") {
    auto lat = build({2, {4, 4}, 0, Boundary::Periodic});
    MCParams params;
    params.n_therm = 50;
    params.n_measure = 60;
    params.seed = 5;
    auto measure = [&](const FieldConfig& cfg) {
        return std::vector<double>{wilson_observable(lat, cfg, 1, 1, Irrep::circle(1))};
    };
    params.n_chains = 2;
    auto two = run_chains(lat, GroupKind::Circle, params, measure);
    auto two_again = run_chains(lat, GroupKind::Circle, params, measure);
    CHECK(two == two_again);

    // equals the concatenation of single chains with the derived seeds
    params.n_chains = 1;
    auto a = run_chains(lat, GroupKind::Circle, params, measure);
    params.seed = 6;
    auto b = run_chains(lat, GroupKind::Circle, params, measure);
    a.insert(a.end(), b.begin(), b.end());
    CHECK(two == a);
}

TEST_CASE("2D correlator: distinct plaquettes are independent") {
    auto lat = build({2, {3, 8}, 0, Boundary::Open});
    MCParams params;
    params.beta = 1.0;
    params.n_therm = 300;
    params.n_measure = 6000;
    params.measure_every = 2;
    params.seed = 11;
    auto corr = temporal_correlator(lat, GroupKind::Circle, params, 3);
    CHECK(corr.C[0] > 0);
    for (int t = 1; t <= 3; ++t)
        CHECK(std::abs(corr.C[t]) <= 3 * corr.stderr_[t]);

    auto fit = mass_gap_fit(corr);
    CHECK_FALSE(fit.gap_defined);
}

TEST_CASE("3D correlator decays with a positive gap") {
    auto lat = build({3, {4, 4, 4}, 0, Boundary::Periodic});
    MCParams params;
    params.beta = 0.7;
    params.n_therm = 400;
    params.n_measure = 60000;
    params.measure_every = 2;
    params.seed = 1234;
    auto corr = temporal_correlator(lat, GroupKind::Circle, params, 2);
    INFO("C = " << corr.C[0] << ", " << corr.C[1] << " (" << corr.stderr_[1] << "), "
                << corr.C[2] << " (" << corr.stderr_[2] << ")");
    CHECK(corr.C[0] > 0);
    CHECK(corr.C[1] > 0);
    CHECK(corr.C[1] < corr.C[0]);
    CHECK(corr.C[2] < corr.C[1] + 3 * std::hypot(corr.stderr_[1], corr.stderr_[2]));
}

TEST_CASE("mass gap fit on synthetic correlators") {
    // exact single exponential
    CorrelatorResult c1;
    for (int t = 0; t <= 6; ++t) {
        c1.C.push_back(2.0 * std::exp(-0.8 * t));
        c1.stderr_.push_back(0.0);
    }
    auto f1 = mass_gap_fit(c1);
    CHECK(f1.m == Approx(0.8).margin(1e-6));
    CHECK(f1.gap_defined);
    for (size_t i = 0; i < f1.m_eff.size(); ++i) CHECK(f1.m_eff[i] == Approx(0.8).margin(1e-9));

    // two-state model: effective mass approaches the lower mass from above
    CorrelatorResult c2;
    for (int t = 0; t <= 14; ++t) {
        c2.C.push_back(std::exp(-0.5 * t) + 0.2 * std::exp(-1.5 * t));
        c2.stderr_.push_back(0.0);
    }
    auto f2 = mass_gap_fit(c2);
    REQUIRE(f2.m_eff.size() >= 12);
    CHECK(f2.m_eff[0] > f2.m_eff[5]);
    CHECK(f2.m_eff[11] == Approx(0.5).margin(1e-3));

    // fit refused on non-positive correlators
    CorrelatorResult c3;
    c3.C = {1.0, -0.01, 0.002, -0.003, 0.001};
    c3.stderr_ = {0.01, 0.01, 0.01, 0.01, 0.01};
    CHECK_FALSE(mass_gap_fit(c3).gap_defined);
}

TEST_CASE("csv writers") {
    ObservableSeries s;
    s.values = {0.5, 0.25};
    std::ostringstream os;
    write_observables_csv({{"plaquette", s}}, os);
    CHECK(os.str() == "sweep,observable,value\n0,plaquette,0.5\n1,plaquette,0.25\n");

    CorrelatorResult corr;
    corr.C = {1.0, 0.5};
    corr.stderr_ = {0.1, 0.05};
    std::ostringstream cs;
    write_correlator_csv(corr, cs);
    CHECK(cs.str() == "t,C,stderr\n0,1,0.1\n1,0.5,0.05\n");
}
