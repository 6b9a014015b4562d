#include "plateau/asymptotics.hpp"
#include "plateau/flow.hpp"

#include <doctest.h>

#include <cmath>

using namespace plateau;

namespace {

struct Setup {
    HermiteSeries phi = series_of(named_function("poly:1,-1,2/3"), 16);
    HermiteSeries sig = series_of(named_function("relu"), 16);
    KernelPair kp = make_kernels(phi, sig);
    MeanFieldState st = init_meanfield(8, WeightLaw::parse("uniform(-1.7320508075688772,1.7320508075688772)"), 0);
    AsymptoticParams params(double eps) const { return AsymptoticParams::from(phi, sig, st.a, st.weights, eps); }
};

MeanFieldState flow_to(const Setup &s, double eps, double t) {
    MeanFieldSystem sys(s.kp, s.st.weights, eps, s.phi.sum_sq());
    FlowConfig cfg;
    cfg.eps = eps;
    cfg.rtol = 1e-11;
    cfg.atol = 1e-13;
    Trajectory tr = integrate(sys, sys.pack(s.st), 0.0, {t}, cfg);
    return sys.unpack(tr.y.back().data());
}

} // namespace

TEST_CASE("parameters from the initial weights") {
    Setup s;
    AsymptoticParams p = s.params(1e-4);
    double tot = 0;
    for (std::size_t i = 0; i < p.a_perp_init.size(); ++i)
        tot += p.weights[i] * p.a_perp_init[i];
    CHECK(std::abs(tot) < 1e-12);
    CHECK(p.sigma1 == doctest::Approx(0.5));
    CHECK(p.phi1 == doctest::Approx(-1.0));
    CHECK(p.constant_mode());
    CHECK(p.a_limit() == doctest::Approx(p.phi0 / p.sigma0));
    CHECK_THROWS_AS(AsymptoticParams::from(s.phi, s.sig, {1.0, 2.0}, {1.0}, 1e-3), std::invalid_argument);
}

TEST_CASE("first scale: endpoints and the integrated flow") {
    Setup s;
    const double eps = 1e-4;
    AsymptoticParams p = s.params(eps);
    CHECK(phase1_mean(p, 0.0) == doctest::Approx(p.a_mean_init));
    CHECK(phase1_mean(p, 1e4) == doctest::Approx(p.phi0 / p.sigma0));
    for (double t1 : {1.0, 2.0, 5.0}) {
        MeanFieldState st = flow_to(s, eps, eps * t1);
        double mean = 0;
        for (std::size_t i = 0; i < st.m(); ++i)
            mean += st.weights[i] * st.a[i];
        CHECK(std::abs(mean - phase1_mean(p, t1)) < 10 * eps * t1);
    }
}

TEST_CASE("odd activation skips the first scale") {
    HermiteSeries phi = series_of(named_function("poly:1,-1,2/3"), 8);
    HermiteSeries e = series_of(named_function("erf"), 8);
    AsymptoticParams p = AsymptoticParams::from(phi, e, {1.0, -0.5}, {0.5, 0.5}, 1e-3);
    CHECK(!p.constant_mode());
    CHECK_THROWS_AS(phase1_mean(p, 1.0), ConstantModeSkipped);
    CHECK(p.a_limit() == doctest::Approx(0.25));
    auto tr = predicted_transitions(p, 2);
    CHECK(std::isnan(tr[0].center));
}

TEST_CASE("second scale: closed form and agreement with the flow") {
    Setup s;
    AsymptoticParams p = s.params(1e-4);
    Profiles z = phase2_solution(p, 0.0);
    for (std::size_t i = 0; i < z.a.size(); ++i) {
        CHECK(z.a[i] == doctest::Approx(p.a_limit() + p.a_perp_init[i]));
        CHECK(z.s[i] == 0.0);
    }
    double slope = p.sigma1 * p.phi1 * p.a_limit();
    Profiles one = phase2_solution(p, 1.0), two = phase2_solution(p, 2.0);
    double m1 = 0, m2 = 0;
    for (std::size_t i = 0; i < one.s.size(); ++i) {
        m1 += p.weights[i] * one.s[i];
        m2 += p.weights[i] * two.s[i];
    }
    CHECK(m2 - m1 == doctest::Approx(slope));

    std::vector<double> errs;
    for (double eps : {1e-3, 1e-4, 1e-5}) {
        AsymptoticParams q = s.params(eps);
        double worst = 0;
        for (double t2 : {0.5, 1.5, 3.0}) {
            MeanFieldState st = flow_to(s, eps, std::sqrt(eps) * t2);
            Profiles pr = phase2_solution(q, t2);
            for (std::size_t i = 0; i < st.m(); ++i) {
                worst = std::max(worst, std::abs(st.a[i] - pr.a[i]) / std::max(1.0, std::abs(pr.a[i])));
                double sp = std::sqrt(eps) * pr.s[i];
                worst = std::max(worst, std::abs(st.s[i] - sp) / std::max(std::sqrt(eps), std::abs(sp)));
            }
        }
        errs.push_back(worst);
    }
    CHECK(errs[1] < errs[0]);
    CHECK(errs[2] < errs[1]);
}

TEST_CASE("third scale: limits and the Bernoulli equation") {
    Setup s;
    AsymptoticParams p = s.params(1e-6);
    const double s1 = std::abs(p.sigma1), f1 = std::abs(p.phi1), n2 = p.a_perp_norm2;
    CHECK(phase3_lambda(p, 60.0) == doctest::Approx(std::sqrt(f1 / (s1 * n2))).epsilon(1e-10));
    CHECK(phase3_lambda(p, -40.0) / (0.5 * std::exp(s1 * f1 * -40.0)) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::isfinite(phase3_lambda(p, -5000.0)));

    const double h = 1e-5;
    for (double t3 = -6; t3 <= 6; t3 += 0.5) {
        double lam = phase3_lambda(p, t3);
        double fd = (phase3_lambda(p, t3 + h) - phase3_lambda(p, t3 - h)) / (2 * h);
        CHECK(std::abs(fd - s1 * (f1 - s1 * n2 * lam * lam) * lam) < 1e-7);
        double b = bernoulli_lambda(s1, f1, s1 * n2, phase3_lambda(p, 0.0), t3);
        CHECK(b == doctest::Approx(lam).epsilon(1e-12));
    }
    Profiles pr = phase3_solution(p, 1.0);
    double lam = phase3_lambda(p, 1.0);
    for (std::size_t i = 0; i < pr.a.size(); ++i) {
        CHECK(pr.a[i] == doctest::Approx(lam * p.a_perp_init[i]));
        CHECK(pr.s[i] == doctest::Approx(-lam * p.a_perp_init[i]));
    }
}

TEST_CASE("third scale rejects degenerate amplitudes") {
    Setup s;
    AsymptoticParams p = AsymptoticParams::from(s.phi, s.sig, {1.0, 1.0}, {0.5, 0.5}, 1e-4);
    CHECK_THROWS_AS(phase3_lambda(p, 0.0), std::domain_error);
    HermiteSeries nolin = series_of(named_function("poly:1,0,1"), 8);
    AsymptoticParams q = AsymptoticParams::from(nolin, s.sig, {1.0, -1.0}, {0.5, 0.5}, 1e-4);
    CHECK_THROWS_AS(phase3_lambda(q, 0.0), std::domain_error);
}

TEST_CASE("matching of the second and third scales") {
    Setup s;
    std::vector<double> errs;
    for (double eps : {1e-4, 1e-6, 1e-8}) {
        AsymptoticParams p = s.params(eps);
        double shift = std::log(1 / eps) / (4 * std::abs(p.sigma1 * p.phi1));
        double worst = 0;
        for (double t3 = -3; t3 <= -1; t3 += 0.5) {
            Profiles two = phase2_solution(p, t3 + shift);
            Profiles three = phase3_solution(p, t3);
            double diff = 0, scale = 0;
            for (std::size_t i = 0; i < two.a.size(); ++i) {
                double a3 = std::pow(eps, -0.25) * three.a[i];
                diff = std::max(diff, std::abs(two.a[i] - a3));
                scale = std::max(scale, std::abs(a3));
            }
            worst = std::max(worst, diff / scale);
        }
        errs.push_back(worst);
    }
    CHECK(errs[1] < errs[0]);
    CHECK(errs[2] < errs[1]);
    // mismatch shrinks like eps^{1/4}
    CHECK(errs[1] / errs[2] == doctest::Approx(std::sqrt(10.0)).epsilon(0.2));
}

TEST_CASE("piecewise risk") {
    Setup s;
    const double eps = 1e-6;
    AsymptoticParams p = s.params(eps);
    double gap = p.phi0 - p.sigma0 * p.a_mean_init;
    CHECK(predicted_risk(p, s.phi, 0.0) == doctest::Approx(0.5 * gap * gap + 13.0 / 18.0));
    CHECK(predicted_risk(p, s.phi, std::pow(eps, 0.75)) == doctest::Approx(13.0 / 18.0));
    auto w = piece_windows(p);
    REQUIRE(w.size() == 3);
    CHECK(w[0].t_hi == w[1].t_lo);
    CHECK(w[1].t_hi == w[2].t_lo);
    CHECK(w[0].t_hi < w[1].t_hi);
    CHECK(w[1].t_hi < w[2].t_hi);
    double t_right = w[2].t_hi;
    CHECK(predicted_risk(p, s.phi, t_right) < 0.5);
    // far beyond the level-1 center
    AsymptoticParams late = p;
    double tl = std::sqrt(eps) * (std::log(1 / eps) / 2.0 + 80.0);
    CHECK(predicted_risk(late, s.phi, tl) == doctest::Approx(2.0 / 9.0).epsilon(1e-9));
    // left edge of piece 3 sits on the plateau up to eps^{1/4}
    double edge = predicted_risk(p, s.phi, w[2].t_lo * (1 + 1e-12));
    CHECK(std::abs(edge - 13.0 / 18.0) < std::pow(eps, 0.25));
    CHECK_THROWS(predicted_risk(p, s.phi, -1.0));
}

TEST_CASE("transition table") {
    Setup s;
    AsymptoticParams p = s.params(1e-6);
    auto tr = predicted_transitions(p, 3);
    REQUIRE(tr.size() == 4);
    CHECK(tr[1].center == doctest::Approx(0.5e-3 * std::log(1e6)).epsilon(1e-10));
    CHECK(tr[1].center == doctest::Approx(6.9078e-3).epsilon(1e-4));
    CHECK(tr[2].exponent == doctest::Approx(0.25));
    CHECK(tr[3].exponent == doctest::Approx(1.0 / 6.0));
    CHECK(std::isnan(tr[2].center));
    AsymptoticParams h = s.params(0.5e-6);
    double ratio = predicted_transitions(h, 1)[1].center / tr[1].center;
    CHECK(ratio == doctest::Approx(std::sqrt(0.5) * (1 + std::log(2.0) / std::log(1e6))).epsilon(1e-12));
    CHECK_THROWS(predicted_transitions(p, 0));
}

TEST_CASE("exponent table") {
    ExponentRow r2 = exponents(2), r3 = exponents(3);
    CHECK(r2.beta == doctest::Approx(1.0 / 6));
    CHECK(r2.mu == doctest::Approx(1.0 / 4));
    CHECK(r2.nu == doctest::Approx(1.0 / 3));
    CHECK(r2.tau_exponent == doctest::Approx(1.0 / 12));
    CHECK(r3.beta == doctest::Approx(1.0 / 8));
    CHECK(r3.mu == doctest::Approx(1.0 / 6));
    CHECK(r3.nu == doctest::Approx(1.0 / 4));
    CHECK(r3.tau_exponent == doctest::Approx(1.0 / 12));
    auto t = exponent_table(6);
    REQUIRE(t.size() == 5);
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(t[i].mu < t[i].nu);
        CHECK(t[i].omega == doctest::Approx(t[i].level * t[i].beta));
        if (i > 0) {
            CHECK(t[i].beta < t[i - 1].beta);
            CHECK(t[i].omega > t[i - 1].omega);
            CHECK(t[i].mu < t[i - 1].mu);
            CHECK(t[i].nu < t[i - 1].nu);
        }
    }
    CHECK_THROWS(exponents(0));
}
