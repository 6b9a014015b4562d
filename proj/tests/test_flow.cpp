#include "plateau/flow.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace plateau;

namespace {

const char *kPhi = "poly:1,-1,2/3";
const double kPhiNorm2 = 1.0 + 1.0 + 4.0 / 9.0;

KernelPair relu_poly(int K = 16) {
    return make_kernels(series_of(named_function(kPhi), K), series_of(named_function("relu"), K));
}

FullState random_full(std::size_t m, std::size_t d, unsigned long long seed) {
    FullState st = init_full(m, d, WeightLaw::parse("uniform(-1.5,1.5)"), seed);
    // tilt rows towards u_star so s is not tiny
    std::mt19937_64 g(seed + 99);
    std::uniform_real_distribution<double> U(-0.8, 0.8);
    for (std::size_t i = 0; i < m; ++i) {
        double *r = st.row(i);
        r[0] += U(g);
        double n = 0;
        for (std::size_t k = 0; k < d; ++k)
            n += r[k] * r[k];
        for (std::size_t k = 0; k < d; ++k)
            r[k] /= std::sqrt(n);
    }
    return st;
}

double dotv(const double *x, const double *y, std::size_t n) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
        s += x[i] * y[i];
    return s;
}

} // namespace

TEST_CASE("initialization examples") {
    MeanFieldState a = init_meanfield(3, WeightLaw::parse("atoms(1,-1,1)"), 5);
    CHECK(a.a == std::vector<double>{1, -1, 1});
    CHECK(a.s == std::vector<double>{0, 0, 0});
    CHECK(a.weights[0] == doctest::Approx(1.0 / 3));

    MeanFieldState b = init_meanfield(2, WeightLaw::parse("uniform(0.5,1.5)"), 11);
    for (double v : b.a)
        CHECK((v >= 0.5 && v <= 1.5));

    MeanFieldState r = init_meanfield(1000, WeightLaw::parse("rademacher"), 1);
    for (double v : r.a)
        CHECK(std::abs(v) == 1.0);

    CHECK_THROWS_AS(WeightLaw::parse("normal(0,1)"), std::invalid_argument);
    CHECK_THROWS_AS(WeightLaw::parse("uniform(2,1)"), std::invalid_argument);
    CHECK(WeightLaw::parse(WeightLaw::parse("uniform(-1,2)").str()).hi == 2.0);
}

TEST_CASE("sphere initialization statistics") {
    const std::size_t m = 1000, d = 1000;
    FullState st = init_full(m, d, WeightLaw::parse("rademacher"), 42);
    double mean = 0, sq = 0, worst = 0;
    for (std::size_t i = 0; i < m; ++i) {
        double s = dotv(st.u_star.data(), st.row(i), d);
        mean += s;
        sq += s * s;
        worst = std::max(worst, std::abs(std::sqrt(dotv(st.row(i), st.row(i), d)) - 1.0));
    }
    mean /= m;
    double sd = std::sqrt(sq / m - mean * mean);
    CHECK(std::abs(mean) < 3.0 / std::sqrt(double(m * d)));
    CHECK(std::abs(sd * std::sqrt(double(d)) - 1.0) < 0.1);
    CHECK(worst < 1e-14);
}

TEST_CASE("full flow at mutually orthogonal neurons orthogonal to the target") {
    KernelPair kp = relu_poly();
    const std::size_t m = 3, d = 5;
    const double eps = 0.01;
    FullState st;
    st.m = m;
    st.d = d;
    st.a = {0.3, -1.2, 0.7};
    st.u.assign(m * d, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        st.row(i)[i + 1] = 1.0;
    st.u_star.assign(d, 0.0);
    st.u_star[0] = 1.0;
    FullState dt = rhs_full(st, kp, eps);
    double s0 = std::sqrt(kp.u[0]);
    double p0 = kp.v[0] / s0, U1 = kernel_eval(kp, KernelFn::U, 1.0);
    double sum = std::accumulate(st.a.begin(), st.a.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double hand = (s0 * p0 - (s0 * s0 * (sum - st.a[i]) + U1 * st.a[i]) / m) / eps;
        CHECK(dt.a[i] == doctest::Approx(hand).epsilon(1e-12));
    }
}

TEST_CASE("single neuron with linear target and activation") {
    HermiteSeries he1 = series_of(named_function("he:1"), 4);
    KernelPair kp = make_kernels(he1, he1);
    FullState st;
    st.m = 1;
    st.d = 3;
    st.a = {1.0};
    st.u = {0.0, 1.0, 0.0};
    st.u_star = {1.0, 0.0, 0.0};
    FullState dt = rhs_full(st, kp, 1.0);
    CHECK(dotv(dt.u.data(), st.u_star.data(), 3) == doctest::Approx(1.0));
    ReducedState rd = rhs_reduced(gram_of(st), kp, 1.0);
    CHECK(rd.s[0] == doctest::Approx(1.0));
}

TEST_CASE("reduced right side is the Gram derivative of the full right side") {
    KernelPair kp = relu_poly();
    const std::size_t m = 4, d = 7;
    for (unsigned long long seed : {1ull, 2ull, 3ull}) {
        FullState st = random_full(m, d, seed);
        FullState df = rhs_full(st, kp, 0.05);
        ReducedState dr = rhs_reduced(gram_of(st), kp, 0.05);
        for (std::size_t i = 0; i < m; ++i) {
            CHECK(dr.a[i] == doctest::Approx(df.a[i]).epsilon(1e-12));
            double sdot = dotv(st.u_star.data(), df.row(i), d);
            CHECK(std::abs(dr.s[i] - sdot) < 1e-12);
            for (std::size_t j = 0; j < m; ++j) {
                double rdot = i == j ? 0.0 : dotv(df.row(i), st.row(j), d) + dotv(st.row(i), df.row(j), d);
                CHECK(std::abs(dr.r(i, j) - rdot) < 1e-12);
            }
            // tangential
            CHECK(std::abs(dotv(df.row(i), st.row(i), d)) < 1e-13);
        }
    }
}

TEST_CASE("off-diagonal Gram velocity at the origin for two neurons") {
    KernelPair kp = relu_poly();
    ReducedState st = reduced_at_origin({0.8, -1.3});
    ReducedState dr = rhs_reduced(st, kp, 1.0);
    double s1sq = kp.u[1];
    CHECK(dr.r(0, 1) == doctest::Approx(-0.8 * -1.3 * s1sq).epsilon(1e-12));
    CHECK(dr.r(1, 0) == dr.r(0, 1));
    CHECK(dr.R[0] == 0.0);
    CHECK(rperp_offdiag(st) == 0.0);
}

TEST_CASE("permutation equivariance") {
    KernelPair kp = relu_poly();
    FullState st = random_full(3, 6, 8);
    ReducedState rs = gram_of(st);
    ReducedState sw = rs;
    std::swap(sw.a[0], sw.a[1]);
    std::swap(sw.s[0], sw.s[1]);
    for (std::size_t k = 0; k < 3; ++k) {
        std::swap(sw.R[0 * 3 + k], sw.R[1 * 3 + k]);
    }
    for (std::size_t k = 0; k < 3; ++k)
        std::swap(sw.R[k * 3 + 0], sw.R[k * 3 + 1]);
    ReducedState d0 = rhs_reduced(rs, kp, 0.1), d1 = rhs_reduced(sw, kp, 0.1);
    CHECK(d1.a[0] == doctest::Approx(d0.a[1]).epsilon(1e-13));
    CHECK(d1.s[0] == doctest::Approx(d0.s[1]).epsilon(1e-13));
    CHECK(d1.s[2] == doctest::Approx(d0.s[2]).epsilon(1e-13));
    CHECK(d1.r(0, 2) == doctest::Approx(d0.r(1, 2)).epsilon(1e-13));

    MeanFieldState mf{{0.4, -0.9, 1.1}, {0.2, -0.3, 0.5}, {0.2, 0.5, 0.3}};
    MeanFieldState mw{{1.1, -0.9, 0.4}, {0.5, -0.3, 0.2}, {0.3, 0.5, 0.2}};
    MeanFieldState e0 = rhs_meanfield(mf, kp, 0.1), e1 = rhs_meanfield(mw, kp, 0.1);
    CHECK(e1.a[0] == doctest::Approx(e0.a[2]).epsilon(1e-13));
    CHECK(e1.s[2] == doctest::Approx(e0.s[0]).epsilon(1e-13));
    CHECK(e1.s[1] == doctest::Approx(e0.s[1]).epsilon(1e-13));
}

TEST_CASE("mean-field right side is the weighted gradient of the risk") {
    KernelPair kp = relu_poly();
    const double eps = 0.03, h = 1e-6;
    std::mt19937_64 g(5);
    std::uniform_real_distribution<double> A(-1.5, 1.5), S(-0.9, 0.9), W(0.2, 1.0);
    for (int rep = 0; rep < 5; ++rep) {
        MeanFieldState st;
        double tot = 0;
        for (int i = 0; i < 5; ++i) {
            st.a.push_back(A(g));
            st.s.push_back(S(g));
            st.weights.push_back(W(g));
            tot += st.weights.back();
        }
        for (double &w : st.weights)
            w /= tot;
        MeanFieldState dt = rhs_meanfield(st, kp, eps);
        for (int i = 0; i < 5; ++i) {
            auto p = st, q = st;
            p.a[i] += h;
            q.a[i] -= h;
            double ga = (risk_meanfield(p, kp, kPhiNorm2) - risk_meanfield(q, kp, kPhiNorm2)) / (2 * h);
            CHECK(std::abs(dt.a[i] + ga / (eps * st.weights[i])) < 1e-5 * (1 + std::abs(dt.a[i])));
            p = st;
            q = st;
            p.s[i] += h;
            q.s[i] -= h;
            double gs = (risk_meanfield(p, kp, kPhiNorm2) - risk_meanfield(q, kp, kPhiNorm2)) / (2 * h);
            double want = -(1 - st.s[i] * st.s[i]) * gs / st.weights[i];
            CHECK(std::abs(dt.s[i] - want) < 1e-5 * (1 + std::abs(want)));
        }
    }
}

TEST_CASE("full right side is minus m times the tangential gradient") {
    KernelPair kp = relu_poly();
    const std::size_t m = 4, d = 6;
    const double eps = 0.2, h = 1e-6;
    FullState st = random_full(m, d, 21);
    FullState dt = rhs_full(st, kp, eps);
    for (std::size_t i = 0; i < m; ++i) {
        auto p = st, q = st;
        p.a[i] += h;
        q.a[i] -= h;
        double ga = (risk_full(p, kp, kPhiNorm2) - risk_full(q, kp, kPhiNorm2)) / (2 * h);
        CHECK(std::abs(dt.a[i] + double(m) * ga / eps) < 1e-5 * (1 + std::abs(dt.a[i])));
        std::vector<double> grad(d);
        for (std::size_t k = 0; k < d; ++k) {
            p = st;
            q = st;
            p.row(i)[k] += h;
            q.row(i)[k] -= h;
            grad[k] = (risk_full(p, kp, kPhiNorm2) - risk_full(q, kp, kPhiNorm2)) / (2 * h);
        }
        double proj = dotv(grad.data(), st.row(i), d);
        for (std::size_t k = 0; k < d; ++k) {
            double want = -double(m) * (grad[k] - proj * st.row(i)[k]);
            CHECK(std::abs(dt.row(i)[k] - want) < 1e-5 * (1 + std::abs(want)));
        }
    }
}

TEST_CASE("mean-field flow at s = 0 and at a fixed point") {
    KernelPair kp = relu_poly();
    MeanFieldState st{{0.5, -1.0, 2.0}, {0, 0, 0}, {0.25, 0.25, 0.5}};
    MeanFieldState dt = rhs_meanfield(st, kp, 0.01);
    double s0 = std::sqrt(kp.u[0]), p0 = kp.v[0] / s0;
    double s1p1 = kp.v[1];
    double abar = 0.25 * 0.5 - 0.25 + 1.0;
    for (int i = 0; i < 3; ++i) {
        CHECK(dt.s[i] == doctest::Approx(st.a[i] * s1p1).epsilon(1e-12));
        CHECK(dt.a[i] == doctest::Approx((s0 * p0 - s0 * s0 * abar) / 0.01).epsilon(1e-12));
    }
    // sigma = He0 + He1, phi = 0.5 He0 + 0.3 He1: one neuron at a = 0.5, s = 0.6
    KernelPair lin = make_kernels(series_of(named_function("poly:0.5,0.3"), 4), series_of(named_function("poly:1,1"), 4));
    MeanFieldState fp{{0.5}, {0.6}, {1.0}};
    MeanFieldState z = rhs_meanfield(fp, lin, 0.01);
    CHECK(std::abs(z.a[0]) < 1e-13);
    CHECK(std::abs(z.s[0]) < 1e-13);
}

TEST_CASE("risk formulas against a direct double sum") {
    KernelPair kp = relu_poly();
    std::vector<double> a = {0.7, -1.1, 0.2, 1.4};
    ReducedState st = reduced_at_origin(a);
    const double m = 4;
    double direct = 0.5 * kPhiNorm2;
    for (std::size_t i = 0; i < 4; ++i) {
        direct -= a[i] * kernel_eval(kp, KernelFn::V, 0.0) / m;
        for (std::size_t j = 0; j < 4; ++j)
            direct += 0.5 * a[i] * a[j] * kernel_eval(kp, KernelFn::U, i == j ? 1.0 : 0.0) / (m * m);
    }
    CHECK(risk_reduced(st, kp, kPhiNorm2) == doctest::Approx(direct).epsilon(1e-13));
    double s0sq = kp.u[0], abar = 0.3, a2 = (0.49 + 1.21 + 0.04 + 1.96) / m;
    double closed = 0.5 * kPhiNorm2 - kp.v[0] * abar + 0.5 * s0sq * abar * abar +
                    0.5 * (kernel_eval(kp, KernelFn::U, 1.0) - s0sq) * a2 / m;
    CHECK(risk_reduced(st, kp, kPhiNorm2) == doctest::Approx(closed).epsilon(1e-13));

    MeanFieldState big = init_meanfield(2000, WeightLaw::parse("rademacher"), 3);
    CHECK(std::abs(risk_meanfield(big, kp, kPhiNorm2) - 11.0 / 9.0) < 0.02);
}

TEST_CASE("Hermite risk split agrees with the kernel risk for polynomial pairs") {
    HermiteSeries phi = series_of(named_function(kPhi), 6), sig = series_of(named_function("poly:0.3,1,-0.5,0.25"), 6);
    KernelPair kp = make_kernels(phi, sig);
    MeanFieldState st{{0.4, -0.9, 1.1}, {0.2, -0.7, 0.5}, {0.2, 0.5, 0.3}};
    RiskPoint rp = risk_hermite(st, phi, sig);
    CHECK(rp.components.size() == 7);
    CHECK(rp.risk == doctest::Approx(risk_meanfield(st, kp, phi.sum_sq())).epsilon(1e-12));
    double tot = 0;
    for (double c : rp.components)
        tot += c;
    CHECK(tot == doctest::Approx(rp.risk));
}

TEST_CASE("simplified model: risk ODE, conservation and the shrinking case") {
    const int l = 2;
    const double eps = 1e-4, sig = 0.6, ph = 2.0 / 3.0;
    std::vector<double> w = {0.3, 0.7};
    SimplifiedSystem sys(l, eps, sig, ph, w);
    std::vector<double> y = {0.9, -0.4, 0.5, 0.8};
    std::vector<double> dy(4);
    sys.rhs(0.0, y.data(), dy.data());
    double r = sys.residual(y.data()), chain = 0;
    for (int i = 0; i < 2; ++i) {
        double a = y[i], s = y[2 + i];
        chain += -r * sig * w[i] * std::pow(s, l) * dy[i];
        chain += -r * sig * w[i] * a * l * std::pow(s, l - 1) * dy[2 + i];
    }
    CHECK(std::abs(sys.risk_rate(y.data()) - chain) < 1e-8 * (1 + std::abs(chain)));

    FlowConfig cfg;
    cfg.eps = 1.0;
    cfg.rtol = 1e-10;
    cfg.atol = 1e-12;
    auto c0 = sys.conserved(y.data());
    Trajectory tr = integrate(sys, y, 0.0, log_grid(1e-3, 20.0, 50), cfg);
    double drift = 0;
    for (auto &yy : tr.y) {
        auto c = sys.conserved(yy.data());
        for (int i = 0; i < 2; ++i)
            drift = std::max(drift, std::abs(c[i] - c0[i]));
    }
    CHECK(drift < 1e-8);

    // case (c): sig*phi*a*s^l < 0 and s^2 < l a^2
    SimplifiedSystem one(l, eps, sig, ph, {1.0});
    std::vector<double> yc = {-0.8, 0.3}, dc(2);
    one.rhs(0.0, yc.data(), dc.data());
    CHECK(2 * yc[1] * dc[1] < 0);
    CHECK_THROWS_AS(SimplifiedSystem(1, eps, sig, ph, {1.0}), std::invalid_argument);
}

TEST_CASE("lower bound when the activation misses a degree") {
    HermiteSeries phi = series_of(named_function(kPhi), 8), he1 = series_of(named_function("he:1"), 8);
    KernelPair kp = make_kernels(phi, he1);
    MeanFieldState st = init_meanfield(8, WeightLaw::parse("uniform(-1.7,1.7)"), 2);
    MeanFieldSystem sys(kp, st.weights, 0.01, phi.sum_sq());
    FlowConfig cfg;
    cfg.eps = 0.01;
    Trajectory tr = integrate(sys, sys.pack(st), 0.0, log_grid(1e-4, 20.0, 100), cfg);
    double lo = 1e9;
    for (auto &y : tr.y)
        lo = std::min(lo, risk_hermite(sys.unpack(y.data()), phi, he1).risk);
    CHECK(lo >= 2.0 / 9.0);
}

TEST_CASE("no movement when the two lowest target coefficients vanish") {
    HermiteSeries phi = series_of(named_function("poly:0,0,1"), 12), relu = series_of(named_function("relu"), 12);
    KernelPair kp = make_kernels(phi, relu);
    MeanFieldState st = init_meanfield(6, WeightLaw::parse("rademacher"), 4);
    MeanFieldSystem sys(kp, st.weights, 0.1, phi.sum_sq());
    FlowConfig cfg;
    cfg.eps = 0.1;
    Trajectory tr = integrate(sys, sys.pack(st), 0.0, log_grid(1e-3, 10.0, 40), cfg);
    double worst = 0;
    for (auto &y : tr.y)
        for (std::size_t i = 0; i < 6; ++i)
            worst = std::max(worst, std::abs(y[6 + i]));
    CHECK(worst <= 1e-10);
}

TEST_CASE("second-layer energy decays when the target degree is absent") {
    SimplifiedSystem sys(3, 1e-3, 0.5, 0.0, {0.5, 0.5});
    std::vector<double> y = {1.0, -0.5, 0.6, 0.9};
    FlowConfig cfg;
    cfg.eps = 1.0;
    double prev = 1e9, worst = -1e9;
    integrate(sys, y, 0.0, {50.0}, cfg, [&](double, const double *yy, std::size_t) {
        double e = 0.5 * yy[0] * yy[0] + 0.5 * yy[1] * yy[1];
        worst = std::max(worst, e - prev);
        prev = e;
    });
    CHECK(worst <= 1e-12);
}

TEST_CASE("full flow stays on the sphere") {
    KernelPair kp = relu_poly();
    FullState st = init_full(3, 20, WeightLaw::parse("rademacher"), 6);
    FullSystem sys(kp, 3, 20, st.u_star, 0.1, kPhiNorm2);
    FlowConfig cfg;
    cfg.eps = 0.1;
    double worst = 0;
    integrate(sys, sys.pack(st), 0.0, {2.0}, cfg, [&](double, const double *y, std::size_t) {
        for (std::size_t i = 0; i < 3; ++i) {
            const double *u = y + 3 + i * 20;
            worst = std::max(worst, std::abs(std::sqrt(dotv(u, u, 20)) - 1.0));
        }
    });
    CHECK(worst <= 1e-9);
}

TEST_CASE("paired distance") {
    CHECK(paired_distance({1, 2}, {0, 0}, {1, 0}, {0, 1}) == doctest::Approx(2.5));
    CHECK_THROWS(paired_distance({1}, {0}, {1, 2}, {0, 0}));
}
