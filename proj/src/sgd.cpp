#include "plateau/sgd.hpp"

#include "plateau/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace plateau {

namespace {

void check_state(const SgdParticleState &st) {
    if (st.m == 0 || st.d == 0 || st.a.size() != st.m || st.u.size() != st.m * st.d || st.u_star.size() != st.d)
        throw std::invalid_argument("sgd: inconsistent particle state");
}

// splitmix64 so that init and data streams never share a seed
unsigned long long mix(unsigned long long x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double forward(const SgdParticleState &st, const double *x, const Activation &sigma, StepScratch &sc, bool deriv) {
    const std::size_t m = st.m, d = st.d;
    sc.pre.resize(m);
    sc.act.resize(m);
    sc.dact.resize(m);
    double out = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        sc.pre[i] = kernels::dot(st.row(i), x, d);
        sc.act[i] = sigma.f(sc.pre[i]);
        if (deriv)
            sc.dact[i] = sigma.df(sc.pre[i]);
        out += st.a[i] * sc.act[i];
    }
    return out / double(m);
}

} // namespace

unsigned long long data_seed(unsigned long long seed) { return mix(seed); }

DataStream::DataStream(std::size_t d, std::vector<double> u_star, RealFn phi, unsigned long long seed)
    : d_(d), us_(std::move(u_star)), phi_(std::move(phi)), rng_(seed) {
    if (us_.size() != d_)
        throw std::invalid_argument("data stream: u_star has the wrong length");
}

double DataStream::next(double *x) {
    for (std::size_t k = 0; k < d_; ++k)
        x[k] = N_(rng_);
    return phi_(kernels::dot(us_.data(), x, d_));
}

std::vector<DataPoint> sample_batch(std::size_t d, std::size_t count, const std::vector<double> &u_star,
                                    const RealFn &phi, unsigned long long seed) {
    DataStream ds(d, u_star, phi, seed);
    std::vector<DataPoint> out(count);
    for (auto &p : out) {
        p.x.resize(d);
        p.y = ds.next(p.x.data());
    }
    return out;
}

void population_increments(const SgdParticleState &st, const KernelPair &kp, std::vector<double> &F,
                           std::vector<double> &G) {
    check_state(st);
    // the gradient flow right side with eps = 1 is exactly (F, G)
    FullState r = rhs_full(st, kp, 1.0);
    F = std::move(r.a);
    G = std::move(r.u);
}

void gd_step(SgdParticleState &st, const KernelPair &kp, double eta, double eps) {
    std::vector<double> F, G;
    population_increments(st, kp, F, G);
    const std::size_t m = st.m, d = st.d;
    for (std::size_t i = 0; i < m; ++i) {
        st.a[i] += eta / eps * F[i];
        double *r = st.row(i);
        kernels::axpy(eta, G.data() + i * d, r, d);
        double nn = std::sqrt(kernels::dot(r, r, d));
        kernels::scale(1.0 / nn, r, d);
    }
}

void stochastic_increments(const SgdParticleState &st, const double *x, double y, const Activation &sigma,
                           std::vector<double> &F, std::vector<double> &G, StepScratch &sc) {
    check_state(st);
    const std::size_t m = st.m, d = st.d;
    double res = y - forward(st, x, sigma, sc, true);
    F.resize(m);
    G.assign(m * d, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        F[i] = res * sc.act[i];
        kernels::axpy(st.a[i] * res * sc.dact[i], x, G.data() + i * d, d);
    }
}

void sgd_step(SgdParticleState &st, const double *x, double y, const Activation &sigma, double eta, double eps,
              StepScratch &sc) {
    check_state(st);
    const std::size_t m = st.m, d = st.d;
    double res = y - forward(st, x, sigma, sc, true);
    for (std::size_t i = 0; i < m; ++i) {
        double c = eta * st.a[i] * res * sc.dact[i];
        double *r = st.row(i);
        st.a[i] += eta / eps * res * sc.act[i];
        // u += c (x - <u, x> u)
        kernels::scale(1.0 - c * sc.pre[i], r, d);
        kernels::axpy(c, x, r, d);
    }
}

void psgd_step(SgdParticleState &st, const double *x, double y, const Activation &sigma, double eta, double eps,
               StepScratch &sc) {
    check_state(st);
    const std::size_t m = st.m, d = st.d;
    double res = y - forward(st, x, sigma, sc, true);
    if (!std::isfinite(res))
        throw DivergenceError("psgd: non-finite residual");
    for (std::size_t i = 0; i < m; ++i) {
        st.a[i] += eta / eps * res * sc.act[i];
        double *r = st.row(i);
        kernels::axpy(eta * st.a[i] * res * sc.dact[i], x, r, d);
        double nn = std::sqrt(kernels::dot(r, r, d));
        if (!std::isfinite(nn) || nn == 0.0 || !std::isfinite(st.a[i]))
            throw DivergenceError("psgd: iterate left the finite range at particle " + std::to_string(i));
        kernels::scale(1.0 / nn, r, d);
    }
}

double CouplingReport::sup_risk_gap() const {
    double g = 0.0;
    for (auto &p : points)
        g = std::max(g, p.risk_gap);
    return g;
}

double CouplingReport::sup_param_gap() const {
    double g = 0.0;
    for (auto &p : points)
        g = std::max(g, p.param_gap);
    return g;
}

SgdRun run_psgd(const SgdConfig &cfg, const Activation &phi, const Activation &sigma, const WeightLaw &pa, int K,
                bool with_reference) {
    if (cfg.d < 1 || cfg.m < 1)
        throw std::invalid_argument("psgd: need d >= 1 and m >= 1");
    if (!(cfg.eta > 0.0) || !(cfg.eps > 0.0))
        throw std::invalid_argument("psgd: eta and eps must be positive");
    if (!sigma.df)
        throw std::invalid_argument("psgd: activation '" + sigma.name + "' has no derivative");
    std::size_t every = cfg.checkpoint_every ? cfg.checkpoint_every : std::max<std::size_t>(1, cfg.n_steps / 50);

    HermiteSeries ps = series_of(phi, K), ss = series_of(sigma, K);
    KernelPair kp = make_kernels(ps, ss);
    double pn2 = phi.norm2 ? *phi.norm2 : ps.sum_sq(0);

    SgdParticleState st = init_full(cfg.m, cfg.d, pa, cfg.seed);
    const SgdParticleState init = st;
    DataStream ds(cfg.d, st.u_star, phi.f, data_seed(cfg.seed));

    std::vector<std::size_t> steps;
    for (std::size_t k = 0; k <= cfg.n_steps; k += every)
        steps.push_back(k);
    if (steps.back() != cfg.n_steps)
        steps.push_back(cfg.n_steps);
    std::vector<double> times;
    for (auto k : steps)
        times.push_back(double(k) * cfg.eta);

    std::vector<std::vector<double>> ref;
    FullSystem sys(kp, cfg.m, cfg.d, st.u_star, cfg.eps, pn2);
    if (with_reference) {
        FlowConfig fc;
        fc.eps = cfg.eps;
        fc.rtol = 1e-9;
        fc.atol = 1e-11;
        fc.t_end = times.back();
        auto tr = integrate(sys, sys.pack(init), 0.0, times, fc);
        ref = std::move(tr.y);
    }

    SgdRun run;
    run.coupling.bound_shape =
        std::sqrt(cfg.eta) * (std::sqrt(double(cfg.d) + std::log(double(cfg.m))) + cfg.z);
    std::vector<double> x(cfg.d);
    StepScratch sc;
    double sup = 0.0;
    std::size_t k = 0;
    for (std::size_t c = 0; c < steps.size(); ++c) {
        for (; k < steps[c]; ++k) {
            double y = ds.next(x.data());
            psgd_step(st, x.data(), y, sigma, cfg.eta, cfg.eps, sc);
        }
        double r = risk_full(st, kp, pn2);
        run.times.push_back(times[c]);
        run.risk.push_back(r);
        if (with_reference) {
            const std::vector<double> &yr = ref[c];
            double rg = sys.risk(yr.data());
            double pg = 0.0;
            for (std::size_t i = 0; i < cfg.m; ++i) {
                double da = st.a[i] - yr[i];
                double q = da * da;
                const double *ur = yr.data() + cfg.m + i * cfg.d;
                const double *us = st.row(i);
                for (std::size_t j = 0; j < cfg.d; ++j)
                    q += (us[j] - ur[j]) * (us[j] - ur[j]);
                pg = std::max(pg, std::sqrt(q));
            }
            sup = std::max(sup, pg);
            run.coupling.points.push_back({steps[c], times[c], rg, r, std::abs(rg - r), pg, sup});
        }
    }
    run.final_state = std::move(st);
    return run;
}

double risk_monte_carlo(const SgdParticleState &st, const RealFn &phi, const Activation &sigma, std::size_t n,
                        unsigned long long seed) {
    check_state(st);
    if (n == 0)
        throw std::invalid_argument("risk_monte_carlo: need at least one sample");
    DataStream ds(st.d, st.u_star, phi, seed);
    std::vector<double> x(st.d);
    StepScratch sc;
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double y = ds.next(x.data());
        double r = y - forward(st, x.data(), sigma, sc, false);
        acc += 0.5 * r * r;
    }
    return acc / double(n);
}

} // namespace plateau
