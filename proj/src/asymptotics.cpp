#include "plateau/asymptotics.hpp"

#include <cmath>
#include <limits>

namespace plateau {

namespace {

void require_level1(const AsymptoticParams &p) {
    if (p.sigma1 * p.phi1 == 0.0)
        throw std::domain_error("level-1 solution needs sigma1 * phi1 != 0");
    if (!(p.a_perp_norm2 > 0.0))
        throw std::domain_error("degenerate amplitude: a_perp_init has zero norm, the second scale cannot start");
}

double level1_shift(const AsymptoticParams &p) {
    return std::log(1.0 / p.eps) / (4.0 * std::abs(p.sigma1 * p.phi1));
}

} // namespace

AsymptoticParams AsymptoticParams::from(const HermiteSeries &phi, const HermiteSeries &sigma,
                                        const std::vector<double> &a_init, const std::vector<double> &weights,
                                        double eps) {
    if (a_init.size() != weights.size() || a_init.empty())
        throw std::invalid_argument("asymptotic params: weights and a_init differ in size");
    AsymptoticParams p;
    p.sigma0 = sigma.coeff(0);
    p.sigma1 = sigma.coeff(1);
    p.phi0 = phi.coeff(0);
    p.phi1 = phi.coeff(1);
    p.eps = eps;
    p.weights = weights;
    double mean = 0.0;
    for (std::size_t i = 0; i < a_init.size(); ++i)
        mean += weights[i] * a_init[i];
    p.a_mean_init = mean;
    p.a_perp_init.resize(a_init.size());
    double n2 = 0.0;
    for (std::size_t i = 0; i < a_init.size(); ++i) {
        p.a_perp_init[i] = a_init[i] - mean;
        n2 += weights[i] * p.a_perp_init[i] * p.a_perp_init[i];
    }
    p.a_perp_norm2 = n2;
    return p;
}

bool AsymptoticParams::constant_mode() const { return std::abs(sigma0) >= 1e-12; }

double AsymptoticParams::a_limit() const { return constant_mode() ? phi0 / sigma0 : a_mean_init; }

double phase1_mean(const AsymptoticParams &p, double t1) {
    if (!p.constant_mode())
        throw ConstantModeSkipped("phase 1 skipped: sigma0 vanishes, the mean of a is frozen");
    double e = std::exp(-p.sigma0 * p.sigma0 * t1);
    return e * p.a_mean_init + (1.0 - e) * p.phi0 / p.sigma0;
}

Profiles phase2_solution(const AsymptoticParams &p, double t2) {
    const double k = p.phi1 * p.sigma1;
    const double al = p.a_limit();
    const double ch = std::cosh(k * t2), sh = std::sinh(k * t2);
    Profiles out;
    out.a.resize(p.a_perp_init.size());
    out.s.resize(p.a_perp_init.size());
    for (std::size_t i = 0; i < p.a_perp_init.size(); ++i) {
        out.a[i] = al + ch * p.a_perp_init[i];
        out.s[i] = k * al * t2 + sh * p.a_perp_init[i];
    }
    return out;
}

double phase3_lambda(const AsymptoticParams &p, double t3) {
    require_level1(p);
    const double s1 = std::abs(p.sigma1), f1 = std::abs(p.phi1);
    const double rate = 2.0 * s1 * f1;
    // written to stay finite for very negative t3
    double x = -rate * t3;
    if (x > 600.0)
        return 0.5 * std::exp(0.5 * rate * t3) / std::sqrt(1.0 + s1 * p.a_perp_norm2 * std::exp(-x) / (4.0 * f1));
    return std::sqrt(f1) / std::sqrt(s1 * p.a_perp_norm2 + 4.0 * f1 * std::exp(x));
}

Profiles phase3_solution(const AsymptoticParams &p, double t3) {
    double lam = phase3_lambda(p, t3);
    double sg = p.sigma1 * p.phi1 > 0 ? 1.0 : -1.0;
    Profiles out;
    out.a.resize(p.a_perp_init.size());
    out.s.resize(p.a_perp_init.size());
    for (std::size_t i = 0; i < p.a_perp_init.size(); ++i) {
        out.a[i] = lam * p.a_perp_init[i];
        out.s[i] = sg * lam * p.a_perp_init[i];
    }
    return out;
}

double bernoulli_lambda(double alpha, double beta, double gamma, double lambda0, double t) {
    return std::sqrt(beta) / std::sqrt(gamma + (beta / (lambda0 * lambda0) - gamma) * std::exp(-2.0 * alpha * beta * t));
}

double t3_of(const AsymptoticParams &p, double t) { return t / std::sqrt(p.eps) - level1_shift(p); }

std::vector<PieceWindow> piece_windows(const AsymptoticParams &p) {
    const double e = p.eps;
    const double c1 = e, c2 = std::sqrt(e);
    double c3 = std::sqrt(e) * level1_shift(p);
    if (!(c3 > c2))
        c3 = 2.0 * c2;
    const double c4 = std::pow(e, 0.25);
    const double b12 = std::sqrt(c1 * c2), b23 = std::sqrt(c2 * c3);
    const double b34 = c4 > c3 ? std::sqrt(c3 * c4) : 2.0 * c3;
    return {{1, 0.0, b12}, {2, b12, b23}, {3, b23, b34}};
}

double predicted_risk(const AsymptoticParams &p, const HermiteSeries &phi, double t) {
    if (t < 0.0)
        throw std::invalid_argument("predicted_risk: t must be nonnegative");
    const double tail1 = 0.5 * phi.sum_sq(1), tail2 = 0.5 * phi.sum_sq(2);
    auto w = piece_windows(p);
    if (t < w[0].t_hi) {
        double gap = p.phi0 - p.sigma0 * p.a_mean_init;
        return 0.5 * std::exp(-2.0 * p.sigma0 * p.sigma0 * t / p.eps) * gap * gap + tail1;
    }
    if (t < w[1].t_hi)
        return tail1;
    require_level1(p);
    const double s1 = std::abs(p.sigma1), f1 = std::abs(p.phi1);
    double t3 = t3_of(p, t);
    double B = 4.0 * f1 / (s1 * p.a_perp_norm2);
    double x = -2.0 * s1 * f1 * t3;
    double q = x > 700.0 ? 1.0 : 1.0 - 1.0 / (1.0 + B * std::exp(x));
    return 0.5 * p.phi1 * p.phi1 * q * q + tail2;
}

std::vector<Transition> predicted_transitions(const AsymptoticParams &p, int L) {
    if (L < 1)
        throw std::invalid_argument("predicted_transitions: L must be at least 1");
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<Transition> out;
    if (p.constant_mode())
        out.push_back({0, p.eps / (p.sigma0 * p.sigma0), 1.0, 1.0, "relaxation of the mean at rate sigma0^2/eps"});
    else
        out.push_back({0, nan, 1.0, nan, "skipped: sigma0 = 0"});
    double c1 = p.sigma1 * p.phi1 != 0.0 ? std::sqrt(p.eps) * level1_shift(p) : nan;
    out.push_back({1, c1, 0.5, 0.5, "center sqrt(eps) log(1/eps) / (4 |sigma1 phi1|)"});
    for (int l = 2; l <= L; ++l)
        out.push_back({l, nan, 1.0 / (2.0 * l), 1.0 / (l + 1.0), "center c_l eps^{1/2l}, c_l unknown"});
    return out;
}

ExponentRow exponents(int l) {
    if (l < 1)
        throw std::invalid_argument("exponents: level must be positive");
    ExponentRow r;
    r.level = l;
    r.beta = 1.0 / (2.0 * (l + 1));
    r.omega = l * r.beta;
    r.mu = 1.0 / (2.0 * l);
    r.nu = 1.0 / (l + 1.0);
    r.tau_exponent = (l - 1.0) / (2.0 * l * (l + 1.0));
    return r;
}

std::vector<ExponentRow> exponent_table(int L) {
    std::vector<ExponentRow> t;
    for (int l = 2; l <= L; ++l)
        t.push_back(exponents(l));
    return t;
}

} // namespace plateau
