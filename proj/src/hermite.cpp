#include "plateau/hermite.hpp"
#include "plateau/kernels.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>

namespace plateau {

namespace {

// log sum_{k<n} h_k(x)^2 together with h_n / h_{n-1}, rescaling on the fly.
struct Christoffel {
    double log_sum;
    double hn, hn1; // common scale factor removed
};

Christoffel christoffel(int n, double x) {
    double hm = 0.0, h = 1.0;
    double sum = 1.0, log_scale = 0.0;
    for (int k = 0; k + 1 < n; ++k) {
        double hp = (x * h - std::sqrt(double(k)) * hm) / std::sqrt(double(k + 1));
        hm = h;
        h = hp;
        sum += h * h;
        if (std::abs(h) > 1e100) {
            hm *= 1e-100;
            h *= 1e-100;
            sum *= 1e-200;
            log_scale += 200.0 * std::log(10.0);
        }
    }
    // h holds h_{n-1}, hm holds h_{n-2}
    double hn = (x * h - std::sqrt(double(n - 1)) * hm) / std::sqrt(double(n));
    return {std::log(sum) + log_scale, hn, h};
}

QuadRule build_gauss_hermite(int n) {
    if (n < 1)
        throw std::invalid_argument("gauss_hermite: node count must be positive");
    QuadRule r;
    r.x.resize(n);
    r.w.resize(n);
    if (n == 1) {
        r.x[0] = 0.0;
        r.w[0] = 1.0;
        return r;
    }
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(n - 1);
    for (int k = 1; k < n; ++k)
        sub[k - 1] = std::sqrt(double(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    for (int i = 0; i < n; ++i) {
        double x = es.eigenvalues()[i];
        for (int it = 0; it < 3; ++it) {
            Christoffel c = christoffel(n, x);
            double step = c.hn / (std::sqrt(double(n)) * c.hn1);
            x -= step;
            if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(x)))
                break;
        }
        r.x[i] = x;
        r.w[i] = std::exp(-christoffel(n, x).log_sum);
    }
    // symmetrize
    for (int i = 0; i < n / 2; ++i) {
        double xa = 0.5 * (r.x[n - 1 - i] - r.x[i]);
        double wa = 0.5 * (r.w[i] + r.w[n - 1 - i]);
        r.x[i] = -xa;
        r.x[n - 1 - i] = xa;
        r.w[i] = r.w[n - 1 - i] = wa;
    }
    if (n % 2 == 1)
        r.x[n / 2] = 0.0;
    double tot = 0.0;
    for (double w : r.w)
        tot += w;
    for (double &w : r.w)
        w /= tot;
    return r;
}

std::vector<double> parse_coeff_list(const std::string &body) {
    std::vector<double> out;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto slash = item.find('/');
        try {
            if (slash == std::string::npos)
                out.push_back(std::stod(item));
            else
                out.push_back(std::stod(item.substr(0, slash)) / std::stod(item.substr(slash + 1)));
        } catch (const std::exception &) {
            throw std::invalid_argument("bad coefficient '" + item + "' in poly spec");
        }
    }
    if (out.empty())
        throw std::invalid_argument("poly spec needs at least one coefficient");
    return out;
}

double eval_series(const std::vector<double> &c, double x) {
    int K = static_cast<int>(c.size()) - 1;
    std::vector<double> h(K + 1);
    hermite_eval_all(K, x, h.data());
    double acc = 0.0;
    for (int k = 0; k <= K; ++k)
        acc += c[k] * h[k];
    return acc;
}

double eval_series_deriv(const std::vector<double> &c, double x) {
    int K = static_cast<int>(c.size()) - 1;
    if (K < 1)
        return 0.0;
    std::vector<double> h(K);
    hermite_eval_all(K - 1, x, h.data());
    double acc = 0.0;
    for (int k = 1; k <= K; ++k)
        acc += c[k] * std::sqrt(double(k)) * h[k - 1];
    return acc;
}

Activation poly_activation(std::string name, std::vector<double> c) {
    Activation a;
    a.name = std::move(name);
    a.f = [c](double x) { return eval_series(c, x); };
    a.df = [c](double x) { return eval_series_deriv(c, x); };
    double n2 = 0.0;
    for (double v : c)
        n2 += v * v;
    a.norm2 = n2;
    a.exact = std::move(c);
    return a;
}

std::vector<double> derivative_table(const std::vector<double> &c) {
    std::vector<double> d(c.size() > 1 ? c.size() - 1 : 1, 0.0);
    for (std::size_t k = 1; k < c.size(); ++k)
        d[k - 1] = double(k) * c[k];
    return d;
}

} // namespace

const QuadRule &gauss_hermite(int n) {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<QuadRule>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end())
        it = cache.emplace(n, std::make_unique<QuadRule>(build_gauss_hermite(n))).first;
    return *it->second;
}

QuadRule gauss_legendre(int n) {
    if (n < 1)
        throw std::invalid_argument("gauss_legendre: node count must be positive");
    QuadRule r;
    if (n == 1) {
        r.x = {0.0};
        r.w = {2.0};
        return r;
    }
    r.x.resize(n);
    r.w.resize(n);
    auto legendre = [n](double z, double &dp) {
        double p0 = 1.0, p1 = z;
        for (int k = 2; k <= n; ++k) {
            double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (z * p1 - p0) / (z * z - 1.0);
        return p1;
    };
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 1.0;
        for (int it = 0; it < 100; ++it) {
            double dz = legendre(z, dp) / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16)
                break;
        }
        legendre(z, dp);
        double w = 2.0 / ((1.0 - z * z) * dp * dp);
        r.x[i] = -z;
        r.x[n - 1 - i] = z;
        r.w[i] = r.w[n - 1 - i] = w;
    }
    return r;
}

QuadRule piecewise_normal_rule(const std::vector<double> &breaks, double half_width, double panel,
                               int nodes_per_panel) {
    std::vector<double> edges{-half_width};
    std::vector<double> b = breaks;
    std::sort(b.begin(), b.end());
    for (double v : b)
        if (v > -half_width && v < half_width && v > edges.back())
            edges.push_back(v);
    edges.push_back(half_width);
    QuadRule gl = gauss_legendre(nodes_per_panel);
    QuadRule r;
    const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
        double lo = edges[e], hi = edges[e + 1];
        int np = std::max(1, static_cast<int>(std::ceil((hi - lo) / panel)));
        double hw = (hi - lo) / np;
        for (int p = 0; p < np; ++p) {
            double a = lo + p * hw;
            for (int q = 0; q < nodes_per_panel; ++q) {
                double x = a + 0.5 * hw * (gl.x[q] + 1.0);
                r.x.push_back(x);
                r.w.push_back(0.5 * hw * gl.w[q] * norm * std::exp(-0.5 * x * x));
            }
        }
    }
    return r;
}

void hermite_eval_all(int K, double x, double *out) {
    if (K < 0)
        return;
    out[0] = 1.0;
    if (K == 0)
        return;
    out[1] = x;
    for (int k = 1; k < K; ++k)
        out[k + 1] = (x * out[k] - std::sqrt(double(k)) * out[k - 1]) / std::sqrt(double(k + 1));
}

double hermite_eval(int k, double x) {
    if (k < 0)
        throw std::invalid_argument("hermite_eval: degree must be nonnegative");
    double hm = 0.0, h = 1.0;
    for (int j = 0; j < k; ++j) {
        double hp = (x * h - std::sqrt(double(j)) * hm) / std::sqrt(double(j + 1));
        hm = h;
        h = hp;
        if (!std::isfinite(h)) {
            std::ostringstream os;
            os << "hermite_eval: overflow at degree " << (j + 1) << " for x = " << x;
            throw std::overflow_error(os.str());
        }
    }
    return h;
}

double HermiteSeries::sum_sq(int from) const {
    double s = 0.0;
    for (std::size_t k = std::max(from, 0); k < coeffs.size(); ++k)
        s += coeffs[k] * coeffs[k];
    return s;
}

double HermiteSeries::operator()(double x) const { return eval_series(coeffs, x); }

HermiteSeries HermiteSeries::resized(int K) const {
    HermiteSeries r = *this;
    r.coeffs.assign(K + 1, 0.0);
    for (int k = 0; k <= K && k < static_cast<int>(coeffs.size()); ++k)
        r.coeffs[k] = coeffs[k];
    r.tail_mass = std::max(0.0, norm2 - r.sum_sq());
    return r;
}

HermiteSeries make_series(std::vector<double> coeffs) {
    HermiteSeries s;
    s.coeffs = std::move(coeffs);
    for (double c : s.coeffs)
        if (!std::isfinite(c))
            throw std::invalid_argument("Hermite coefficient is not finite");
    s.norm2 = s.sum_sq();
    s.tail_mass = 0.0;
    return s;
}

HermiteSeries hermite_coeffs(const RealFn &f, int K, int quad_order, const std::vector<double> &breakpoints) {
    if (K < 0)
        throw std::invalid_argument("hermite_coeffs: truncation must be nonnegative");
    if (quad_order < 2 * K + 2)
        throw std::invalid_argument("hermite_coeffs: quad_order must be at least 2K+2");
    QuadRule local;
    const QuadRule *rule;
    if (breakpoints.empty()) {
        rule = &gauss_hermite(quad_order);
    } else {
        double hw = std::max(16.0, 10.0 + 2.0 * std::sqrt(double(K)));
        local = piecewise_normal_rule(breakpoints, hw);
        rule = &local;
    }
    HermiteSeries s;
    s.coeffs.assign(K + 1, 0.0);
    std::vector<double> h(K + 1);
    double n2 = 0.0;
    for (std::size_t i = 0; i < rule->x.size(); ++i) {
        double fx = f(rule->x[i]);
        hermite_eval_all(K, rule->x[i], h.data());
        double wf = rule->w[i] * fx;
        n2 += wf * fx;
        for (int k = 0; k <= K; ++k)
            s.coeffs[k] += wf * h[k];
    }
    for (int k = 0; k <= K; ++k) {
        if (!std::isfinite(s.coeffs[k])) {
            std::ostringstream os;
            os << "hermite_coeffs: non-finite quadrature sum at degree " << k;
            throw std::runtime_error(os.str());
        }
    }
    if (!std::isfinite(n2))
        throw std::runtime_error("hermite_coeffs: non-finite quadrature sum for the squared norm");
    s.norm2 = n2;
    s.tail_mass = std::max(0.0, n2 - s.sum_sq());
    return s;
}

Activation named_function(const std::string &spec) {
    const double pi = std::numbers::pi;
    if (spec == "relu") {
        Activation a;
        a.name = spec;
        a.f = [](double x) { return x > 0.0 ? x : 0.0; };
        a.df = [](double x) { return x > 0.0 ? 1.0 : 0.0; };
        a.breakpoints = {0.0};
        a.norm2 = 0.5;
        return a;
    }
    if (spec == "erf" || spec == "tanh-like" || spec == "tanh-like (erf)") {
        Activation a;
        a.name = "erf";
        a.f = [](double x) { return std::erf(x / std::numbers::sqrt2); };
        a.df = [pi](double x) { return std::sqrt(2.0 / pi) * std::exp(-0.5 * x * x); };
        a.norm2 = 1.0 / 3.0;
        return a;
    }
    if (spec == "tanh") {
        Activation a;
        a.name = spec;
        a.f = [](double x) { return std::tanh(x); };
        a.df = [](double x) {
            double t = std::tanh(x);
            return 1.0 - t * t;
        };
        return a;
    }
    auto colon = spec.find(':');
    if (colon != std::string::npos) {
        std::string head = spec.substr(0, colon), body = spec.substr(colon + 1);
        if (head == "he_k" || head == "he") {
            int k = 0;
            try {
                k = std::stoi(body);
            } catch (const std::exception &) {
                throw std::invalid_argument("bad degree in '" + spec + "'");
            }
            if (k < 0)
                throw std::invalid_argument("negative degree in '" + spec + "'");
            std::vector<double> c(k + 1, 0.0);
            c[k] = 1.0;
            return poly_activation(spec, std::move(c));
        }
        if (head == "poly")
            return poly_activation(spec, parse_coeff_list(body));
    }
    throw std::invalid_argument("unknown function '" + spec + "'");
}

HermiteSeries series_of(const Activation &act, int K, int quad_order) {
    if (act.exact) {
        HermiteSeries s = make_series(*act.exact);
        return s.resized(K);
    }
    HermiteSeries s = hermite_coeffs(act.f, K, quad_order, act.breakpoints);
    if (act.norm2) {
        s.norm2 = *act.norm2;
        s.tail_mass = std::max(0.0, s.norm2 - s.sum_sq());
    }
    return s;
}

const std::vector<double> &KernelPair::table(KernelFn which) const {
    switch (which) {
    case KernelFn::V:
        return v;
    case KernelFn::dV:
        return dv;
    case KernelFn::U:
        return u;
    case KernelFn::dU:
        return du;
    case KernelFn::ddU:
        return ddu;
    }
    return v;
}

KernelPair make_kernels(const HermiteSeries &phi, const HermiteSeries &sigma) {
    KernelPair kp;
    kp.K = std::max(phi.truncation(), sigma.truncation());
    kp.v.assign(kp.K + 1, 0.0);
    kp.u.assign(kp.K + 1, 0.0);
    for (int k = 0; k <= kp.K; ++k) {
        kp.v[k] = phi.coeff(k) * sigma.coeff(k);
        kp.u[k] = sigma.coeff(k) * sigma.coeff(k);
    }
    kp.dv = derivative_table(kp.v);
    kp.du = derivative_table(kp.u);
    kp.ddu = derivative_table(kp.du);
    return kp;
}

double kernel_eval(const KernelPair &kp, KernelFn which, double s) {
    if (!(std::abs(s) <= 1.0)) {
        std::ostringstream os;
        os << "kernel_eval: overlap " << s << " outside [-1, 1]";
        throw std::domain_error(os.str());
    }
    double out;
    const auto &t = kp.table(which);
    kernels::horner(t.data(), t.size(), &s, &out, 1);
    return out;
}

void kernel_eval_batch(const KernelPair &kp, KernelFn which, const double *s, double *out, std::size_t n) {
    const auto &t = kp.table(which);
    kernels::horner(t.data(), t.size(), s, out, n);
}

} // namespace plateau
