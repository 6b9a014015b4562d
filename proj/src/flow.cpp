#include "plateau/flow.hpp"
#include "plateau/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace plateau {

namespace {

std::vector<double> parse_number_list(const std::string &body) {
    std::vector<double> out;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception &) {
            throw std::invalid_argument("weight law: bad number '" + item + "'");
        }
    }
    return out;
}

std::vector<double> sample_weights(const WeightLaw &law, std::size_t m, std::mt19937_64 &rng) {
    std::vector<double> a(m);
    switch (law.kind) {
    case WeightLaw::Kind::rademacher: {
        std::bernoulli_distribution coin(0.5);
        for (auto &v : a)
            v = coin(rng) ? 1.0 : -1.0;
        break;
    }
    case WeightLaw::Kind::uniform: {
        std::uniform_real_distribution<double> U(law.lo, law.hi);
        for (auto &v : a)
            v = U(rng);
        break;
    }
    case WeightLaw::Kind::atoms:
        for (std::size_t i = 0; i < m; ++i)
            a[i] = law.atoms[i % law.atoms.size()];
        break;
    }
    return a;
}

} // namespace

WeightLaw WeightLaw::parse(const std::string &spec) {
    WeightLaw w;
    if (spec == "rademacher")
        return w;
    auto open = spec.find('(');
    auto close = spec.rfind(')');
    if (open != std::string::npos && close != std::string::npos && close > open) {
        std::string head = spec.substr(0, open);
        std::vector<double> v = parse_number_list(spec.substr(open + 1, close - open - 1));
        if (head == "uniform") {
            if (v.size() != 2 || !std::isfinite(v[0]) || !std::isfinite(v[1]) || v[0] > v[1])
                throw std::invalid_argument("weight law: uniform(lo,hi) needs finite lo <= hi");
            w.kind = Kind::uniform;
            w.lo = v[0];
            w.hi = v[1];
            return w;
        }
        if (head == "atoms") {
            if (v.empty())
                throw std::invalid_argument("weight law: atoms() needs at least one value");
            for (double x : v)
                if (!std::isfinite(x))
                    throw std::invalid_argument("weight law: atoms must be finite");
            w.kind = Kind::atoms;
            w.atoms = v;
            return w;
        }
    }
    throw std::invalid_argument("weight law '" + spec +
                                "' rejected: use rademacher, uniform(lo,hi) or atoms(...) (bounded support)");
}

std::string WeightLaw::str() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind) {
    case Kind::rademacher:
        return "rademacher";
    case Kind::uniform:
        os << "uniform(" << lo << "," << hi << ")";
        return os.str();
    case Kind::atoms:
        os << "atoms(";
        for (std::size_t i = 0; i < atoms.size(); ++i)
            os << (i ? "," : "") << atoms[i];
        os << ")";
        return os.str();
    }
    return "rademacher";
}

std::vector<double> WeightLaw::sample(std::size_t m, unsigned long long seed) const {
    std::mt19937_64 rng(seed);
    return sample_weights(*this, m, rng);
}

std::vector<double> uniform_weights(std::size_t m) { return std::vector<double>(m, 1.0 / double(m)); }

FullState init_full(std::size_t m, std::size_t d, const WeightLaw &pa, unsigned long long seed) {
    if (m < 1 || d < 1)
        throw std::invalid_argument("init_full: need m >= 1 and d >= 1");
    std::mt19937_64 rng(seed);
    FullState st;
    st.m = m;
    st.d = d;
    st.a = sample_weights(pa, m, rng);
    st.u.resize(m * d);
    std::normal_distribution<double> N(0.0, 1.0);
    for (std::size_t i = 0; i < m; ++i) {
        double *r = st.row(i);
        double nn = 0.0;
        do {
            for (std::size_t k = 0; k < d; ++k)
                r[k] = N(rng);
            nn = std::sqrt(kernels::dot(r, r, d));
        } while (nn == 0.0);
        kernels::scale(1.0 / nn, r, d);
    }
    st.u_star.assign(d, 0.0);
    st.u_star[0] = 1.0;
    return st;
}

MeanFieldState init_meanfield(std::size_t m, const WeightLaw &pa, unsigned long long seed) {
    if (m < 1)
        throw std::invalid_argument("init_meanfield: need m >= 1");
    MeanFieldState st;
    st.a = pa.sample(m, seed);
    st.s.assign(m, 0.0);
    st.weights = uniform_weights(m);
    return st;
}

ReducedState reduced_at_origin(const std::vector<double> &a) {
    ReducedState st;
    st.m = a.size();
    st.a = a;
    st.s.assign(st.m, 0.0);
    st.R.assign(st.m * st.m, 0.0);
    for (std::size_t i = 0; i < st.m; ++i)
        st.R[i * st.m + i] = 1.0;
    return st;
}

ReducedState gram_of(const FullState &st) {
    ReducedState r;
    r.m = st.m;
    r.a = st.a;
    r.s.resize(st.m);
    r.R.assign(st.m * st.m, 0.0);
    for (std::size_t i = 0; i < st.m; ++i) {
        r.s[i] = kernels::dot(st.u_star.data(), st.row(i), st.d);
        r.R[i * st.m + i] = 1.0;
        for (std::size_t j = i + 1; j < st.m; ++j)
            r.R[i * st.m + j] = r.R[j * st.m + i] = kernels::dot(st.row(i), st.row(j), st.d);
    }
    return r;
}

// ---------------- mean field ----------------

MeanFieldSystem::MeanFieldSystem(KernelPair kp, std::vector<double> weights, double eps, double phi_norm2)
    : kp_(std::move(kp)), w_(std::move(weights)), eps_(eps), phi_norm2_(phi_norm2) {
    if (!(eps_ > 0.0))
        throw std::invalid_argument("mean-field flow: eps must be positive");
    double tot = 0.0;
    for (double w : w_) {
        if (w < 0.0)
            throw std::invalid_argument("mean-field flow: weights must be nonnegative");
        tot += w;
    }
    if (w_.empty() || std::abs(tot - 1.0) > 1e-12)
        throw std::invalid_argument("mean-field flow: weights must sum to one");
    std::size_t m = w_.size();
    ss_.resize(m * m);
    U_.resize(m * m);
    dU_.resize(m * m);
    Vs_.resize(m);
    dVs_.resize(m);
    wa_.resize(2 * m);
}

void MeanFieldSystem::rhs(double, const double *y, double *dy) {
    const std::size_t m = w_.size();
    const double *a = y, *s = y + m;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            ss_[i * m + j] = s[i] * s[j];
    kernel_eval_batch(kp_, KernelFn::U, ss_.data(), U_.data(), m * m);
    kernel_eval_batch(kp_, KernelFn::dU, ss_.data(), dU_.data(), m * m);
    kernel_eval_batch(kp_, KernelFn::V, s, Vs_.data(), m);
    kernel_eval_batch(kp_, KernelFn::dV, s, dVs_.data(), m);
    double *wa = wa_.data(), *was = wa_.data() + m;
    for (std::size_t j = 0; j < m; ++j) {
        wa[j] = w_[j] * a[j];
        was[j] = wa[j] * s[j];
    }
    for (std::size_t i = 0; i < m; ++i) {
        dy[i] = (Vs_[i] - kernels::dot(U_.data() + i * m, wa, m)) / eps_;
        dy[m + i] = a[i] * (1.0 - s[i] * s[i]) * (dVs_[i] - kernels::dot(dU_.data() + i * m, was, m));
    }
}

double MeanFieldSystem::risk(const double *y) {
    const std::size_t m = w_.size();
    const double *a = y, *s = y + m;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            ss_[i * m + j] = s[i] * s[j];
    kernel_eval_batch(kp_, KernelFn::U, ss_.data(), U_.data(), m * m);
    kernel_eval_batch(kp_, KernelFn::V, s, Vs_.data(), m);
    double lin = 0.0, quad = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        wa_[i] = w_[i] * a[i];
        lin += wa_[i] * Vs_[i];
    }
    for (std::size_t i = 0; i < m; ++i)
        quad += wa_[i] * kernels::dot(U_.data() + i * m, wa_.data(), m);
    return 0.5 * phi_norm2_ - lin + 0.5 * quad;
}

bool MeanFieldSystem::project(double *y) {
    const std::size_t m = w_.size();
    bool changed = false;
    for (std::size_t i = 0; i < m; ++i) {
        double &s = y[m + i];
        if (s > 1.0 || s < -1.0) {
            s = std::clamp(s, -1.0, 1.0);
            changed = true;
        }
    }
    return changed;
}

std::vector<double> MeanFieldSystem::pack(const MeanFieldState &st) const {
    if (st.a.size() != w_.size() || st.s.size() != w_.size())
        throw std::invalid_argument("mean-field pack: size mismatch");
    std::vector<double> y(st.a);
    y.insert(y.end(), st.s.begin(), st.s.end());
    return y;
}

MeanFieldState MeanFieldSystem::unpack(const double *y) const {
    const std::size_t m = w_.size();
    MeanFieldState st;
    st.a.assign(y, y + m);
    st.s.assign(y + m, y + 2 * m);
    st.weights = w_;
    return st;
}

// ---------------- reduced ----------------

ReducedSystem::ReducedSystem(KernelPair kp, std::size_t m, double eps, double phi_norm2)
    : kp_(std::move(kp)), m_(m), eps_(eps), phi_norm2_(phi_norm2) {
    if (m_ < 1)
        throw std::invalid_argument("reduced flow: need m >= 1");
    if (!(eps_ > 0.0))
        throw std::invalid_argument("reduced flow: eps must be positive");
    R_.resize(m * m);
    U_.resize(m * m);
    dU_.resize(m * m);
    B_.resize(m * m);
    Q_.resize(m * m);
    c_.resize(m);
    Vs_.resize(m);
    dVs_.resize(m);
}

void ReducedSystem::expand(const double *y) {
    const std::size_t m = m_;
    const double *r = y + 2 * m;
    std::size_t q = 0;
    for (std::size_t i = 0; i < m; ++i) {
        R_[i * m + i] = 1.0;
        for (std::size_t j = i + 1; j < m; ++j, ++q)
            R_[i * m + j] = R_[j * m + i] = r[q];
    }
}

void ReducedSystem::rhs(double, const double *y, double *dy) {
    const std::size_t m = m_;
    const double *a = y, *s = y + m;
    expand(y);
    kernel_eval_batch(kp_, KernelFn::U, R_.data(), U_.data(), m * m);
    kernel_eval_batch(kp_, KernelFn::dU, R_.data(), dU_.data(), m * m);
    kernel_eval_batch(kp_, KernelFn::V, s, Vs_.data(), m);
    kernel_eval_batch(kp_, KernelFn::dV, s, dVs_.data(), m);
    const double im = 1.0 / double(m);
    for (std::size_t i = 0; i < m; ++i) {
        kernels::mul(dU_.data() + i * m, a, B_.data() + i * m, m);
        dy[i] = (Vs_[i] - im * kernels::dot(U_.data() + i * m, a, m)) / eps_;
    }
    for (std::size_t i = 0; i < m; ++i) {
        const double *Bi = B_.data() + i * m;
        for (std::size_t j = 0; j < m; ++j)
            Q_[i * m + j] = kernels::dot(Bi, R_.data() + j * m, m);
        c_[i] = Q_[i * m + i];
        dy[m + i] = a[i] * (dVs_[i] * (1.0 - s[i] * s[i]) - im * (kernels::dot(Bi, s, m) - c_[i] * s[i]));
    }
    double *dr = dy + 2 * m;
    std::size_t q = 0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j, ++q) {
            double rij = R_[i * m + j];
            double xij = a[i] * (dVs_[i] * (s[j] - s[i] * rij) - im * (Q_[i * m + j] - c_[i] * rij));
            double xji = a[j] * (dVs_[j] * (s[i] - s[j] * rij) - im * (Q_[j * m + i] - c_[j] * rij));
            dr[q] = xij + xji;
        }
    }
}

double ReducedSystem::risk(const double *y) {
    const std::size_t m = m_;
    const double *a = y, *s = y + m;
    expand(y);
    kernel_eval_batch(kp_, KernelFn::U, R_.data(), U_.data(), m * m);
    kernel_eval_batch(kp_, KernelFn::V, s, Vs_.data(), m);
    double lin = kernels::dot(a, Vs_.data(), m);
    double quad = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        quad += a[i] * kernels::dot(U_.data() + i * m, a, m);
    double im = 1.0 / double(m);
    return 0.5 * phi_norm2_ - im * lin + 0.5 * im * im * quad;
}

double ReducedSystem::velocity_norm2(const double *y) {
    const std::size_t m = m_;
    const double *a = y, *s = y + m;
    expand(y);
    kernel_eval_batch(kp_, KernelFn::dU, R_.data(), dU_.data(), m * m);
    kernel_eval_batch(kp_, KernelFn::dV, s, dVs_.data(), m);
    const double im = 1.0 / double(m);
    std::vector<double> alpha(m), Ra(m);
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double gamma = dVs_[i] * s[i];
        for (std::size_t j = 0; j < m; ++j)
            gamma -= im * a[j] * dU_[i * m + j] * R_[i * m + j];
        for (std::size_t j = 0; j < m; ++j)
            alpha[j] = -im * a[j] * dU_[i * m + j];
        alpha[i] -= gamma;
        double as = dVs_[i];
        double g2 = as * as + 2.0 * as * kernels::dot(alpha.data(), s, m);
        for (std::size_t j = 0; j < m; ++j)
            Ra[j] = kernels::dot(R_.data() + j * m, alpha.data(), m);
        g2 += kernels::dot(alpha.data(), Ra.data(), m);
        total += a[i] * a[i] * g2;
    }
    return total;
}

bool ReducedSystem::project(double *y) {
    bool changed = false;
    for (std::size_t q = m_; q < dim(); ++q) {
        if (y[q] > 1.0 || y[q] < -1.0) {
            y[q] = std::clamp(y[q], -1.0, 1.0);
            changed = true;
        }
    }
    return changed;
}

std::vector<double> ReducedSystem::pack(const ReducedState &st) const {
    if (st.m != m_ || st.R.size() != m_ * m_)
        throw std::invalid_argument("reduced pack: size mismatch");
    std::vector<double> y(st.a);
    y.insert(y.end(), st.s.begin(), st.s.end());
    for (std::size_t i = 0; i < m_; ++i)
        for (std::size_t j = i + 1; j < m_; ++j)
            y.push_back(st.R[i * m_ + j]);
    return y;
}

ReducedState ReducedSystem::unpack(const double *y) const {
    ReducedState st;
    st.m = m_;
    st.a.assign(y, y + m_);
    st.s.assign(y + m_, y + 2 * m_);
    st.R.assign(m_ * m_, 0.0);
    const double *r = y + 2 * m_;
    std::size_t q = 0;
    for (std::size_t i = 0; i < m_; ++i) {
        st.R[i * m_ + i] = 1.0;
        for (std::size_t j = i + 1; j < m_; ++j, ++q)
            st.R[i * m_ + j] = st.R[j * m_ + i] = r[q];
    }
    return st;
}

// ---------------- full ----------------

FullSystem::FullSystem(KernelPair kp, std::size_t m, std::size_t d, std::vector<double> u_star, double eps,
                       double phi_norm2)
    : kp_(std::move(kp)), m_(m), d_(d), us_(std::move(u_star)), eps_(eps), phi_norm2_(phi_norm2) {
    if (m_ < 1 || d_ < 1 || us_.size() != d_)
        throw std::invalid_argument("full flow: inconsistent sizes");
    if (!(eps_ > 0.0))
        throw std::invalid_argument("full flow: eps must be positive");
    s_.resize(m);
    R_.resize(m * m);
    U_.resize(m * m);
    dU_.resize(m * m);
    Vs_.resize(m);
    dVs_.resize(m);
}

void FullSystem::gram(const double *u) {
    for (std::size_t i = 0; i < m_; ++i) {
        const double *ui = u + i * d_;
        s_[i] = kernels::dot(us_.data(), ui, d_);
        for (std::size_t j = i; j < m_; ++j)
            R_[i * m_ + j] = R_[j * m_ + i] = kernels::dot(ui, u + j * d_, d_);
    }
}

void FullSystem::rhs(double, const double *y, double *dy) {
    const std::size_t m = m_, d = d_;
    const double *a = y, *u = y + m;
    gram(u);
    kernel_eval_batch(kp_, KernelFn::U, R_.data(), U_.data(), m * m);
    kernel_eval_batch(kp_, KernelFn::dU, R_.data(), dU_.data(), m * m);
    kernel_eval_batch(kp_, KernelFn::V, s_.data(), Vs_.data(), m);
    kernel_eval_batch(kp_, KernelFn::dV, s_.data(), dVs_.data(), m);
    const double im = 1.0 / double(m);
    double *du = dy + m;
    std::fill(du, du + m * d, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        dy[i] = (Vs_[i] - im * kernels::dot(U_.data() + i * m, a, m)) / eps_;
        double gamma = dVs_[i] * s_[i];
        for (std::size_t j = 0; j < m; ++j)
            gamma -= im * a[j] * dU_[i * m + j] * R_[i * m + j];
        double *dui = du + i * d;
        kernels::axpy(a[i] * dVs_[i], us_.data(), dui, d);
        for (std::size_t j = 0; j < m; ++j)
            kernels::axpy(-a[i] * im * a[j] * dU_[i * m + j], u + j * d, dui, d);
        kernels::axpy(-a[i] * gamma, u + i * d, dui, d);
    }
}

double FullSystem::risk(const double *y) {
    const std::size_t m = m_;
    const double *a = y;
    gram(y + m);
    kernel_eval_batch(kp_, KernelFn::U, R_.data(), U_.data(), m * m);
    kernel_eval_batch(kp_, KernelFn::V, s_.data(), Vs_.data(), m);
    double lin = kernels::dot(a, Vs_.data(), m);
    double quad = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        quad += a[i] * kernels::dot(U_.data() + i * m, a, m);
    double im = 1.0 / double(m);
    return 0.5 * phi_norm2_ - im * lin + 0.5 * im * im * quad;
}

bool FullSystem::project(double *y) {
    bool changed = false;
    for (std::size_t i = 0; i < m_; ++i) {
        double *ui = y + m_ + i * d_;
        double nn = std::sqrt(kernels::dot(ui, ui, d_));
        if (nn > 0.0) {
            if (std::abs(nn - 1.0) > 1e-12)
                changed = true;
            kernels::scale(1.0 / nn, ui, d_);
        }
    }
    return changed;
}

std::vector<double> FullSystem::pack(const FullState &st) const {
    if (st.m != m_ || st.d != d_)
        throw std::invalid_argument("full pack: size mismatch");
    std::vector<double> y(st.a);
    y.insert(y.end(), st.u.begin(), st.u.end());
    return y;
}

FullState FullSystem::unpack(const double *y) const {
    FullState st;
    st.m = m_;
    st.d = d_;
    st.a.assign(y, y + m_);
    st.u.assign(y + m_, y + m_ + m_ * d_);
    st.u_star = us_;
    return st;
}

// ---------------- simplified ----------------

SimplifiedSystem::SimplifiedSystem(int level, double eps, double sigma_l, double phi_l, std::vector<double> weights)
    : level_(level), eps_(eps), sig_(sigma_l), phi_(phi_l), w_(std::move(weights)) {
    if (level_ < 2)
        throw std::invalid_argument("simplified model: level must be at least 2");
    if (!(eps_ > 0.0))
        throw std::invalid_argument("simplified model: eps must be positive");
    if (w_.empty())
        throw std::invalid_argument("simplified model: need at least one particle");
    e2b_ = std::pow(eps_, 2.0 * beta());
}

double SimplifiedSystem::residual(const double *y) const {
    const std::size_t m = w_.size();
    double M = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        M += w_[i] * y[i] * std::pow(y[m + i], level_);
    return phi_ - sig_ * M;
}

void SimplifiedSystem::rhs(double, const double *y, double *dy) {
    const std::size_t m = w_.size();
    const double res = residual(y);
    const int l = level_;
    for (std::size_t i = 0; i < m; ++i) {
        double a = y[i], s = y[m + i];
        double sl1 = std::pow(s, l - 1);
        dy[i] = sig_ * sl1 * s * res;
        dy[m + i] = l * sig_ * a * sl1 * (1.0 - e2b_ * s * s) * res;
    }
}

double SimplifiedSystem::risk(const double *y) {
    double r = residual(y);
    return 0.5 * r * r;
}

double SimplifiedSystem::risk_rate(const double *y) const {
    const std::size_t m = w_.size();
    const int l = level_;
    double r = residual(y);
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double a = y[i], s = y[m + i];
        acc += w_[i] * std::pow(s, 2 * (l - 1)) * (double(l * l) * a * a * (1.0 - e2b_ * s * s) + s * s);
    }
    return -2.0 * sig_ * sig_ * (0.5 * r * r) * acc;
}

std::vector<double> SimplifiedSystem::conserved(const double *y) const {
    const std::size_t m = w_.size();
    std::vector<double> c(m);
    for (std::size_t i = 0; i < m; ++i) {
        double a = y[i], s = y[m + i];
        c[i] = a * a + std::log1p(-e2b_ * s * s) / (double(level_) * e2b_);
    }
    return c;
}

std::vector<double> SimplifiedSystem::pack(const SimplifiedState &st) const {
    if (st.a.size() != w_.size() || st.s.size() != w_.size())
        throw std::invalid_argument("simplified pack: size mismatch");
    std::vector<double> y(st.a);
    y.insert(y.end(), st.s.begin(), st.s.end());
    return y;
}

SimplifiedState SimplifiedSystem::unpack(const double *y) const {
    SimplifiedState st;
    const std::size_t m = w_.size();
    st.a.assign(y, y + m);
    st.s.assign(y + m, y + 2 * m);
    st.weights = w_;
    st.level = level_;
    st.eps = eps_;
    return st;
}

// ---------------- typed wrappers ----------------

FullState rhs_full(const FullState &st, const KernelPair &kp, double eps) {
    FullSystem sys(kp, st.m, st.d, st.u_star, eps, 0.0);
    std::vector<double> y = sys.pack(st), dy(y.size());
    sys.rhs(0.0, y.data(), dy.data());
    FullState out = sys.unpack(dy.data());
    return out;
}

ReducedState rhs_reduced(const ReducedState &st, const KernelPair &kp, double eps) {
    ReducedSystem sys(kp, st.m, eps, 0.0);
    std::vector<double> y = sys.pack(st), dy(y.size());
    sys.rhs(0.0, y.data(), dy.data());
    ReducedState out = sys.unpack(dy.data());
    for (std::size_t i = 0; i < st.m; ++i)
        out.R[i * st.m + i] = 0.0;
    return out;
}

MeanFieldState rhs_meanfield(const MeanFieldState &st, const KernelPair &kp, double eps) {
    MeanFieldSystem sys(kp, st.weights, eps, 0.0);
    std::vector<double> y = sys.pack(st), dy(y.size());
    sys.rhs(0.0, y.data(), dy.data());
    return sys.unpack(dy.data());
}

SimplifiedState rhs_simplified(const SimplifiedState &st, double sigma_l, double phi_l) {
    SimplifiedSystem sys(st.level, st.eps, sigma_l, phi_l, st.weights);
    std::vector<double> y = sys.pack(st), dy(y.size());
    sys.rhs(0.0, y.data(), dy.data());
    return sys.unpack(dy.data());
}

double risk_full(const FullState &st, const KernelPair &kp, double phi_norm2) {
    FullSystem sys(kp, st.m, st.d, st.u_star, 1.0, phi_norm2);
    std::vector<double> y = sys.pack(st);
    return sys.risk(y.data());
}

double risk_reduced(const ReducedState &st, const KernelPair &kp, double phi_norm2) {
    ReducedSystem sys(kp, st.m, 1.0, phi_norm2);
    std::vector<double> y = sys.pack(st);
    return sys.risk(y.data());
}

double risk_meanfield(const MeanFieldState &st, const KernelPair &kp, double phi_norm2) {
    MeanFieldSystem sys(kp, st.weights, 1.0, phi_norm2);
    std::vector<double> y = sys.pack(st);
    return sys.risk(y.data());
}

RiskPoint risk_hermite(const MeanFieldState &st, const HermiteSeries &phi, const HermiteSeries &sigma) {
    int K = std::max(phi.truncation(), sigma.truncation());
    RiskPoint p;
    p.components.assign(K + 1, 0.0);
    const std::size_t m = st.a.size();
    std::vector<double> pw(m);
    for (std::size_t i = 0; i < m; ++i)
        pw[i] = st.weights[i] * st.a[i];
    for (int k = 0; k <= K; ++k) {
        double M = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            M += pw[i];
        double r = phi.coeff(k) - sigma.coeff(k) * M;
        p.components[k] = 0.5 * r * r;
        p.risk += p.components[k];
        for (std::size_t i = 0; i < m; ++i)
            pw[i] *= st.s[i];
    }
    return p;
}

double rperp_offdiag(const ReducedState &st) {
    double acc = 0.0;
    for (std::size_t i = 0; i < st.m; ++i)
        for (std::size_t j = 0; j < st.m; ++j)
            if (i != j) {
                double v = st.r(i, j) - st.s[i] * st.s[j];
                acc += v * v;
            }
    return acc / double(st.m * st.m);
}

std::vector<double> rperp_diagnostic(const std::vector<ReducedState> &traj) {
    std::vector<double> out;
    out.reserve(traj.size());
    for (const auto &st : traj)
        out.push_back(rperp_offdiag(st));
    return out;
}

double paired_distance(const std::vector<double> &a1, const std::vector<double> &s1, const std::vector<double> &a2,
                       const std::vector<double> &s2) {
    if (a1.size() != a2.size() || s1.size() != s2.size() || a1.size() != s1.size() || a1.empty())
        throw std::invalid_argument("paired_distance: size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a1.size(); ++i) {
        double da = a1[i] - a2[i], ds = s1[i] - s2[i];
        acc += da * da + ds * ds;
    }
    return acc / double(a1.size());
}

} // namespace plateau
