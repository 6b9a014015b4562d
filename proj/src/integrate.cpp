#include "plateau/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace plateau {

namespace {

// Dormand-Prince tableau
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

} // namespace

std::vector<double> log_grid(double t_min, double t_max, std::size_t n) {
    if (!(t_min > 0.0) || !(t_max > t_min) || n < 2)
        throw std::invalid_argument("log_grid: need 0 < t_min < t_max and n >= 2");
    std::vector<double> g(n);
    double l0 = std::log(t_min), l1 = std::log(t_max);
    for (std::size_t i = 0; i < n; ++i)
        g[i] = std::exp(l0 + (l1 - l0) * double(i) / double(n - 1));
    g.back() = t_max;
    return g;
}

Trajectory integrate(OdeSystem &sys, const std::vector<double> &y0, double t0, const std::vector<double> &samples,
                     const FlowConfig &cfg, const StepObserver &on_step) {
    const std::size_t n = sys.dim();
    if (y0.size() != n)
        throw std::invalid_argument("integrate: state size does not match system dimension");
    if (!(cfg.rtol > 0.0) || !(cfg.atol > 0.0))
        throw std::invalid_argument("integrate: rtol and atol must be positive");
    Trajectory out;
    if (samples.empty())
        return out;
    const double t_end = samples.back();
    const double span = std::abs(t_end - t0);
    const double dir = t_end >= t0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (dir * (samples[i] - t0) < 0.0 || (i > 0 && dir * (samples[i] - samples[i - 1]) < 0.0))
            throw std::invalid_argument("integrate: sample times must be monotone away from t0");
    }

    std::vector<double> y = y0, ynew(n), ytmp(n);
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
    std::vector<double> r1(n), r2(n), r3(n), r4(n), r5(n);
    sys.project(y.data());

    std::size_t next = 0;
    while (next < samples.size() && samples[next] == t0) {
        out.t.push_back(t0);
        out.y.push_back(y);
        ++next;
    }
    if (next == samples.size())
        return out;

    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(y[i]))
            throw std::invalid_argument("integrate: non-finite initial state");
    sys.rhs(t0, y.data(), k1.data());
    ++out.nfev;
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(k1[i]))
            throw std::invalid_argument("integrate: right-hand side not finite at the initial state");

    const double layer = 10.0 * cfg.eps;
    auto cap_at = [&](double t) {
        if (cfg.max_step > 0.0)
            return cfg.max_step;
        if (std::abs(t - t0) < layer)
            return std::min(span / 1000.0, layer);
        return std::numeric_limits<double>::infinity();
    };

    double t = t0;
    double h = cfg.h0 > 0.0 ? cfg.h0 : cfg.eps / 100.0;
    h = std::min({h, cap_at(t), span});
    double facold = 1e-4;
    bool last_rejected = false;
    const double beta = 0.04, expo1 = 0.2 - beta * 0.75, safe = 0.9;
    const double hmin = 1e-15 * span;

    while (next < samples.size()) {
        if (out.accepted + out.rejected >= cfg.max_steps)
            throw std::runtime_error("integrate: step budget exhausted");
        h = std::min(h, cap_at(t));
        bool clipped = false;
        double remaining = std::abs(t_end - t);
        if (h >= remaining) {
            h = remaining;
            clipped = true;
        }
        if (h < hmin && !clipped) {
            std::ostringstream os;
            os << "integrate: step size " << h << " underflows at t = " << t
               << "; the system is too stiff for the explicit pair, shorten t_end or increase eps";
            throw StiffnessError(os.str());
        }
        const double hs = dir * h;

        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + hs * a21 * k1[i];
        sys.rhs(t + c2 * hs, ytmp.data(), k2.data());
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + hs * (a31 * k1[i] + a32 * k2[i]);
        sys.rhs(t + c3 * hs, ytmp.data(), k3.data());
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + hs * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        sys.rhs(t + c4 * hs, ytmp.data(), k4.data());
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + hs * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        sys.rhs(t + c5 * hs, ytmp.data(), k5.data());
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + hs * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        sys.rhs(t + hs, ytmp.data(), k6.data());
        for (std::size_t i = 0; i < n; ++i)
            ynew[i] = y[i] + hs * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
        sys.rhs(t + hs, ynew.data(), k7.data());
        out.nfev += 6;

        double errn = 0.0;
        bool finite = true;
        for (std::size_t i = 0; i < n; ++i) {
            double e = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            double sc = cfg.atol + cfg.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            double q = std::abs(e) / sc;
            if (!std::isfinite(q) || !std::isfinite(ynew[i]))
                finite = false;
            errn = std::max(errn, q);
        }
        if (!finite)
            errn = 1e10;

        if (errn <= 1.0) {
            // dense output coefficients for the step
            for (std::size_t i = 0; i < n; ++i) {
                double dy = ynew[i] - y[i];
                r1[i] = y[i];
                r2[i] = dy;
                r3[i] = hs * k1[i] - dy;
                r4[i] = dy - hs * k7[i] - r3[i];
                r5[i] = hs * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
            }
            double tnew = clipped ? t_end : t + hs;
            while (next < samples.size() && dir * (samples[next] - tnew) <= 0.0) {
                double th = (samples[next] - t) / hs;
                std::vector<double> ys(n);
                double th1 = 1.0 - th;
                for (std::size_t i = 0; i < n; ++i)
                    ys[i] = r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
                sys.project(ys.data());
                out.t.push_back(samples[next]);
                out.y.push_back(std::move(ys));
                ++next;
            }
            std::swap(y, ynew);
            t = tnew;
            ++out.accepted;
            if (sys.project(y.data())) {
                sys.rhs(t, y.data(), k1.data());
                ++out.nfev;
            } else {
                std::swap(k1, k7);
            }
            if (on_step)
                on_step(t, y.data(), n);
            double fac11 = std::pow(errn, expo1);
            double fac = fac11 / std::pow(facold, beta);
            fac = std::clamp(fac / safe, 0.1, 5.0);
            double hnew = h / fac;
            if (last_rejected)
                hnew = std::min(hnew, h);
            facold = std::max(errn, 1e-4);
            last_rejected = false;
            h = hnew;
        } else {
            double fac11 = std::pow(errn, expo1);
            h = h / std::min(5.0, fac11 / safe);
            last_rejected = true;
            ++out.rejected;
        }
    }
    return out;
}

} // namespace plateau
