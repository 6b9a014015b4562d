#pragma once

#include "plateau/hermite.hpp"
#include "plateau/integrate.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace plateau {

// Law of the second-layer weights at initialization.
struct WeightLaw {
    enum class Kind { rademacher, uniform, atoms };
    Kind kind = Kind::rademacher;
    double lo = -1.0, hi = 1.0;
    std::vector<double> atoms;

    // "rademacher", "uniform(lo,hi)", "atoms(v1,v2,...)"
    static WeightLaw parse(const std::string &spec);
    std::string str() const;
    std::vector<double> sample(std::size_t m, unsigned long long seed) const;
};

struct FullState {
    std::size_t m = 0, d = 0;
    std::vector<double> a;
    std::vector<double> u; // m rows of length d
    std::vector<double> u_star;

    const double *row(std::size_t i) const { return u.data() + i * d; }
    double *row(std::size_t i) { return u.data() + i * d; }
};

struct ReducedState {
    std::size_t m = 0;
    std::vector<double> a, s;
    std::vector<double> R; // m x m, symmetric, unit diagonal

    double r(std::size_t i, std::size_t j) const { return R[i * m + j]; }
};

struct MeanFieldState {
    std::vector<double> a, s, weights;
    std::size_t m() const { return a.size(); }
};

struct SimplifiedState {
    std::vector<double> a, s, weights;
    int level = 2;
    double eps = 1e-3;
    std::size_t m() const { return a.size(); }
};

FullState init_full(std::size_t m, std::size_t d, const WeightLaw &pa, unsigned long long seed);
MeanFieldState init_meanfield(std::size_t m, const WeightLaw &pa, unsigned long long seed);
// s = 0, R = I with the given weights a.
ReducedState reduced_at_origin(const std::vector<double> &a);
ReducedState gram_of(const FullState &st);
std::vector<double> uniform_weights(std::size_t m);

// ---- systems on flat vectors ----

class MeanFieldSystem : public OdeSystem {
public:
    MeanFieldSystem(KernelPair kp, std::vector<double> weights, double eps, double phi_norm2);
    std::size_t dim() const override { return 2 * w_.size(); }
    void rhs(double t, const double *y, double *dy) override;
    double risk(const double *y) override;
    bool project(double *y) override;

    std::vector<double> pack(const MeanFieldState &st) const;
    MeanFieldState unpack(const double *y) const;

private:
    KernelPair kp_;
    std::vector<double> w_;
    double eps_, phi_norm2_;
    std::vector<double> ss_, U_, dU_, Vs_, dVs_, wa_;
};

class ReducedSystem : public OdeSystem {
public:
    ReducedSystem(KernelPair kp, std::size_t m, double eps, double phi_norm2);
    std::size_t dim() const override { return 2 * m_ + m_ * (m_ - 1) / 2; }
    void rhs(double t, const double *y, double *dy) override;
    double risk(const double *y) override;
    bool project(double *y) override;

    std::vector<double> pack(const ReducedState &st) const;
    ReducedState unpack(const double *y) const;
    // Sum of |du_i/dt|^2 computed from Gram data alone.
    double velocity_norm2(const double *y);

private:
    void expand(const double *y);
    KernelPair kp_;
    std::size_t m_;
    double eps_, phi_norm2_;
    std::vector<double> R_, U_, dU_, B_, Q_, c_, Vs_, dVs_;
};

class FullSystem : public OdeSystem {
public:
    FullSystem(KernelPair kp, std::size_t m, std::size_t d, std::vector<double> u_star, double eps,
               double phi_norm2);
    std::size_t dim() const override { return m_ + m_ * d_; }
    void rhs(double t, const double *y, double *dy) override;
    double risk(const double *y) override;
    bool project(double *y) override;

    std::vector<double> pack(const FullState &st) const;
    FullState unpack(const double *y) const;
    const std::vector<double> &u_star() const { return us_; }

private:
    void gram(const double *u);
    KernelPair kp_;
    std::size_t m_, d_;
    std::vector<double> us_;
    double eps_, phi_norm2_;
    std::vector<double> s_, R_, U_, dU_, Vs_, dVs_;
};

// Rescaled single-degree model in tau.
class SimplifiedSystem : public OdeSystem {
public:
    SimplifiedSystem(int level, double eps, double sigma_l, double phi_l, std::vector<double> weights);
    std::size_t dim() const override { return 2 * w_.size(); }
    void rhs(double t, const double *y, double *dy) override;
    double risk(const double *y) override;

    std::vector<double> pack(const SimplifiedState &st) const;
    SimplifiedState unpack(const double *y) const;
    // a_i^2 + (eps^{-2 beta}/l) log(1 - eps^{2 beta} s_i^2)
    std::vector<double> conserved(const double *y) const;
    // Right side of the closed risk ODE, evaluated from the state.
    double risk_rate(const double *y) const;
    double beta() const { return 1.0 / (2.0 * (level_ + 1)); }
    double residual(const double *y) const;

private:
    int level_;
    double eps_, sig_, phi_, e2b_;
    std::vector<double> w_;
};

// ---- operations on typed states ----

FullState rhs_full(const FullState &st, const KernelPair &kp, double eps);
ReducedState rhs_reduced(const ReducedState &st, const KernelPair &kp, double eps);
MeanFieldState rhs_meanfield(const MeanFieldState &st, const KernelPair &kp, double eps);
SimplifiedState rhs_simplified(const SimplifiedState &st, double sigma_l, double phi_l);

double risk_full(const FullState &st, const KernelPair &kp, double phi_norm2);
double risk_reduced(const ReducedState &st, const KernelPair &kp, double phi_norm2);
double risk_meanfield(const MeanFieldState &st, const KernelPair &kp, double phi_norm2);

struct RiskPoint {
    double risk = 0.0;
    std::vector<double> components;
};

// Degree-wise split 1/2 (phi_k - sigma_k sum_i w_i a_i s_i^k)^2.
RiskPoint risk_hermite(const MeanFieldState &st, const HermiteSeries &phi, const HermiteSeries &sigma);

// (1/m^2) sum_{i != j} (R_ij - s_i s_j)^2
double rperp_offdiag(const ReducedState &st);
std::vector<double> rperp_diagnostic(const std::vector<ReducedState> &traj);

// (1/m) sum_i |(a_i, s_i) - (a'_i, s'_i)|^2
double paired_distance(const std::vector<double> &a1, const std::vector<double> &s1, const std::vector<double> &a2,
                       const std::vector<double> &s2);

} // namespace plateau
