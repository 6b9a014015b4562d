#pragma once

#include "plateau/flow.hpp"
#include "plateau/hermite.hpp"

#include <cstddef>
#include <random>
#include <stdexcept>
#include <vector>

namespace plateau {

struct SgdConfig {
    std::size_t d = 200, m = 40;
    double eta = 1e-3;
    double eps = 0.1;
    std::size_t n_steps = 2000;
    unsigned long long seed = 0;
    double z = 0.0;
    std::size_t checkpoint_every = 0; // 0 picks n_steps / 50
};

using SgdParticleState = FullState;

// Seed of the data stream paired with an initialization seed.
unsigned long long data_seed(unsigned long long seed);

class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Gaussian covariates with responses y = phi(<u_star, x>).
class DataStream {
public:
    DataStream(std::size_t d, std::vector<double> u_star, RealFn phi, unsigned long long seed);
    // Fills x (length d) and returns y.
    double next(double *x);
    std::size_t dim() const { return d_; }

private:
    std::size_t d_;
    std::vector<double> us_;
    RealFn phi_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> N_{0.0, 1.0};
};

struct DataPoint {
    std::vector<double> x;
    double y;
};

std::vector<DataPoint> sample_batch(std::size_t d, std::size_t count, const std::vector<double> &u_star,
                                    const RealFn &phi, unsigned long long seed);

// Population-gradient step with tangential projection and renormalization.
void gd_step(SgdParticleState &st, const KernelPair &kp, double eta, double eps);

struct StepScratch {
    std::vector<double> pre, act, dact;
};

// One-pass SGD step, tangential projection, no renormalization.
void sgd_step(SgdParticleState &st, const double *x, double y, const Activation &sigma, double eta, double eps,
              StepScratch &scratch);

// Projected SGD step: stochastic increments then exact projection on the sphere.
void psgd_step(SgdParticleState &st, const double *x, double y, const Activation &sigma, double eta, double eps,
               StepScratch &scratch);

// Stochastic increments (F_hat_i, G_hat_i) at a data point; G row i has length d.
void stochastic_increments(const SgdParticleState &st, const double *x, double y, const Activation &sigma,
                           std::vector<double> &F, std::vector<double> &G, StepScratch &scratch);

// Population increments of the gradient flow, a-block without the 1/eps factor.
void population_increments(const SgdParticleState &st, const KernelPair &kp, std::vector<double> &F,
                           std::vector<double> &G);

struct CouplingPoint {
    std::size_t step;
    double t;
    double risk_gf, risk_sgd;
    double risk_gap;
    double param_gap; // max_i |theta_i(k eta) - theta_bar_i(k)|
    double coupling;  // running sup of param_gap
};

struct CouplingReport {
    std::vector<CouplingPoint> points;
    double bound_shape = 0.0; // sqrt(eta) (sqrt(d + log m) + z)
    double sup_risk_gap() const;
    double sup_param_gap() const;
};

struct SgdRun {
    std::vector<double> times;
    std::vector<double> risk;
    CouplingReport coupling;
    SgdParticleState final_state;
};

// Projected SGD from the config seed, with risk computed from inner products
// at checkpoints and a matched full-flow integration as reference.
SgdRun run_psgd(const SgdConfig &cfg, const Activation &phi, const Activation &sigma, const WeightLaw &pa,
                int K = 16, bool with_reference = true);

// Monte Carlo estimate of the population risk over n fresh samples.
double risk_monte_carlo(const SgdParticleState &st, const RealFn &phi, const Activation &sigma, std::size_t n,
                        unsigned long long seed);

} // namespace plateau
