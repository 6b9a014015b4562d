#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace plateau {

// Autonomous or time-dependent first-order system on a flat state vector.
class OdeSystem {
public:
    virtual ~OdeSystem() = default;
    virtual std::size_t dim() const = 0;
    virtual void rhs(double t, const double *y, double *dy) = 0;
    // Map a state back onto its constraint set after an accepted step.
    virtual bool project(double *) { return false; }
    virtual double risk(const double *y) = 0;
};

struct FlowConfig {
    double eps = 1e-3;
    double t_end = 1.0;
    double rtol = 1e-8;
    double atol = 1e-10;
    double max_step = 0.0; // 0 selects the boundary-layer policy
    double h0 = 0.0;       // 0 selects eps/100
    unsigned long long seed = 0;
    std::size_t max_steps = 200'000'000;
};

class StiffnessError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Trajectory {
    std::vector<double> t;
    std::vector<std::vector<double>> y;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t nfev = 0;
};

using StepObserver = std::function<void(double t, const double *y, std::size_t n)>;

// Dormand-Prince 5(4) with dense output at `samples` (monotone, all on the
// far side of t0; may run backwards).
Trajectory integrate(OdeSystem &sys, const std::vector<double> &y0, double t0, const std::vector<double> &samples,
                     const FlowConfig &cfg, const StepObserver &on_step = {});

// n points log-uniform in [t_min, t_max].
std::vector<double> log_grid(double t_min, double t_max, std::size_t n);

} // namespace plateau
