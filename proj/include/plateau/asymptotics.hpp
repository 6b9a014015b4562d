#pragma once

#include "plateau/hermite.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace plateau {

class ConstantModeSkipped : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

struct AsymptoticParams {
    double sigma0 = 0, sigma1 = 0, phi0 = 0, phi1 = 0;
    double a_mean_init = 0;
    std::vector<double> a_perp_init;
    std::vector<double> weights;
    double a_perp_norm2 = 0;
    double eps = 1e-3;

    static AsymptoticParams from(const HermiteSeries &phi, const HermiteSeries &sigma, const std::vector<double> &a_init,
                                 const std::vector<double> &weights, double eps);
    bool constant_mode() const;
    // phi0/sigma0, or the frozen initial mean when sigma0 vanishes
    double a_limit() const;
};

struct Profiles {
    std::vector<double> a, s;
};

double phase1_mean(const AsymptoticParams &p, double t1);
// a and the rescaled overlap s^(1); the actual s is about sqrt(eps) s^(1).
Profiles phase2_solution(const AsymptoticParams &p, double t2);
double phase3_lambda(const AsymptoticParams &p, double t3);
// a^(-1) and s^(1); actual a ~ eps^{-1/4} a^(-1), s ~ eps^{1/4} s^(1).
Profiles phase3_solution(const AsymptoticParams &p, double t3);

// General solution of lambda' = alpha (beta - gamma lambda^2) lambda.
double bernoulli_lambda(double alpha, double beta, double gamma, double lambda0, double t);

double t3_of(const AsymptoticParams &p, double t);
double predicted_risk(const AsymptoticParams &p, const HermiteSeries &phi, double t);

struct PieceWindow {
    int piece;
    double t_lo, t_hi;
};

// Validity windows of the three pieces, cut at geometric midpoints of the
// scale centers eps, sqrt(eps), the level-1 center and eps^{1/4}.
std::vector<PieceWindow> piece_windows(const AsymptoticParams &p);

struct Transition {
    int level;
    double center;         // NaN when only the exponent is known
    double exponent;       // center ~ eps^exponent (level 1 up to the log factor)
    double width_exponent; // NaN when not stated
    std::string note;
};

std::vector<Transition> predicted_transitions(const AsymptoticParams &p, int L);

struct ExponentRow {
    int level;
    double beta, omega, mu, nu, tau_exponent;
};

ExponentRow exponents(int level);
std::vector<ExponentRow> exponent_table(int L);

} // namespace plateau
