#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace plateau {

using RealFn = std::function<double(double)>;

// Nodes and weights of a quadrature rule; weights of the Gaussian rules
// are probability weights (they sum to one).
struct QuadRule {
    std::vector<double> x;
    std::vector<double> w;
};

// n-point Gauss rule for the standard normal density. Cached per n.
const QuadRule &gauss_hermite(int n);

// n-point Gauss-Legendre rule on [-1, 1].
QuadRule gauss_legendre(int n);

// Normal-density rule for a function with kinks at `breaks`: composite
// Gauss-Legendre on each smooth piece of a truncated line.
QuadRule piecewise_normal_rule(const std::vector<double> &breaks, double half_width = 16.0,
                               double panel = 0.5, int nodes_per_panel = 16);

// L2-normalized probabilists' Hermite polynomial h_k(x) = He_k(x)/sqrt(k!).
double hermite_eval(int k, double x);

// h_0(x) .. h_K(x) into out[0..K].
void hermite_eval_all(int K, double x, double *out);

struct HermiteSeries {
    std::vector<double> coeffs;
    // ||f||^2 under the Gaussian measure; NaN when unknown.
    double norm2 = 0.0;
    double tail_mass = 0.0;

    int truncation() const { return static_cast<int>(coeffs.size()) - 1; }
    double coeff(int k) const { return k >= 0 && k < static_cast<int>(coeffs.size()) ? coeffs[k] : 0.0; }
    double sum_sq(int from = 0) const;
    bool tail_warning() const { return tail_mass > 1e-6; }
    double operator()(double x) const;
    // Zero-padded or truncated copy with K+1 coefficients.
    HermiteSeries resized(int K) const;
};

HermiteSeries make_series(std::vector<double> coeffs);

// c_k = E[f(G) h_k(G)] by quadrature. With breakpoints the piecewise rule is
// used, otherwise Gauss-Hermite with quad_order nodes.
HermiteSeries hermite_coeffs(const RealFn &f, int K, int quad_order = 200,
                             const std::vector<double> &breakpoints = {});

struct Activation {
    std::string name;
    RealFn f;
    RealFn df;
    std::vector<double> breakpoints;
    std::optional<std::vector<double>> exact; // Hermite coefficients when known in closed form
    std::optional<double> norm2;
};

// "relu", "erf" (alias "tanh-like"), "tanh", "he_k:<k>", "poly:<c0,c1,...>".
Activation named_function(const std::string &spec);

HermiteSeries series_of(const Activation &act, int K, int quad_order = 200);

enum class KernelFn { V, dV, U, dU, ddU };

// V(s) = sum phi_k sigma_k s^k and U(s) = sum sigma_k^2 s^k with derivative tables.
struct KernelPair {
    std::vector<double> v, dv;
    std::vector<double> u, du, ddu;
    int K = 0;

    const std::vector<double> &table(KernelFn which) const;
};

KernelPair make_kernels(const HermiteSeries &phi, const HermiteSeries &sigma);

// Throws std::domain_error for |s| > 1.
double kernel_eval(const KernelPair &kp, KernelFn which, double s);

// Unchecked batched evaluation used inside the flows.
void kernel_eval_batch(const KernelPair &kp, KernelFn which, const double *s, double *out, std::size_t n);

} // namespace plateau
