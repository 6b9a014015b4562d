#pragma once

#include <cstddef>

// Dense inner loops shared by the flows and the SGD harness.
// Every routine has a portable scalar reference and an AVX2/FMA variant;
// the variant is picked once at startup from cpuid.
namespace plateau::kernels {

enum class Isa { scalar, avx2 };

Isa active_isa();
bool avx2_available();
const char *isa_name(Isa isa);

// Switch the dispatch table. Requesting avx2 on a machine without it
// falls back to scalar and returns false.
bool set_isa(Isa isa);

double dot(const double *x, const double *y, std::size_t n);
void axpy(double alpha, const double *x, double *y, std::size_t n);
void scale(double alpha, double *x, std::size_t n);

// out[i] = sum_k c[k] * x[i]^k, evaluated in Horner form.
void horner(const double *c, std::size_t nc, const double *x, double *out, std::size_t n);

// out[i] = x[i] * y[i]
void mul(const double *x, const double *y, double *out, std::size_t n);

namespace scalar {
double dot(const double *x, const double *y, std::size_t n);
void axpy(double alpha, const double *x, double *y, std::size_t n);
void scale(double alpha, double *x, std::size_t n);
void horner(const double *c, std::size_t nc, const double *x, double *out, std::size_t n);
void mul(const double *x, const double *y, double *out, std::size_t n);
} // namespace scalar

namespace avx2 {
double dot(const double *x, const double *y, std::size_t n);
void axpy(double alpha, const double *x, double *y, std::size_t n);
void scale(double alpha, double *x, std::size_t n);
void horner(const double *c, std::size_t nc, const double *x, double *out, std::size_t n);
void mul(const double *x, const double *y, double *out, std::size_t n);
} // namespace avx2

} // namespace plateau::kernels
