#include "plateau/kernels.hpp"

namespace plateau::kernels::scalar {

double dot(const double *x, const double *y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        acc += x[i] * y[i];
    return acc;
}

void axpy(double alpha, const double *x, double *y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        y[i] += alpha * x[i];
}

void scale(double alpha, double *x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        x[i] *= alpha;
}

void horner(const double *c, std::size_t nc, const double *x, double *out, std::size_t n) {
    if (nc == 0) {
        for (std::size_t i = 0; i < n; ++i)
            out[i] = 0.0;
        return;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double acc = c[nc - 1];
        for (std::size_t k = nc - 1; k-- > 0;)
            acc = acc * x[i] + c[k];
        out[i] = acc;
    }
}

void mul(const double *x, const double *y, double *out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        out[i] = x[i] * y[i];
}

} // namespace plateau::kernels::scalar
