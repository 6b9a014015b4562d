#include "plateau/kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#define PLATEAU_AVX2 __attribute__((target("avx2,fma")))

namespace plateau::kernels::avx2 {

namespace {

PLATEAU_AVX2 inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

} // namespace

PLATEAU_AVX2 double dot(const double *x, const double *y, std::size_t n) {
    __m256d a0 = _mm256_setzero_pd();
    __m256d a1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
        a1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), a1);
    }
    for (; i + 4 <= n; i += 4)
        a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
    double acc = hsum(_mm256_add_pd(a0, a1));
    for (; i < n; ++i)
        acc += x[i] * y[i];
    return acc;
}

PLATEAU_AVX2 void axpy(double alpha, const double *x, double *y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy));
    }
    for (; i < n; ++i)
        y[i] += alpha * x[i];
}

PLATEAU_AVX2 void scale(double alpha, double *x, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i)
        x[i] *= alpha;
}

PLATEAU_AVX2 void horner(const double *c, std::size_t nc, const double *x, double *out, std::size_t n) {
    if (nc == 0) {
        for (std::size_t i = 0; i < n; ++i)
            out[i] = 0.0;
        return;
    }
    const __m256d top = _mm256_set1_pd(c[nc - 1]);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256d x0 = _mm256_loadu_pd(x + i), x1 = _mm256_loadu_pd(x + i + 4);
        __m256d p0 = top, p1 = top;
        for (std::size_t k = nc - 1; k-- > 0;) {
            __m256d ck = _mm256_set1_pd(c[k]);
            p0 = _mm256_fmadd_pd(p0, x0, ck);
            p1 = _mm256_fmadd_pd(p1, x1, ck);
        }
        _mm256_storeu_pd(out + i, p0);
        _mm256_storeu_pd(out + i + 4, p1);
    }
    for (; i + 4 <= n; i += 4) {
        __m256d x0 = _mm256_loadu_pd(x + i);
        __m256d p0 = top;
        for (std::size_t k = nc - 1; k-- > 0;)
            p0 = _mm256_fmadd_pd(p0, x0, _mm256_set1_pd(c[k]));
        _mm256_storeu_pd(out + i, p0);
    }
    for (; i < n; ++i) {
        double acc = c[nc - 1];
        for (std::size_t k = nc - 1; k-- > 0;)
            acc = acc * x[i] + c[k];
        out[i] = acc;
    }
}

PLATEAU_AVX2 void mul(const double *x, const double *y, double *out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i)
        out[i] = x[i] * y[i];
}

} // namespace plateau::kernels::avx2

#else

// Non-x86 builds alias the AVX2 entry points to the scalar code so the
// dispatch table and the equivalence tests still link.
namespace plateau::kernels::avx2 {
double dot(const double *x, const double *y, std::size_t n) { return scalar::dot(x, y, n); }
void axpy(double alpha, const double *x, double *y, std::size_t n) { scalar::axpy(alpha, x, y, n); }
void scale(double alpha, double *x, std::size_t n) { scalar::scale(alpha, x, n); }
void horner(const double *c, std::size_t nc, const double *x, double *out, std::size_t n) {
    scalar::horner(c, nc, x, out, n);
}
void mul(const double *x, const double *y, double *out, std::size_t n) { scalar::mul(x, y, out, n); }
} // namespace plateau::kernels::avx2

#endif
