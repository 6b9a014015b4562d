#include "plateau/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace plateau::kernels {

namespace {

struct Table {
    double (*dot)(const double *, const double *, std::size_t);
    void (*axpy)(double, const double *, double *, std::size_t);
    void (*scale)(double, double *, std::size_t);
    void (*horner)(const double *, std::size_t, const double *, double *, std::size_t);
    void (*mul)(const double *, const double *, double *, std::size_t);
};

constexpr Table scalar_table{scalar::dot, scalar::axpy, scalar::scale, scalar::horner, scalar::mul};
constexpr Table avx2_table{avx2::dot, avx2::axpy, avx2::scale, avx2::horner, avx2::mul};

bool detect_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Table *initial_table() {
    const char *env = std::getenv("PLATEAU_ISA");
    if (env && std::strcmp(env, "scalar") == 0)
        return &scalar_table;
    return detect_avx2() ? &avx2_table : &scalar_table;
}

std::atomic<const Table *> &table() {
    static std::atomic<const Table *> t{initial_table()};
    return t;
}

const Table &tab() { return *table().load(std::memory_order_relaxed); }

} // namespace

bool avx2_available() {
    static const bool ok = detect_avx2();
    return ok;
}

Isa active_isa() { return &tab() == &avx2_table ? Isa::avx2 : Isa::scalar; }

const char *isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool set_isa(Isa isa) {
    if (isa == Isa::avx2 && !avx2_available()) {
        table().store(&scalar_table);
        return false;
    }
    table().store(isa == Isa::avx2 ? &avx2_table : &scalar_table);
    return true;
}

double dot(const double *x, const double *y, std::size_t n) { return tab().dot(x, y, n); }
void axpy(double alpha, const double *x, double *y, std::size_t n) { tab().axpy(alpha, x, y, n); }
void scale(double alpha, double *x, std::size_t n) { tab().scale(alpha, x, n); }
void horner(const double *c, std::size_t nc, const double *x, double *out, std::size_t n) {
    tab().horner(c, nc, x, out, n);
}
void mul(const double *x, const double *y, double *out, std::size_t n) { tab().mul(x, y, out, n); }

} // namespace plateau::kernels
