#pragma once

// Hot loops of the engine and diagnostics. Each kernel has a serial reference and an
// OpenMP variant with the same signature; the OpenMP variants reduce in index order, so
// both return bit-identical results for any thread count.

#include <cmath>
#include <cstddef>
#include <limits>

namespace med::kernels {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log d_s(a,b) with d_s = ((1/p) sum |a_l-b_l|^s)^(1/s); s = 0 is the geometric mean.
/// Coincident points give -inf.
inline double log_distance(const double* a, const double* b, std::size_t p, double s) {
    const double inv_p = 1.0 / static_cast<double>(p);
    if (s == 2.0) {
        double acc = 0.0;
        for (std::size_t l = 0; l < p; ++l) {
            double d = a[l] - b[l];
            acc += d * d;
        }
        return acc > 0.0 ? 0.5 * std::log(acc * inv_p) : kNegInf;
    }
    if (s == 0.0) {
        double acc = 0.0;
        for (std::size_t l = 0; l < p; ++l) {
            double d = std::fabs(a[l] - b[l]);
            if (d == 0.0) return kNegInf;
            acc += std::log(d);
        }
        return acc * inv_p;
    }
    if (s == 1.0) {
        double acc = 0.0;
        for (std::size_t l = 0; l < p; ++l) acc += std::fabs(a[l] - b[l]);
        return acc > 0.0 ? std::log(acc * inv_p) : kNegInf;
    }
    if (s < 0.1) {
        // log1p/expm1 keep the small-s power mean accurate near its geometric-mean limit.
        double acc = 0.0;
        for (std::size_t l = 0; l < p; ++l) {
            double d = std::fabs(a[l] - b[l]);
            acc += d > 0.0 ? std::expm1(s * std::log(d)) : -1.0;
        }
        double m = acc * inv_p;
        return m > -1.0 ? std::log1p(m) / s : kNegInf;
    }
    double acc = 0.0;
    for (std::size_t l = 0; l < p; ++l) acc += std::pow(std::fabs(a[l] - b[l]), s);
    return acc > 0.0 ? std::log(acc * inv_p) / s : kNegInf;
}

/// gamma*(logf_a + logf_b) + 2p*log d; -inf for coincident points.
inline double pair_term(double gamma, double logf_a, double logf_b, double log_d, std::size_t p) {
    if (log_d == kNegInf) return kNegInf;
    return gamma * (logf_a + logf_b) + 2.0 * static_cast<double>(p) * log_d;
}

struct MinPair {
    double value = std::numeric_limits<double>::infinity();
    std::size_t i = 0;
    std::size_t j = 0;
};

/// Centered-L2 kernel between two points (one term of the double sum).
inline double cl2_kernel(const double* x, const double* y, std::size_t p) {
    double prod = 1.0;
    for (std::size_t l = 0; l < p; ++l) {
        double ax = std::fabs(x[l] - 0.5);
        double ay = std::fabs(y[l] - 0.5);
        prod *= 1.0 + 0.5 * ax + 0.5 * ay - 0.5 * std::fabs(x[l] - y[l]);
    }
    return prod;
}

#define MED_KERNEL_DECLS                                                                       \
    /* inout[c] = min(inout[c], min_t pair_term(c, t)) over reference rows t. */               \
    void update_min_terms(const double* cand, const double* cand_logf, std::size_t n_cand,     \
                          const double* ref, const double* ref_logf, std::size_t n_ref,        \
                          std::size_t p, double gamma, double s, double* inout);               \
    /* Minimum pair term over i<j; ties resolve to the lexicographically smallest pair. */     \
    MinPair min_pair_term(const double* pts, const double* logf, std::size_t n,                \
                          std::size_t p, double gamma, double s);                              \
    /* sum_i sum_j cl2_kernel(x_i, x_j), accumulated row by row in index order. */             \
    double cl2_cross_sum(const double* pts, std::size_t n, std::size_t p);                     \
    /* out[i] = squared Euclidean distance from row i to q. */                                 \
    void squared_distances(const double* pts, std::size_t n, std::size_t p, const double* q,   \
                           double* out);

namespace serial {
MED_KERNEL_DECLS
}  // namespace serial

namespace parallel {
MED_KERNEL_DECLS
}  // namespace parallel

#undef MED_KERNEL_DECLS

}  // namespace med::kernels
