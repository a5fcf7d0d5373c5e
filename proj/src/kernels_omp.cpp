#include "med/kernels.hpp"

#include <vector>

#include <omp.h>

namespace med::kernels::parallel {

namespace {
// Below this many inner operations the fork/join overhead dominates.
constexpr std::size_t kMinWork = 1 << 14;
}

void update_min_terms(const double* cand, const double* cand_logf, std::size_t n_cand,
                      const double* ref, const double* ref_logf, std::size_t n_ref,
                      std::size_t p, double gamma, double s, double* inout) {
    const auto nc = static_cast<std::ptrdiff_t>(n_cand);
#pragma omp parallel for schedule(static) if (n_cand * n_ref * p > kMinWork)
    for (std::ptrdiff_t c = 0; c < nc; ++c) {
        const double* x = cand + c * p;
        double best = inout[c];
        for (std::size_t t = 0; t < n_ref; ++t) {
            double term = pair_term(gamma, cand_logf[c], ref_logf[t],
                                    log_distance(x, ref + t * p, p, s), p);
            if (term < best) best = term;
        }
        inout[c] = best;
    }
}

MinPair min_pair_term(const double* pts, const double* logf, std::size_t n, std::size_t p,
                      double gamma, double s) {
    std::vector<MinPair> rows(n);
    const auto nn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 8) if (n * n * p > kMinWork)
    for (std::ptrdiff_t i = 0; i < nn; ++i) {
        MinPair best;
        for (std::size_t j = i + 1; j < n; ++j) {
            double term =
                pair_term(gamma, logf[i], logf[j], log_distance(pts + i * p, pts + j * p, p, s), p);
            if (term < best.value) best = {term, static_cast<std::size_t>(i), j};
        }
        rows[i] = best;
    }
    MinPair best;
    for (const auto& r : rows)
        if (r.value < best.value) best = r;
    return best;
}

double cl2_cross_sum(const double* pts, std::size_t n, std::size_t p) {
    std::vector<double> rows(n, 0.0);
    const auto nn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (n * n * p > kMinWork)
    for (std::ptrdiff_t i = 0; i < nn; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) row += cl2_kernel(pts + i * p, pts + j * p, p);
        rows[i] = row;
    }
    double total = 0.0;
    for (double r : rows) total += r;
    return total;
}

void squared_distances(const double* pts, std::size_t n, std::size_t p, const double* q,
                       double* out) {
    const auto nn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (n * p > kMinWork)
    for (std::ptrdiff_t i = 0; i < nn; ++i) {
        double acc = 0.0;
        for (std::size_t l = 0; l < p; ++l) {
            double d = pts[i * p + l] - q[l];
            acc += d * d;
        }
        out[i] = acc;
    }
}

}  // namespace med::kernels::parallel
