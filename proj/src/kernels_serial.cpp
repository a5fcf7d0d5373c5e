#include "med/kernels.hpp"

#include <vector>

namespace med::kernels::serial {

void update_min_terms(const double* cand, const double* cand_logf, std::size_t n_cand,
                      const double* ref, const double* ref_logf, std::size_t n_ref,
                      std::size_t p, double gamma, double s, double* inout) {
    for (std::size_t c = 0; c < n_cand; ++c) {
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
    MinPair best;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double term =
                pair_term(gamma, logf[i], logf[j], log_distance(pts + i * p, pts + j * p, p, s), p);
            if (term < best.value) best = {term, i, j};
        }
    }
    return best;
}

double cl2_cross_sum(const double* pts, std::size_t n, std::size_t p) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) row += cl2_kernel(pts + i * p, pts + j * p, p);
        total += row;
    }
    return total;
}

void squared_distances(const double* pts, std::size_t n, std::size_t p, const double* q,
                       double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t l = 0; l < p; ++l) {
            double d = pts[i * p + l] - q[l];
            acc += d * d;
        }
        out[i] = acc;
    }
}

}  // namespace med::kernels::serial
