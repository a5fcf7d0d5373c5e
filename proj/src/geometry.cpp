#include "med/geometry.hpp"

#include <cmath>

#include "med/kernels.hpp"

namespace med {

double normalize_s(double s) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw std::invalid_argument("distance exponent s must be >= 0");
    return s < kSZeroThreshold ? 0.0 : s;
}

DistanceSpec DistanceSpec::identity(double s) {
    DistanceSpec spec;
    spec.s = normalize_s(s);
    return spec;
}

DistanceSpec DistanceSpec::whitened(const Eigen::MatrixXd& sigma, double s) {
    if (sigma.rows() != sigma.cols() || sigma.rows() == 0)
        throw std::invalid_argument("whitening matrix must be square and non-empty");
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success)
        throw NumericError("whitening matrix is not positive definite");
    const auto p = sigma.rows();
    Eigen::MatrixXd L = llt.matrixL();
    DistanceSpec spec;
    spec.s = normalize_s(s);
    spec.sigma = sigma;
    spec.whitener = L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(p, p));
    return spec;
}

Point DistanceSpec::whiten(std::span<const double> x) const {
    if (is_identity()) return {x.begin(), x.end()};
    const auto p = static_cast<Eigen::Index>(x.size());
    if (whitener.rows() != p) throw std::invalid_argument("whiten: dimension mismatch");
    Point out(x.size(), 0.0);
    for (Eigen::Index i = 0; i < p; ++i) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j <= i; ++j) acc += whitener(i, j) * x[j];
        out[i] = acc;
    }
    return out;
}

PointSet DistanceSpec::whiten(const PointSet& xs) const {
    if (is_identity()) return xs;
    PointSet out(xs.dim());
    out.reserve(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out.push_back(whiten(xs[i]));
    return out;
}

double charge_log(double logf, std::size_t p) { return -logf / (2.0 * static_cast<double>(p)); }

double log_dist_s(std::span<const double> u, std::span<const double> v, const DistanceSpec& spec) {
    if (u.size() != v.size() || u.empty()) throw std::invalid_argument("dist_s: dimension mismatch");
    auto a = spec.whiten(u);
    auto b = spec.whiten(v);
    return kernels::log_distance(a.data(), b.data(), a.size(), spec.s);
}

double dist_s(std::span<const double> u, std::span<const double> v, const DistanceSpec& spec) {
    return std::exp(log_dist_s(u, v, spec));
}

double pair_term_log(double logf_i, double logf_j, std::span<const double> xi,
                     std::span<const double> xj, std::size_t p, double gamma,
                     const DistanceSpec& spec) {
    return kernels::pair_term(gamma, logf_i, logf_j, log_dist_s(xi, xj, spec), p);
}

CriterionValue psi_log(const PointSet& points, std::span<const double> logf, double gamma,
                       const DistanceSpec& spec) {
    if (points.size() < 2) throw std::invalid_argument("psi_log: need at least two points");
    if (logf.size() != points.size()) throw std::invalid_argument("psi_log: logf size mismatch");
    PointSet w = spec.whiten(points);
    auto mp = kernels::parallel::min_pair_term(w.data(), logf.data(), w.size(), w.dim(), gamma,
                                               spec.s);
    return {mp.value, mp.i, mp.j};
}

CriterionValue psi_log(const Design& design, double gamma, const DistanceSpec& spec) {
    return psi_log(design.points, design.logf, gamma, spec);
}

}  // namespace med
