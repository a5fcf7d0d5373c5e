#pragma once

#include <span>

#include <Eigen/Dense>

#include "med/design.hpp"
#include "med/types.hpp"

namespace med {

/// Values of s below this are treated as the s = 0 product form.
inline constexpr double kSZeroThreshold = 1e-8;

double normalize_s(double s);

/// The (s, whitener) pair that defines the generalized, optionally Mahalanobis, distance.
/// The whitener is W = chol(Sigma)^{-1}, so W Sigma W' = I.
struct DistanceSpec {
    double s = 2.0;
    Eigen::MatrixXd whitener;  // empty means identity
    Eigen::MatrixXd sigma;     // empty means identity

    static DistanceSpec identity(double s);
    static DistanceSpec whitened(const Eigen::MatrixXd& sigma, double s);

    bool is_identity() const { return whitener.size() == 0; }
    Point whiten(std::span<const double> x) const;
    PointSet whiten(const PointSet& xs) const;
};

/// log q(x) = -logf / (2p).
double charge_log(double logf, std::size_t p);

double dist_s(std::span<const double> u, std::span<const double> v, const DistanceSpec& spec);
double log_dist_s(std::span<const double> u, std::span<const double> v, const DistanceSpec& spec);

/// gamma*(logf_i + logf_j) + 2p*log d_s(W xi, W xj): 2p times the log of one pairwise
/// term of the MED objective. Coincident points give -inf.
double pair_term_log(double logf_i, double logf_j, std::span<const double> xi,
                     std::span<const double> xj, std::size_t p, double gamma,
                     const DistanceSpec& spec);

struct CriterionValue {
    double value = 0.0;
    std::size_t i = 0;
    std::size_t j = 0;
};

CriterionValue psi_log(const PointSet& points, std::span<const double> logf, double gamma,
                       const DistanceSpec& spec);
CriterionValue psi_log(const Design& design, double gamma, const DistanceSpec& spec);

}  // namespace med
