#pragma once

#include <span>

#include <Eigen/Dense>

#include "med/types.hpp"

namespace med {

/// Correlation parameter that puts the Gaussian correlation at 0.5 for the median
/// nearest-neighbour distance of the training set: log 2 / d_med^2.
double default_theta(const PointSet& X);

/// Limit-kriging interpolator with Gaussian correlation exp(-theta * |x - x'|^2):
///   yhat(x) = r(x)' R^{-1} y / r(x)' R^{-1} 1.
/// When the denominator vanishes the generalized-least-squares mean of y is returned.
class SurrogateModel {
public:
    static SurrogateModel fit(const PointSet& X, std::span<const double> y, double theta,
                              double jitter = 1e-8);

    double predict(std::span<const double> x) const;
    std::vector<double> predict(const PointSet& xs) const;

    double theta() const { return theta_; }
    double jitter() const { return jitter_; }
    double gls_mean() const { return mean_; }
    std::size_t size() const { return X_.size(); }

private:
    PointSet X_;
    Eigen::VectorXd alpha_;  // R^{-1} y
    Eigen::VectorXd beta_;   // R^{-1} 1
    double theta_ = 1.0;
    double jitter_ = 0.0;
    double mean_ = 0.0;
};

}  // namespace med
