#include "med/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace med {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t l = 0; l < a.size(); ++l) {
        double d = a[l] - b[l];
        acc += d * d;
    }
    return acc;
}

}  // namespace

double default_theta(const PointSet& X) {
    std::vector<double> nn;
    for (std::size_t i = 0; i < X.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < X.size(); ++j)
            if (j != i) best = std::min(best, sq_dist(X[i], X[j]));
        if (best > 0.0 && std::isfinite(best)) nn.push_back(best);
    }
    if (nn.empty()) return 1.0;
    auto mid = nn.begin() + static_cast<std::ptrdiff_t>(nn.size() / 2);
    std::nth_element(nn.begin(), mid, nn.end());
    double d2 = *mid;
    if (nn.size() % 2 == 0) {
        double lower = *std::max_element(nn.begin(), mid);
        d2 = 0.5 * (d2 + lower);
    }
    return std::numbers::ln2 / d2;
}

SurrogateModel SurrogateModel::fit(const PointSet& X, std::span<const double> y, double theta,
                                   double jitter) {
    const std::size_t k = X.size();
    if (k < 1) throw std::invalid_argument("surrogate fit: need at least one training point");
    if (y.size() != k) throw std::invalid_argument("surrogate fit: y size mismatch");
    if (!(theta > 0.0)) throw std::invalid_argument("surrogate fit: theta must be positive");
    for (double v : y)
        if (!std::isfinite(v)) throw std::invalid_argument("surrogate fit: non-finite training value");

    Eigen::MatrixXd R(k, k);
    for (std::size_t i = 0; i < k; ++i) {
        R(i, i) = 1.0;
        for (std::size_t j = 0; j < i; ++j) R(i, j) = R(j, i) = std::exp(-theta * sq_dist(X[i], X[j]));
    }
    Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(k));

    for (double eps = jitter; eps <= 1e-4 * (1.0 + 1e-9); eps *= 10.0) {
        Eigen::MatrixXd Rj = R;
        Rj.diagonal().array() += eps;
        Eigen::LLT<Eigen::MatrixXd> llt(Rj);
        if (llt.info() != Eigen::Success) continue;
        Eigen::VectorXd alpha = llt.solve(yv);
        Eigen::VectorXd beta = llt.solve(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(k)));
        if (!alpha.allFinite() || !beta.allFinite()) continue;

        SurrogateModel m;
        m.X_ = X;
        m.alpha_ = std::move(alpha);
        m.beta_ = std::move(beta);
        m.theta_ = theta;
        m.jitter_ = eps;
        double denom = m.beta_.sum();
        m.mean_ = std::abs(denom) > 0.0 ? m.alpha_.sum() / denom : yv.mean();
        return m;
    }

    std::size_t bi = 0, bj = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) {
            double d = sq_dist(X[i], X[j]);
            if (d < best) {
                best = d;
                bi = i;
                bj = j;
            }
        }
    std::ostringstream os;
    os << "surrogate fit: correlation matrix not factorizable up to jitter 1e-4; closest pair ("
       << bi << ", " << bj << ") at squared distance " << best;
    throw NumericError(os.str());
}

double SurrogateModel::predict(std::span<const double> x) const {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < X_.size(); ++i) {
        double r = std::exp(-theta_ * sq_dist(x, X_[i]));
        num += r * alpha_[static_cast<Eigen::Index>(i)];
        den += r * beta_[static_cast<Eigen::Index>(i)];
    }
    if (std::abs(den) < 1e-12) return mean_;
    return num / den;
}

std::vector<double> SurrogateModel::predict(const PointSet& xs) const {
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = predict(xs[i]);
    return out;
}

}  // namespace med
