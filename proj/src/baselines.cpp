#include "med/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "med/rng.hpp"

namespace med {

namespace {

Eigen::MatrixXd default_scale(std::size_t p) {
    return 0.1 * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
}

bool in_unit_cube(const Eigen::VectorXd& x) {
    return (x.array() >= 0.0).all() && (x.array() <= 1.0).all();
}

}  // namespace

Chain metropolis(const LogTarget& target, const ChainSpec& spec) {
    const std::size_t p = spec.start.size();
    if (p == 0) throw std::invalid_argument("metropolis: empty start point");
    if (spec.length < 1) throw std::invalid_argument("metropolis: length must be >= 1");
    for (double v : spec.start)
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("metropolis: start outside [0,1]^p");
    Eigen::MatrixXd S = spec.scale.size() ? spec.scale : default_scale(p);
    if (S.rows() != static_cast<Eigen::Index>(p) || S.cols() != static_cast<Eigen::Index>(p))
        throw std::invalid_argument("metropolis: scale dimension mismatch");
    if ((S.diagonal().array() == 0.0).any())
        throw std::invalid_argument("metropolis: scale factor is singular");

    Rng rng(spec.seed);
    Chain chain;
    chain.samples = PointSet(p);
    chain.samples.reserve(spec.length);

    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(spec.start.data(), static_cast<Eigen::Index>(p));
    double fx = target(spec.start);
    chain.evaluations = 1;
    Eigen::VectorXd u(p), y(p);
    const auto budget_left = [&] {
        return spec.max_evaluations == 0 || chain.evaluations < spec.max_evaluations;
    };

    for (std::size_t i = 1; i <= spec.length; ++i) {
        if (spec.max_evaluations && !budget_left()) break;
        for (std::size_t l = 0; l < p; ++l) u[l] = rng.normal();
        y = x + S * u;
        double alpha = 0.0;
        if (in_unit_cube(y)) {
            double fy = target(std::span<const double>(y.data(), p));
            ++chain.evaluations;
            alpha = fy >= fx ? 1.0 : std::exp(fy - fx);
            if (rng.uniform() < alpha) {
                x = y;
                fx = fy;
                ++chain.accepted;
            }
        }
        ++chain.steps;
        chain.samples.push_back(std::span<const double>(x.data(), p));
        chain.logf.push_back(fx);

        if (spec.adapt) {
            const double eta = std::min(1.0, std::pow(static_cast<double>(i), -2.0 / 3.0));
            const double un = u.squaredNorm();
            if (un > 0.0) {
                Eigen::VectorXd v = S * u;
                Eigen::MatrixXd M = S * S.transpose() +
                                    (eta * (alpha - spec.target_accept) / un) * (v * v.transpose());
                Eigen::LLT<Eigen::MatrixXd> llt(M);
                if (llt.info() == Eigen::Success) S = llt.matrixL();
            }
        }
    }
    chain.scale = S;
    return chain;
}

Chain adaptive_metropolis(DensityModel& model, EvaluationLedger& ledger, const ChainSpec& spec) {
    if (spec.start.size() != model.dim())
        throw std::invalid_argument("adaptive_metropolis: start dimension mismatch");
    return metropolis([&](std::span<const double> x) { return eval_logf(model, x, ledger); }, spec);
}

std::vector<double> softmax_weights(std::span<const double> logf) {
    if (logf.empty()) throw std::invalid_argument("softmax_weights: empty input");
    const double mx = *std::max_element(logf.begin(), logf.end());
    std::vector<double> w(logf.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) sum += w[i] = std::exp(logf[i] - mx);
    for (auto& v : w) v /= sum;
    return w;
}

std::vector<std::size_t> chain_lengths(std::span<const double> weights, std::size_t N) {
    std::vector<std::size_t> out;
    out.reserve(weights.size());
    for (double w : weights)
        out.push_back(static_cast<std::size_t>(std::ceil(static_cast<double>(N) * w)));
    return out;
}

FollowupResult followup_mcmc(const Design& med, const SurrogateModel& surrogate, std::size_t N,
                             std::uint64_t seed) {
    const std::size_t n = med.size();
    const std::size_t p = med.dim();
    if (n == 0) throw std::invalid_argument("followup_mcmc: empty design");
    if (N < 1) throw std::invalid_argument("followup_mcmc: N must be >= 1");

    FollowupResult res;
    res.lengths = chain_lengths(softmax_weights(med.logf), N);

    const auto pp = static_cast<Eigen::Index>(p);
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> X(
        med.points.data(), static_cast<Eigen::Index>(n), pp);
    Eigen::MatrixXd factor = default_scale(p);
    if (n > 1) {
        Eigen::MatrixXd c = X.rowwise() - X.colwise().mean();
        Eigen::MatrixXd cov = (c.transpose() * c) / static_cast<double>(n - 1);
        cov *= 2.38 * 2.38 / static_cast<double>(p);
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() == Eigen::Success && (Eigen::MatrixXd(llt.matrixL()).diagonal().array() > 0).all())
            factor = llt.matrixL();
    }
    res.proposal_factor = factor;

    std::vector<Chain> chains(n);
    const auto nn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < nn; ++i) {
        ChainSpec spec;
        spec.start = med.points.point(static_cast<std::size_t>(i));
        spec.length = res.lengths[i];
        spec.scale = factor;
        spec.adapt = false;
        spec.seed = derive_seed(seed, 1, static_cast<std::uint64_t>(i));
        chains[i] = metropolis([&](std::span<const double> x) { return surrogate.predict(x); }, spec);
    }

    res.samples = PointSet(p);
    std::size_t total = 0;
    for (auto l : res.lengths) total += l;
    res.samples.reserve(total);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < chains[i].samples.size(); ++t) {
            res.samples.push_back(chains[i].samples[t]);
            res.chain.push_back(static_cast<int>(i));
        }
        res.acceptance.push_back(chains[i].acceptance_rate());
    }
    return res;
}

}  // namespace med
