#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "med/density.hpp"
#include "med/design.hpp"
#include "med/surrogate.hpp"

namespace med {

struct ChainSpec {
    Point start;
    std::size_t length = 1000;     // Metropolis steps
    Eigen::MatrixXd scale;         // lower-triangular proposal factor; empty: 0.1 I
    double target_accept = 0.234;
    bool adapt = true;
    std::uint64_t seed = 1;
    std::size_t max_evaluations = 0;  // stop once this many density calls were made; 0: no cap
};

struct Chain {
    PointSet samples;           // state after each step
    std::vector<double> logf;   // log target at each sample
    std::size_t accepted = 0;
    std::size_t steps = 0;
    std::size_t evaluations = 0;
    Eigen::MatrixXd scale;      // final proposal factor

    double acceptance_rate() const {
        return steps ? static_cast<double>(accepted) / static_cast<double>(steps) : 0.0;
    }
};

using LogTarget = std::function<double(std::span<const double>)>;

/// Random-walk Metropolis on [0,1]^p with Gaussian proposals x + S u. Proposals leaving the
/// cube are rejected without calling the target. With `adapt`, S is updated after step i by
///   S S' <- S (I + eta_i (alpha_i - target) u u' / |u|^2) S',  eta_i = i^{-2/3},
/// where alpha_i is the acceptance probability of that step.
Chain metropolis(const LogTarget& target, const ChainSpec& spec);

/// Adaptive Metropolis on an exact density; every call goes through the ledger.
Chain adaptive_metropolis(DensityModel& model, EvaluationLedger& ledger, const ChainSpec& spec);

/// p_i = exp(logf_i - max) / sum; invariant to shifting all logf.
std::vector<double> softmax_weights(std::span<const double> logf);
/// ceil(N p_i) for each weight.
std::vector<std::size_t> chain_lengths(std::span<const double> weights, std::size_t N);

struct FollowupResult {
    PointSet samples;            // pooled in chain order
    std::vector<int> chain;      // chain index of each sample
    std::vector<std::size_t> lengths;
    std::vector<double> acceptance;
    Eigen::MatrixXd proposal_factor;
};

/// One Metropolis chain per design point on the surrogate (no exact evaluations), chain i
/// starting at design point i with length ceil(N p_i). The proposal factor is the Cholesky
/// factor of (2.38^2 / p) times the design's sample covariance (0.1 I if that is singular).
FollowupResult followup_mcmc(const Design& med, const SurrogateModel& surrogate, std::size_t N,
                             std::uint64_t seed);

}  // namespace med
