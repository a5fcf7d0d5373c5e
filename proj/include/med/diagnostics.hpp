#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "med/density.hpp"
#include "med/design.hpp"
#include "med/geometry.hpp"

namespace med {

struct EnergyValue {
    double value = 0.0;  // log scale
    std::size_t i = 0;
    std::size_t j = 0;
};

/// log sum_{i != j} q_i q_j / |x_i - x_j| over ordered pairs, q = f^{-1/(2p)}, Euclidean
/// distance. Coincident pairs give +inf.
double total_energy_log(const PointSet& points, std::span<const double> logf);
double total_energy_log(const Design& design);

/// log max_{i != j} q_i q_j / |x_i - x_j| and the pair (i < j) attaining it.
EnergyValue max_energy_log(const PointSet& points, std::span<const double> logf);
EnergyValue max_energy_log(const Design& design);

/// Squared centered-L2 discrepancy (closed form). Throws on an empty set.
double cl2_discrepancy_sq(const PointSet& points);
/// Centered-L2 discrepancy: the square root of cl2_discrepancy_sq.
double cl2_discrepancy(const PointSet& points);

/// log V_S for a p-ball of diameter d.
double log_ball_volume(double d, std::size_t p);

struct ProbabilityBalance {
    std::vector<double> log_p;        // log P_{i i*}
    std::vector<std::size_t> partner; // i*
    double spread = 0.0;              // max - min of log_p
};

/// log P_ij = (logf_i + logf_j)/2 + log V_S(|x_i - x_j|); i* minimizes P_ij over j != i.
/// Values use unnormalized f, so only within-design comparisons are meaningful.
ProbabilityBalance probability_balance(const PointSet& points, std::span<const double> logf);
ProbabilityBalance probability_balance(const Design& design);

struct Marginals {
    std::vector<double> mean;
    std::vector<double> sd;                      // sample sd (n - 1)
    std::vector<std::vector<double>> histogram;  // per dimension, masses on equal bins of [0,1]
    Eigen::MatrixXd correlation;
    bool degenerate = false;  // some dimension has sd 0; its correlations are reported as 0
};

/// bins = 0 picks ceil(sqrt(n)).
Marginals marginals_and_correlations(const PointSet& points, std::size_t bins = 0);

/// Per-dimension normal-CDF transform using the sample mean and sd of the set itself.
PointSet estimate_normal_transform(const PointSet& points);
/// Maps every point through the model's truth transform.
PointSet truth_transform(const DensityModel& model, const PointSet& points);

struct DiagnosticsReport {
    double psi_log = 0.0;
    double psi_tilde_log = 0.0;
    double total_energy_log = 0.0;
    double max_energy_log = 0.0;
    double cl2 = 0.0;
    double cl2_estimate_transform = 0.0;
    bool has_truth = false;
    double cl2_truth_transform = 0.0;
    Marginals marginals;
    ProbabilityBalance balance;
};

/// Diagnostics of a design at gamma = 1 and the given distance spec (psi_tilde uses `spec`,
/// psi the identity metric with the same s). `truth` may be null.
DiagnosticsReport diagnose(const Design& design, const DistanceSpec& spec, std::size_t bins,
                           const DensityModel* truth);

nlohmann::json to_json(const DiagnosticsReport& report);
nlohmann::json to_json(const Marginals& m);

}  // namespace med
