#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "med/density.hpp"
#include "med/design.hpp"
#include "med/geometry.hpp"
#include "med/qmc.hpp"

namespace med {

/// Largest prime strictly below 100 + 5p.
std::size_t default_n(std::size_t p);
/// ceil(4 sqrt(p)).
std::size_t default_K(std::size_t p);

/// gamma_k = (k-1)/(K-1), k = 1..K (returned 0-based).
std::vector<double> anneal_schedule(std::size_t K);

/// s = 2 (1 - exp(gamma (logf_min - logf_max))), snapped to 0 below the s threshold.
double adaptive_s(double fk_min_log, double fk_max_log, double gamma);
/// adaptive_s over a set of log values; quantile q in (0, 0.5) replaces min/max by the
/// q and 1-q quantiles, q = 0 uses min/max.
double adaptive_s(std::span<const double> logf, double gamma, double quantile = 0.0);

/// Whitening covariance for the next stage: (gamma_k / gamma_{k+1}) var(D_k), shrunk toward
/// its diagonal until its condition number is at most 1e6. Identity when whitening is off;
/// I/12 at gamma_k = 0 or for a degenerate design.
Eigen::MatrixXd update_sigma(const Design& Dk, double gamma_k, double gamma_k1, bool whitening);

double condition_number(const Eigen::MatrixXd& sym);

enum class SMode { adaptive, fixed };

struct RunConfig {
    std::size_t n = 0;  // 0: default_n(p)
    std::size_t K = 0;  // 0: default_K(p)
    std::uint64_t seed = 1;
    std::size_t m = 0;  // local-fill candidates per region; 0: 50 p
    std::size_t n_combos = 5;
    double delta = 1e-6;
    double theta = 0.0;  // 0: log 2 / d_med^2 per region
    double jitter = 1e-8;
    SMode s_mode = SMode::adaptive;
    double s_fixed = 2.0;
    double s_quantile = 0.0;
    bool whitening = true;
    bool lattice_shift = true;
    std::size_t surrogate_cap = 200;
    int threads = 0;  // 0: OpenMP default
};

/// Fills defaults for dimension p and validates.
RunConfig resolve_config(const RunConfig& cfg, std::size_t p);

struct StageReport {
    int k = 0;
    double gamma = 0.0;
    double s = 0.0;
    double sigma_condition = 1.0;
    double psi_log = 0.0;
    double psi_tilde_log = 0.0;
    std::size_t candidates_scored = 0;
    std::size_t candidate_set_size = 0;
    std::size_t evaluations = 0;  // ledger count after the stage
    double elapsed_ms = 0.0;
};

struct RunReport {
    std::size_t p = 0;
    std::size_t n = 0;
    std::size_t K = 0;
    std::size_t budget = 0;
    std::size_t evaluations = 0;
    std::vector<std::uint64_t> lattice_z;
    std::vector<StageReport> stages;
    /// Relative RMS change of a 20-point local surrogate when theta is doubled.
    double theta_sensitivity = 0.0;
    double elapsed_ms = 0.0;
};

/// Candidate-set state carried between stages: every evaluated point so far.
struct StageState {
    PointSet C;
    std::vector<double> logf;
    std::vector<int> stage;
    Eigen::MatrixXd sigma;
    double s = 2.0;
};

/// Scores each candidate by min over conditioning rows of
/// gamma (predicted_c + cond_logf_t) + 2p log d_s(c, t).
std::vector<double> score_candidates(const PointSet& candidates, std::span<const double> predicted,
                                     const PointSet& conditioning, std::span<const double> cond_logf,
                                     double gamma, double s);

/// First index of the maximum (ties: lowest index).
std::size_t argmax_first(std::span<const double> values);

/// Pass 1: one surrogate-scored, exactly evaluated new point per design point of D_k,
/// conditioned on D_k and the new points already chosen. Performs exactly |D_k| evaluations.
Design propose_new_points(DensityModel& model, EvaluationLedger& ledger, const Design& Dk,
                          const StageState& state, double gamma_next, const RunConfig& cfg,
                          const LocalFillStream& stream, int stage,
                          std::size_t* candidates_scored = nullptr);

/// Pass 2: greedy selection of n points from an exactly evaluated candidate set. Starts at the
/// highest logf; performs no density evaluations.
Design greedy_select(const PointSet& C, std::span<const double> logf, std::span<const int> stage,
                     std::size_t n, double gamma, const DistanceSpec& spec);

struct RunResult {
    Design design;
    RunReport report;
};

using StageCallback = std::function<void(const StageReport&)>;

RunResult run(DensityModel& model, const RunConfig& cfg, EvaluationLedger& ledger,
              const StageCallback& on_stage = {});

}  // namespace med
