#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "med/types.hpp"

namespace med {

/// Log-density values below this (including -inf) are clamped to it.
inline constexpr double kLogFloor = -1e10;

double floor_logf(double logf);

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
};
using Box = std::vector<Interval>;

Box unit_box(std::size_t dim);

struct EvaluationRecord {
    Point x;
    double logf = 0.0;
    int stage = 0;
    std::uint64_t seq = 0;    // completion order
    std::uint64_t order = 0;  // request order
    double duration_ms = 0.0;
};

/// Append-only audit trail of every density evaluation. Appends are serialized.
class EvaluationLedger {
public:
    EvaluationLedger() = default;
    EvaluationLedger(const EvaluationLedger&) = delete;
    EvaluationLedger& operator=(const EvaluationLedger&) = delete;

    void set_stage(int k) { stage_ = k; }
    int stage() const { return stage_; }

    /// Hands out `count` consecutive request indices.
    std::uint64_t reserve_orders(std::size_t count);
    void append(std::span<const double> x, double logf, double duration_ms, std::uint64_t order);

    std::size_t count() const;
    const std::vector<EvaluationRecord>& records() const { return records_; }

    /// Order-sensitive FNV-1a hash of (stage, x, logf) over records in request order.
    std::string digest() const;

private:
    mutable std::mutex mutex_;
    std::vector<EvaluationRecord> records_;
    std::uint64_t next_order_ = 0;
    int stage_ = 0;
};

/// A log-unnormalized density seen through the unit hypercube.
class DensityModel {
public:
    using BatchCallback = std::function<void(std::size_t index, double logf, double duration_ms)>;

    virtual ~DensityModel() = default;

    std::size_t dim() const { return box_.size(); }
    const Box& box() const { return box_; }
    const std::string& name() const { return name_; }
    Point to_original(std::span<const double> unit) const;

    /// Raw log f at a unit-scale point; no flooring, no ledger.
    virtual double log_density_unit(std::span<const double> unit) = 0;

    /// Evaluates every row, invoking `done` once per row (possibly from worker threads).
    virtual void evaluate_batch(const PointSet& xs, const BatchCallback& done);

    virtual bool builtin() const { return true; }
    virtual bool has_truth_transform() const { return false; }
    /// Maps a unit-scale point to [0,1]^p so that target-distributed points become uniform.
    virtual Point truth_transform(std::span<const double> unit) const;

protected:
    DensityModel(std::string name, Box box) : name_(std::move(name)), box_(std::move(box)) {}

private:
    std::string name_;
    Box box_;
};

double eval_logf(DensityModel& model, std::span<const double> x, EvaluationLedger& ledger);
std::vector<double> eval_logf_batch(DensityModel& model, const PointSet& xs,
                                    EvaluationLedger& ledger);

// Builtin densities.

class BananaDensity final : public DensityModel {
public:
    BananaDensity();
    double log_density_unit(std::span<const double> unit) override;
    static double log_density_original(double x1, double x2);
    bool has_truth_transform() const override { return true; }
    Point truth_transform(std::span<const double> unit) const override;
};

class Ar1NormalDensity final : public DensityModel {
public:
    Ar1NormalDensity(std::size_t p, double rho, double sigma);
    double log_density_unit(std::span<const double> unit) override;
    bool has_truth_transform() const override { return true; }
    Point truth_transform(std::span<const double> unit) const override;

    double rho() const { return rho_; }
    double sigma() const { return sigma_; }
    const Eigen::MatrixXd& covariance() const { return cov_; }
    const Eigen::MatrixXd& cholesky() const { return chol_; }

private:
    double rho_;
    double sigma_;
    Eigen::MatrixXd cov_;
    Eigen::MatrixXd chol_;
};

class UniformDensity final : public DensityModel {
public:
    explicit UniformDensity(std::size_t p);
    double log_density_unit(std::span<const double>) override { return 0.0; }
    bool has_truth_transform() const override { return true; }
    Point truth_transform(std::span<const double> unit) const override {
        return {unit.begin(), unit.end()};
    }
};

std::unique_ptr<BananaDensity> make_banana();
std::unique_ptr<Ar1NormalDensity> make_ar1_normal(std::size_t p, double rho, double sigma);
std::unique_ptr<UniformDensity> make_uniform(std::size_t p);

/// Uniform on [a,b] with exponential tails outside; log-scale, unnormalized.
struct PiecewisePrior {
    double a;
    double b;
    double lambda_a;
    double lambda_b;

    double log_density(double x) const;
};

PiecewisePrior make_piecewise_prior(double a, double b, double lambda_a, double lambda_b);

/// Sum of independent piecewise factors, one per coordinate.
double product_prior_log_density(std::span<const PiecewisePrior> factors,
                                 std::span<const double> x);

}  // namespace med
