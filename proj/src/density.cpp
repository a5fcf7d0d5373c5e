#include "med/density.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "med/math.hpp"

namespace med {

double floor_logf(double logf) {
    if (std::isnan(logf)) throw NumericError("log density evaluated to NaN");
    return logf < kLogFloor ? kLogFloor : logf;
}

Box unit_box(std::size_t dim) { return Box(dim, Interval{0.0, 1.0}); }

std::uint64_t EvaluationLedger::reserve_orders(std::size_t count) {
    std::lock_guard lock(mutex_);
    auto first = next_order_;
    next_order_ += count;
    return first;
}

void EvaluationLedger::append(std::span<const double> x, double logf, double duration_ms,
                              std::uint64_t order) {
    std::lock_guard lock(mutex_);
    EvaluationRecord rec;
    rec.x.assign(x.begin(), x.end());
    rec.logf = logf;
    rec.stage = stage_;
    rec.seq = records_.size();
    rec.order = order;
    rec.duration_ms = duration_ms;
    records_.push_back(std::move(rec));
}

std::size_t EvaluationLedger::count() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

namespace {

struct Fnv1a {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    void bytes(const void* data, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    }
    void u64(std::uint64_t v) {
        unsigned char buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
        bytes(buf, 8);
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
};

}  // namespace

std::string EvaluationLedger::digest() const {
    std::lock_guard lock(mutex_);
    std::vector<const EvaluationRecord*> sorted;
    sorted.reserve(records_.size());
    for (const auto& r : records_) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(),
              [](const auto* a, const auto* b) { return a->order < b->order; });
    Fnv1a h;
    for (const auto* r : sorted) {
        h.u64(static_cast<std::uint64_t>(r->stage));
        h.u64(r->x.size());
        for (double v : r->x) h.f64(v);
        h.f64(r->logf);
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h.h));
    return buf;
}

Point DensityModel::to_original(std::span<const double> unit) const {
    if (unit.size() != dim()) throw std::invalid_argument("to_original: dimension mismatch");
    Point out(unit.size());
    for (std::size_t l = 0; l < unit.size(); ++l)
        out[l] = box_[l].lo + unit[l] * (box_[l].hi - box_[l].lo);
    return out;
}

void DensityModel::evaluate_batch(const PointSet& xs, const BatchCallback& done) {
    using clock = std::chrono::steady_clock;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        auto t0 = clock::now();
        double v = log_density_unit(xs[i]);
        double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
        done(i, v, ms);
    }
}

Point DensityModel::truth_transform(std::span<const double>) const {
    throw std::logic_error("density '" + name_ + "' has no known distribution transform");
}

double eval_logf(DensityModel& model, std::span<const double> x, EvaluationLedger& ledger) {
    if (x.size() != model.dim()) throw std::invalid_argument("eval_logf: dimension mismatch");
    auto order = ledger.reserve_orders(1);
    auto t0 = std::chrono::steady_clock::now();
    double raw = model.log_density_unit(x);
    double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    double v = floor_logf(raw);
    ledger.append(x, v, ms, order);
    return v;
}

std::vector<double> eval_logf_batch(DensityModel& model, const PointSet& xs,
                                    EvaluationLedger& ledger) {
    if (xs.dim() != model.dim()) throw std::invalid_argument("eval_logf_batch: dimension mismatch");
    std::vector<double> out(xs.size());
    auto base = ledger.reserve_orders(xs.size());
    model.evaluate_batch(xs, [&](std::size_t i, double raw, double ms) {
        double v = floor_logf(raw);
        out[i] = v;
        ledger.append(xs[i], v, ms, base + i);
    });
    return out;
}

// ---------------------------------------------------------------------------

BananaDensity::BananaDensity() : DensityModel("banana", Box{{-40.0, 40.0}, {-25.0, 10.0}}) {}

double BananaDensity::log_density_original(double x1, double x2) {
    double t = x2 + 0.03 * x1 * x1 - 3.0;
    return -0.5 * x1 * x1 / 100.0 - 0.5 * t * t;
}

double BananaDensity::log_density_unit(std::span<const double> unit) {
    auto x = to_original(unit);
    return log_density_original(x[0], x[1]);
}

Point BananaDensity::truth_transform(std::span<const double> unit) const {
    // x1 ~ N(0, 10^2); x2 | x1 ~ N(3 - 0.03 x1^2, 1)
    auto x = to_original(unit);
    return {normal_cdf(x[0] / 10.0), normal_cdf(x[1] + 0.03 * x[0] * x[0] - 3.0)};
}

Ar1NormalDensity::Ar1NormalDensity(std::size_t p, double rho, double sigma)
    : DensityModel("ar1", unit_box(p)), rho_(rho), sigma_(sigma) {
    if (p < 1) throw std::invalid_argument("ar1: p must be >= 1");
    if (!(sigma > 0.0)) throw std::invalid_argument("ar1: sigma must be positive");
    if (rho >= 1.0) throw NumericError("ar1: rho = 1 gives a singular covariance");
    if (rho < 0.0) throw std::invalid_argument("ar1: rho must lie in [0,1)");
    cov_.resize(p, p);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j)
            cov_(i, j) = sigma * sigma *
                         std::pow(rho, static_cast<double>(i > j ? i - j : j - i));
    Eigen::LLT<Eigen::MatrixXd> llt(cov_);
    if (llt.info() != Eigen::Success) throw NumericError("ar1: covariance not positive definite");
    chol_ = llt.matrixL();
}

double Ar1NormalDensity::log_density_unit(std::span<const double> unit) {
    Eigen::VectorXd d(unit.size());
    for (std::size_t l = 0; l < unit.size(); ++l) d[l] = unit[l] - 0.5;
    Eigen::VectorXd z = chol_.triangularView<Eigen::Lower>().solve(d);
    return -0.5 * z.squaredNorm();
}

Point Ar1NormalDensity::truth_transform(std::span<const double> unit) const {
    Eigen::VectorXd d(unit.size());
    for (std::size_t l = 0; l < unit.size(); ++l) d[l] = unit[l] - 0.5;
    Eigen::VectorXd z = chol_.triangularView<Eigen::Lower>().solve(d);
    Point out(unit.size());
    for (std::size_t l = 0; l < unit.size(); ++l) out[l] = normal_cdf(z[l]);
    return out;
}

UniformDensity::UniformDensity(std::size_t p) : DensityModel("uniform", unit_box(p)) {
    if (p < 1) throw std::invalid_argument("uniform: p must be >= 1");
}

std::unique_ptr<BananaDensity> make_banana() { return std::make_unique<BananaDensity>(); }

std::unique_ptr<Ar1NormalDensity> make_ar1_normal(std::size_t p, double rho, double sigma) {
    return std::make_unique<Ar1NormalDensity>(p, rho, sigma);
}

std::unique_ptr<UniformDensity> make_uniform(std::size_t p) {
    return std::make_unique<UniformDensity>(p);
}

double PiecewisePrior::log_density(double x) const {
    if (x < a) return lambda_a * (x - a);
    if (x > b) return -lambda_b * (x - b);
    return 0.0;
}

PiecewisePrior make_piecewise_prior(double a, double b, double lambda_a, double lambda_b) {
    if (!(a < b)) throw std::invalid_argument("piecewise prior: requires a < b");
    if (!(lambda_a > 0.0) || !(lambda_b > 0.0))
        throw std::invalid_argument("piecewise prior: rates must be positive");
    return {a, b, lambda_a, lambda_b};
}

double product_prior_log_density(std::span<const PiecewisePrior> factors,
                                 std::span<const double> x) {
    if (factors.size() != x.size())
        throw std::invalid_argument("product prior: dimension mismatch");
    double s = 0.0;
    for (std::size_t l = 0; l < x.size(); ++l) s += factors[l].log_density(x[l]);
    return s;
}

}  // namespace med
