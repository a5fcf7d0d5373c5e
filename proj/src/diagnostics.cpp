#include "med/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "med/kernels.hpp"
#include "med/math.hpp"

namespace med {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double euclid(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t l = 0; l < a.size(); ++l) {
        double d = a[l] - b[l];
        acc += d * d;
    }
    return std::sqrt(acc);
}

void check_sizes(const PointSet& points, std::span<const double> logf, std::size_t min_n,
                 const char* what) {
    if (logf.size() != points.size())
        throw std::invalid_argument(std::string(what) + ": logf size mismatch");
    if (points.size() < min_n)
        throw std::invalid_argument(std::string(what) + ": needs at least " +
                                    std::to_string(min_n) + " points");
}

// log of the (i, j) energy term; +inf for coincident points.
double energy_term_log(const PointSet& points, std::span<const double> logf, std::size_t i,
                       std::size_t j) {
    const std::size_t p = points.dim();
    double d = euclid(points[i], points[j]);
    if (d == 0.0) return kInf;
    return charge_log(logf[i], p) + charge_log(logf[j], p) - std::log(d);
}

}  // namespace

double total_energy_log(const PointSet& points, std::span<const double> logf) {
    check_sizes(points, logf, 2, "total_energy_log");
    const std::size_t n = points.size();
    std::vector<double> terms;
    terms.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double t = energy_term_log(points, logf, i, j);
            if (t == kInf) return kInf;
            terms.push_back(t);
        }
    double mx = *std::max_element(terms.begin(), terms.end());
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - mx);
    // Each unordered pair appears twice in the ordered sum.
    return std::numbers::ln2 + mx + std::log(acc);
}

double total_energy_log(const Design& design) { return total_energy_log(design.points, design.logf); }

EnergyValue max_energy_log(const PointSet& points, std::span<const double> logf) {
    check_sizes(points, logf, 2, "max_energy_log");
    EnergyValue best{-kInf, 0, 1};
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            double t = energy_term_log(points, logf, i, j);
            if (t > best.value) best = {t, i, j};
        }
    return best;
}

EnergyValue max_energy_log(const Design& design) { return max_energy_log(design.points, design.logf); }

double cl2_discrepancy_sq(const PointSet& points) {
    const std::size_t n = points.size();
    const std::size_t p = points.dim();
    if (n == 0) throw std::invalid_argument("cl2_discrepancy: empty point set");
    double single = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double prod = 1.0;
        for (double x : points[i]) {
            if (!(x >= 0.0 && x <= 1.0))
                throw std::invalid_argument("cl2_discrepancy: point outside [0,1]^p");
            double a = std::fabs(x - 0.5);
            prod *= 1.0 + 0.5 * a - 0.5 * a * a;
        }
        single += prod;
    }
    const double nn = static_cast<double>(n);
    double cross = kernels::parallel::cl2_cross_sum(points.data(), n, p);
    double v = std::pow(13.0 / 12.0, static_cast<double>(p)) - 2.0 / nn * single + cross / (nn * nn);
    return std::max(0.0, v);
}

double cl2_discrepancy(const PointSet& points) { return std::sqrt(cl2_discrepancy_sq(points)); }

double log_ball_volume(double d, std::size_t p) {
    const double h = 0.5 * static_cast<double>(p);
    return h * std::log(std::numbers::pi) - std::lgamma(h + 1.0) +
           static_cast<double>(p) * std::log(0.5 * d);
}

ProbabilityBalance probability_balance(const PointSet& points, std::span<const double> logf) {
    check_sizes(points, logf, 2, "probability_balance");
    const std::size_t n = points.size();
    const std::size_t p = points.dim();
    ProbabilityBalance out;
    out.log_p.assign(n, kInf);
    out.partner.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double d = euclid(points[i], points[j]);
            double lp = d > 0.0 ? 0.5 * (logf[i] + logf[j]) + log_ball_volume(d, p) : -kInf;
            if (lp < out.log_p[i]) {
                out.log_p[i] = lp;
                out.partner[i] = j;
            }
        }
    auto [lo, hi] = std::minmax_element(out.log_p.begin(), out.log_p.end());
    out.spread = *hi - *lo;
    return out;
}

ProbabilityBalance probability_balance(const Design& design) {
    return probability_balance(design.points, design.logf);
}

Marginals marginals_and_correlations(const PointSet& points, std::size_t bins) {
    const std::size_t n = points.size();
    const std::size_t p = points.dim();
    if (n < 2) throw std::invalid_argument("marginals_and_correlations: needs at least 2 points");
    if (bins == 0) bins = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));

    Marginals m;
    m.mean.assign(p, 0.0);
    m.sd.assign(p, 0.0);
    m.histogram.assign(p, std::vector<double>(bins, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t l = 0; l < p; ++l) m.mean[l] += points[i][l];
    for (auto& v : m.mean) v /= static_cast<double>(n);

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < n; ++i) {
        auto x = points[i];
        for (std::size_t a = 0; a < p; ++a) {
            double da = x[a] - m.mean[a];
            for (std::size_t b = 0; b <= a; ++b) cov(a, b) += da * (x[b] - m.mean[b]);
            auto bin = static_cast<std::size_t>(std::floor(x[a] * static_cast<double>(bins)));
            m.histogram[a][std::min(bin, bins - 1)] += 1.0 / static_cast<double>(n);
        }
    }
    cov /= static_cast<double>(n - 1);
    for (std::size_t l = 0; l < p; ++l) {
        // A constant column has sd exactly 0 even when its mean is not representable.
        bool constant = true;
        for (std::size_t i = 1; i < n && constant; ++i) constant = points[i][l] == points[0][l];
        m.sd[l] = constant ? 0.0 : std::sqrt(cov(l, l));
    }

    m.correlation = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    for (std::size_t a = 0; a < p; ++a) {
        if (m.sd[a] == 0.0) m.degenerate = true;
        for (std::size_t b = 0; b < a; ++b) {
            double r = 0.0;
            if (m.sd[a] > 0.0 && m.sd[b] > 0.0)
                r = std::clamp(cov(a, b) / (m.sd[a] * m.sd[b]), -1.0, 1.0);
            m.correlation(a, b) = m.correlation(b, a) = r;
        }
    }
    return m;
}

PointSet estimate_normal_transform(const PointSet& points) {
    auto m = marginals_and_correlations(points, 1);
    PointSet out(points.dim());
    out.reserve(points.size());
    Point y(points.dim());
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t l = 0; l < points.dim(); ++l)
            y[l] = m.sd[l] > 0.0 ? normal_cdf((points[i][l] - m.mean[l]) / m.sd[l]) : 0.5;
        out.push_back(y);
    }
    return out;
}

PointSet truth_transform(const DensityModel& model, const PointSet& points) {
    if (!model.has_truth_transform())
        throw std::invalid_argument("truth_transform: density '" + model.name() + "' has no known truth");
    PointSet out(points.dim());
    out.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) out.push_back(model.truth_transform(points[i]));
    return out;
}

DiagnosticsReport diagnose(const Design& design, const DistanceSpec& spec, std::size_t bins,
                           const DensityModel* truth) {
    DiagnosticsReport r;
    r.psi_log = psi_log(design, 1.0, DistanceSpec::identity(spec.s)).value;
    r.psi_tilde_log = psi_log(design, 1.0, spec).value;
    r.total_energy_log = total_energy_log(design);
    r.max_energy_log = max_energy_log(design).value;
    r.cl2 = cl2_discrepancy(design.points);
    r.cl2_estimate_transform = cl2_discrepancy(estimate_normal_transform(design.points));
    if (truth && truth->has_truth_transform()) {
        r.has_truth = true;
        r.cl2_truth_transform = cl2_discrepancy(truth_transform(*truth, design.points));
    }
    r.marginals = marginals_and_correlations(design.points, bins);
    r.balance = probability_balance(design);
    return r;
}

namespace {

nlohmann::json finite_or_string(double v) {
    if (std::isfinite(v)) return v;
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

}  // namespace

nlohmann::json to_json(const Marginals& m) {
    nlohmann::json j;
    j["mean"] = m.mean;
    j["sd"] = m.sd;
    j["histogram"] = m.histogram;
    std::vector<std::vector<double>> corr(static_cast<std::size_t>(m.correlation.rows()));
    for (Eigen::Index a = 0; a < m.correlation.rows(); ++a)
        for (Eigen::Index b = 0; b < m.correlation.cols(); ++b) corr[a].push_back(m.correlation(a, b));
    j["correlation"] = corr;
    j["degenerate"] = m.degenerate;
    return j;
}

nlohmann::json to_json(const DiagnosticsReport& r) {
    nlohmann::json j;
    j["psi_log"] = finite_or_string(r.psi_log);
    j["psi_tilde_log"] = finite_or_string(r.psi_tilde_log);
    j["total_energy_log"] = finite_or_string(r.total_energy_log);
    j["max_energy_log"] = finite_or_string(r.max_energy_log);
    j["cl2"] = r.cl2;
    j["cl2_estimate_transform"] = r.cl2_estimate_transform;
    if (r.has_truth) j["cl2_truth_transform"] = r.cl2_truth_transform;
    j["marginals"] = to_json(r.marginals);
    nlohmann::json b;
    std::vector<nlohmann::json> lp;
    for (double v : r.balance.log_p) lp.push_back(finite_or_string(v));
    b["log_p"] = lp;
    b["partner"] = r.balance.partner;
    b["spread"] = finite_or_string(r.balance.spread);
    b["note"] = "unnormalized density: compare values within this design only";
    j["probability_balance"] = b;
    return j;
}

}  // namespace med
