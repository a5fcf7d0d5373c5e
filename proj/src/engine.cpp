#include "med/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <optional>

#include <omp.h>

#include "med/kernels.hpp"
#include "med/rng.hpp"
#include "med/surrogate.hpp"

namespace med {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMaxCondition = 1e6;

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

/// Indices of the `count` rows of `pts` closest to q (ties: lower index first).
std::vector<std::size_t> nearest_rows(const PointSet& pts, std::span<const double> q,
                                      std::size_t count) {
    std::vector<double> d2(pts.size());
    kernels::serial::squared_distances(pts.data(), pts.size(), pts.dim(), q.data(), d2.data());
    std::vector<std::size_t> idx(pts.size());
    std::iota(idx.begin(), idx.end(), 0);
    count = std::min(count, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          return d2[a] != d2[b] ? d2[a] < d2[b] : a < b;
                      });
    idx.resize(count);
    return idx;
}

PointSet gather(const PointSet& src, std::span<const std::size_t> idx) {
    PointSet out(src.dim());
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(src[i]);
    return out;
}

}  // namespace

std::size_t default_n(std::size_t p) {
    if (p < 1) throw std::invalid_argument("default_n: p must be >= 1");
    return static_cast<std::size_t>(largest_prime_below(100 + 5 * p));
}

std::size_t default_K(std::size_t p) {
    if (p < 1) throw std::invalid_argument("default_K: p must be >= 1");
    // Exact integer ceil(4 sqrt(p)) = ceil(sqrt(16 p)).
    std::size_t r = static_cast<std::size_t>(std::sqrt(16.0 * static_cast<double>(p)));
    while (r * r > 16 * p) --r;
    while (r * r < 16 * p) ++r;
    return r;
}

std::vector<double> anneal_schedule(std::size_t K) {
    if (K < 2) throw std::invalid_argument("anneal_schedule: K must be >= 2");
    std::vector<double> g(K);
    for (std::size_t k = 0; k < K; ++k) g[k] = static_cast<double>(k) / static_cast<double>(K - 1);
    g.back() = 1.0;
    return g;
}

double adaptive_s(double fk_min_log, double fk_max_log, double gamma) {
    if (fk_min_log > fk_max_log) throw std::invalid_argument("adaptive_s: min exceeds max");
    double s = -2.0 * std::expm1(gamma * (fk_min_log - fk_max_log));
    return s < kSZeroThreshold ? 0.0 : s;
}

double adaptive_s(std::span<const double> logf, double gamma, double quantile) {
    if (logf.empty()) throw std::invalid_argument("adaptive_s: empty input");
    std::vector<double> v(logf.begin(), logf.end());
    std::sort(v.begin(), v.end());
    if (!(quantile > 0.0)) return adaptive_s(v.front(), v.back(), gamma);
    if (quantile >= 0.5) throw std::invalid_argument("adaptive_s: quantile must be below 0.5");
    auto q = [&](double prob) {
        double h = prob * static_cast<double>(v.size() - 1);
        auto lo = static_cast<std::size_t>(std::floor(h));
        auto hi = std::min(lo + 1, v.size() - 1);
        return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
    };
    return adaptive_s(q(quantile), q(1.0 - quantile), gamma);
}

double condition_number(const Eigen::MatrixXd& sym) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    double lo = es.eigenvalues().minCoeff();
    double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0)) return kInf;
    return hi / lo;
}

Eigen::MatrixXd update_sigma(const Design& Dk, double gamma_k, double gamma_k1, bool whitening) {
    const auto p = static_cast<Eigen::Index>(Dk.dim());
    const Eigen::MatrixXd uniform = Eigen::MatrixXd::Identity(p, p) / 12.0;
    if (!whitening) return Eigen::MatrixXd::Identity(p, p);
    if (!(gamma_k1 > 0.0)) throw std::invalid_argument("update_sigma: gamma_{k+1} must be positive");
    if (!(gamma_k > 0.0) || Dk.size() < 2) return uniform;

    const auto n = static_cast<Eigen::Index>(Dk.size());
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> X(
        Dk.points.data(), n, p);
    Eigen::RowVectorXd mean = X.colwise().mean();
    Eigen::MatrixXd centered = X.rowwise() - mean;
    Eigen::MatrixXd S = (centered.transpose() * centered) / static_cast<double>(n - 1);
    S *= gamma_k / gamma_k1;

    Eigen::VectorXd diag = S.diagonal();
    const double dmax = diag.maxCoeff();
    if (!(dmax > 0.0) || !S.allFinite()) return uniform;
    diag = diag.cwiseMax(dmax / kMaxCondition);

    if (condition_number(S) <= kMaxCondition) return S;
    Eigen::MatrixXd D = diag.asDiagonal();
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 50; ++it) {
        double mid = 0.5 * (lo + hi);
        if (condition_number((1.0 - mid) * S + mid * D) <= kMaxCondition)
            hi = mid;
        else
            lo = mid;
    }
    return (1.0 - hi) * S + hi * D;
}

RunConfig resolve_config(const RunConfig& cfg, std::size_t p) {
    if (p < 1) throw std::invalid_argument("config: dimension must be >= 1");
    RunConfig r = cfg;
    if (r.n == 0) r.n = default_n(p);
    if (r.K == 0) r.K = default_K(p);
    if (r.m == 0) r.m = 50 * p;
    if (r.n < 2) throw std::invalid_argument("config: n must be >= 2");
    if (r.K < 2) throw std::invalid_argument("config: K must be >= 2");
    if (!(r.delta > 0.0)) throw std::invalid_argument("config: delta must be positive");
    if (r.theta < 0.0) throw std::invalid_argument("config: theta must be >= 0");
    if (!(r.jitter > 0.0)) throw std::invalid_argument("config: jitter must be positive");
    if (r.s_mode == SMode::fixed) r.s_fixed = normalize_s(r.s_fixed);
    if (r.s_quantile < 0.0 || r.s_quantile >= 0.5)
        throw std::invalid_argument("config: s quantile must lie in [0, 0.5)");
    if (r.surrogate_cap < 1) throw std::invalid_argument("config: surrogate cap must be >= 1");
    return r;
}

std::vector<double> score_candidates(const PointSet& candidates, std::span<const double> predicted,
                                     const PointSet& conditioning, std::span<const double> cond_logf,
                                     double gamma, double s) {
    if (predicted.size() != candidates.size() || cond_logf.size() != conditioning.size())
        throw std::invalid_argument("score_candidates: size mismatch");
    std::vector<double> score(candidates.size(), kInf);
    kernels::parallel::update_min_terms(candidates.data(), predicted.data(), candidates.size(),
                                        conditioning.data(), cond_logf.data(), conditioning.size(),
                                        candidates.dim(), gamma, normalize_s(s), score.data());
    return score;
}

std::size_t argmax_first(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("argmax_first: empty input");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

namespace {

struct RegionWork {
    CandidatePool pool;
    std::vector<double> predicted;
    std::vector<double> score;  // partial min, over D_k so far
};

RegionWork build_region(const Design& Dk, std::size_t j, const StageState& state,
                        const PointSet& C_white, const PointSet& D_white,
                        const DistanceSpec& metric, const Eigen::MatrixXd& frame,
                        double gamma, double s,
                        const RunConfig& cfg, const LocalFillStream& stream,
                        const ProximityIndex& existing, int stage) {
    const std::size_t n = Dk.size();
    const std::size_t p = Dk.dim();
    auto center = Dk.points[j];
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(stage), j));

    auto near_idx = nearest_rows(C_white, D_white[j], n);
    const std::size_t n_train = std::min(cfg.surrogate_cap, near_idx.size());
    std::span<const std::size_t> train_idx(near_idx.data(), n_train);
    // The surrogate works in whitened coordinates, so its kernel follows the metric.
    PointSet X = gather(C_white, train_idx);
    std::vector<double> y(n_train);
    for (std::size_t t = 0; t < n_train; ++t) y[t] = state.logf[train_idx[t]];
    double theta = cfg.theta > 0.0 ? cfg.theta : default_theta(X);
    SurrogateModel sur = SurrogateModel::fit(X, y, theta, cfg.jitter);

    // The two nearest other design points serve as combination partners.
    auto adj_idx = nearest_rows(D_white, D_white[j], std::min<std::size_t>(3, n));
    PointSet adjacent(p);
    for (auto a : adj_idx)
        if (a != j && adjacent.size() < 2) adjacent.push_back(Dk.points[a]);

    // The fill region is the bounding box of the neighbourhood in whitened coordinates.
    PointSet region_white = gather(C_white, near_idx);
    LocalCandidateOptions opts{cfg.m, cfg.n_combos, cfg.delta, frame};
    RegionWork w;
    w.pool = local_candidates(stream, D_white[j], center, region_white, adjacent, existing, opts, rng);
    if (w.pool.size() == 0) {
        // Inflate the region about its center and retry once.
        PointSet wide(p);
        auto cw = D_white[j];
        Point x(p);
        for (std::size_t t = 0; t < region_white.size(); ++t) {
            for (std::size_t l = 0; l < p; ++l) x[l] = cw[l] + 4.0 * (region_white[t][l] - cw[l]);
            wide.push_back(x);
        }
        w.pool = local_candidates(stream, cw, center, wide, adjacent, existing, opts, rng);
        if (w.pool.size() == 0)
            throw NumericError("propose_new_points: empty candidate pool for design point " +
                               std::to_string(j));
    }
    w.predicted = sur.predict(metric.whiten(w.pool.points));
    w.score.assign(w.pool.size(), kInf);
    kernels::serial::update_min_terms(w.pool.points.data(), w.predicted.data(), w.pool.size(),
                                      Dk.points.data(), Dk.logf.data(), n, p, gamma, s,
                                      w.score.data());
    return w;
}

}  // namespace

Design propose_new_points(DensityModel& model, EvaluationLedger& ledger, const Design& Dk,
                          const StageState& state, double gamma_next, const RunConfig& cfg,
                          const LocalFillStream& stream, int stage,
                          std::size_t* candidates_scored) {
    const std::size_t n = Dk.size();
    const std::size_t p = Dk.dim();
    if (n == 0) throw std::invalid_argument("propose_new_points: empty design");
    const double s = normalize_s(state.s);

    // Neighbourhoods are found in the whitened metric of the current stage.
    DistanceSpec metric = state.sigma.size() ? DistanceSpec::whitened(state.sigma, 2.0)
                                             : DistanceSpec::identity(2.0);
    const PointSet C_white = metric.whiten(state.C);
    const PointSet D_white = metric.whiten(Dk.points);
    const ProximityIndex existing(state.C);
    Eigen::MatrixXd frame;
    if (!metric.is_identity()) frame = Eigen::LLT<Eigen::MatrixXd>(metric.sigma).matrixL();

    std::vector<RegionWork> work(n);
    std::vector<std::exception_ptr> errors(n);
    const auto nn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t j = 0; j < nn; ++j) {
        try {
            work[j] = build_region(Dk, static_cast<std::size_t>(j), state, C_white, D_white, metric,
                                   frame, gamma_next, s, cfg, stream, existing, stage);
        } catch (...) {
            errors[j] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    Design out;
    out.points = PointSet(p);
    out.points.reserve(n);
    out.k = stage;
    out.gamma = gamma_next;
    std::size_t scored = 0;
    for (std::size_t j = 0; j < n; ++j) {
        auto& w = work[j];
        const std::size_t nc = w.pool.size();
        scored += nc;
        if (j > 0) {
            kernels::parallel::update_min_terms(w.pool.points.data(), w.predicted.data(), nc,
                                                out.points.data(), out.logf.data(), j, p,
                                                gamma_next, s, w.score.data());
            for (std::size_t c = 0; c < nc; ++c) {
                auto x = w.pool.points[c];
                for (std::size_t i = 0; i < j; ++i) {
                    auto y = out.points[i];
                    bool close = true;
                    for (std::size_t l = 0; l < p && close; ++l)
                        close = std::fabs(x[l] - y[l]) <= cfg.delta;
                    if (close) {
                        w.score[c] = -kInf;
                        break;
                    }
                }
            }
        }
        std::size_t best = argmax_first(w.score);
        auto x = w.pool.points[best];
        double v = eval_logf(model, x, ledger);
        out.points.push_back(x);
        out.logf.push_back(v);
        out.stage.push_back(stage);
        w = RegionWork{};  // release memory early
    }
    if (candidates_scored) *candidates_scored = scored;
    return out;
}

Design greedy_select(const PointSet& C, std::span<const double> logf, std::span<const int> stage,
                     std::size_t n, double gamma, const DistanceSpec& spec) {
    const std::size_t N = C.size();
    const std::size_t p = C.dim();
    if (logf.size() != N || stage.size() != N)
        throw std::invalid_argument("greedy_select: size mismatch");
    if (N < n) throw std::invalid_argument("greedy_select: candidate set smaller than n");
    if (n == 0) throw std::invalid_argument("greedy_select: n must be >= 1");

    const PointSet W = spec.whiten(C);
    std::vector<double> mins(N, kInf);
    std::vector<char> taken(N, 0);

    Design out;
    out.points = PointSet(p);
    out.points.reserve(n);
    out.gamma = gamma;

    std::size_t pick = argmax_first(logf);
    for (std::size_t j = 0;; ++j) {
        taken[pick] = 1;
        out.points.push_back(C[pick]);
        out.logf.push_back(logf[pick]);
        out.stage.push_back(stage[pick]);
        if (j + 1 == n) break;

        kernels::parallel::update_min_terms(W.data(), logf.data(), N, W[pick].data(), &logf[pick],
                                            1, p, gamma, spec.s, mins.data());
        double best = -kInf;
        std::size_t best_i = N;
        for (std::size_t i = 0; i < N; ++i) {
            if (taken[i]) continue;
            if (best_i == N || mins[i] > best) {
                best = mins[i];
                best_i = i;
            }
        }
        pick = best_i;
    }
    return out;
}

namespace {

double theta_sensitivity(const StageState& state, std::span<const double> center, std::uint64_t seed) {
    const std::size_t p = state.C.dim();
    auto idx = nearest_rows(state.C, center, 20);
    PointSet X = gather(state.C, idx);
    std::vector<double> y;
    for (auto i : idx) y.push_back(state.logf[i]);
    double ymin = *std::min_element(y.begin(), y.end());
    double ymax = *std::max_element(y.begin(), y.end());
    if (X.size() < 2 || !(ymax > ymin)) return 0.0;
    double theta = default_theta(X);
    auto a = SurrogateModel::fit(X, y, theta);
    auto b = SurrogateModel::fit(X, y, 2.0 * theta);

    Point lo(center.begin(), center.end()), hi(center.begin(), center.end());
    for (std::size_t t = 0; t < X.size(); ++t)
        for (std::size_t l = 0; l < p; ++l) {
            lo[l] = std::min(lo[l], X[t][l]);
            hi[l] = std::max(hi[l], X[t][l]);
        }
    Rng rng(derive_seed(seed, 0xfeed));
    double acc = 0.0;
    const int probes = 200;
    Point x(p);
    for (int i = 0; i < probes; ++i) {
        for (std::size_t l = 0; l < p; ++l) x[l] = rng.uniform(lo[l], hi[l]);
        double d = a.predict(x) - b.predict(x);
        acc += d * d;
    }
    return std::sqrt(acc / probes) / (ymax - ymin);
}

}  // namespace

RunResult run(DensityModel& model, const RunConfig& config, EvaluationLedger& ledger,
              const StageCallback& on_stage) {
    const auto t_run = std::chrono::steady_clock::now();
    const std::size_t p = model.dim();
    const RunConfig cfg = resolve_config(config, p);
    if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
    const auto gammas = anneal_schedule(cfg.K);

    RunResult res;
    auto& rep = res.report;
    rep.p = p;
    rep.n = cfg.n;
    rep.K = cfg.K;
    rep.budget = cfg.n * cfg.K;

    // Stage 1: lattice design at gamma = 0.
    auto t_stage = std::chrono::steady_clock::now();
    ledger.set_stage(1);
    std::optional<std::uint64_t> shift_seed;
    if (cfg.lattice_shift) shift_seed = derive_seed(cfg.seed, 0, 0);
    LatticeRule lattice = is_prime(cfg.n) ? cbc_lattice(cfg.n, p, shift_seed)
                                          : cbc_lattice_any(cfg.n, p, shift_seed);
    rep.lattice_z = lattice.z;

    Design D;
    D.points = lattice.points();
    D.logf = eval_logf_batch(model, D.points, ledger);
    D.stage.assign(D.size(), 1);
    D.k = 1;
    D.gamma = gammas[0];

    StageState state;
    state.C = D.points;
    state.logf = D.logf;
    state.stage = D.stage;
    state.sigma = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p)) / 12.0;
    state.s = 0.0;

    {
        StageReport sr;
        sr.k = 1;
        sr.gamma = gammas[0];
        sr.s = 0.0;
        sr.sigma_condition = 1.0;
        auto id = DistanceSpec::identity(2.0);
        sr.psi_log = psi_log(D, gammas[0], id).value;
        sr.psi_tilde_log = sr.psi_log;
        sr.candidate_set_size = state.C.size();
        sr.evaluations = ledger.count();
        sr.elapsed_ms = elapsed_ms(t_stage);
        rep.stages.push_back(sr);
        if (on_stage) on_stage(sr);
    }

    const LocalFillStream stream(cfg.m, p);

    for (std::size_t k = 1; k < cfg.K; ++k) {
        t_stage = std::chrono::steady_clock::now();
        const int stage = static_cast<int>(k + 1);
        const double g_cur = gammas[k - 1];
        const double g_next = gammas[k];

        state.sigma = update_sigma(D, g_cur, g_next, cfg.whitening);
        state.s = cfg.s_mode == SMode::fixed ? cfg.s_fixed : adaptive_s(D.logf, g_next, cfg.s_quantile);

        ledger.set_stage(stage);
        std::size_t scored = 0;
        Design fresh = propose_new_points(model, ledger, D, state, g_next, cfg, stream, stage, &scored);

        for (std::size_t i = 0; i < fresh.size(); ++i) {
            state.C.push_back(fresh.points[i]);
            state.logf.push_back(fresh.logf[i]);
            state.stage.push_back(stage);
        }

        DistanceSpec spec = cfg.whitening ? DistanceSpec::whitened(state.sigma, state.s)
                                          : DistanceSpec::identity(state.s);
        D = greedy_select(state.C, state.logf, state.stage, cfg.n, g_next, spec);
        D.k = stage;
        D.gamma = g_next;

        StageReport sr;
        sr.k = stage;
        sr.gamma = g_next;
        sr.s = state.s;
        sr.sigma_condition = condition_number(state.sigma);
        sr.psi_log = psi_log(D, g_next, DistanceSpec::identity(state.s)).value;
        sr.psi_tilde_log = psi_log(D, g_next, spec).value;
        sr.candidates_scored = scored;
        sr.candidate_set_size = state.C.size();
        sr.evaluations = ledger.count();
        sr.elapsed_ms = elapsed_ms(t_stage);
        rep.stages.push_back(sr);
        if (on_stage) on_stage(sr);
    }

    rep.evaluations = ledger.count();
    rep.theta_sensitivity = theta_sensitivity(state, D.points[0], cfg.seed);
    rep.elapsed_ms = elapsed_ms(t_run);
    res.design = std::move(D);
    return res;
}

}  // namespace med
