// Acceptance checks. Prints one [PASS]/[FAIL] line per criterion (plus indented detail
// lines) and exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "med/baselines.hpp"
#include "med/cli.hpp"
#include "med/diagnostics.hpp"
#include "med/engine.hpp"
#include "med/geometry.hpp"
#include "med/io.hpp"
#include "med/rng.hpp"
#include "med/surrogate.hpp"

using namespace med;
namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

int g_failed = 0;

std::size_t below(Rng& rng, std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)));
}

void report(int id, const std::string& title, bool pass, const std::vector<std::string>& details) {
    std::printf("[%s] %d. %s\n", pass ? "PASS" : "FAIL", id, title.c_str());
    for (auto& d : details) std::printf("       %s\n", d.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failed;
}

std::string fmt(const char* f, double a) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

template <class... A>
std::string fmtn(const char* f, A... a) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "med");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    int code = cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
    if (code != 0) std::printf("       med exited with %d: %s\n", code, err.str().c_str());
    return code;
}

fs::path scratch(const std::string& name) {
    auto d = fs::temp_directory_path() / ("med_acceptance_" + name);
    fs::remove_all(d);
    return d;
}

// Kolmogorov-Smirnov distance between samples and a CDF tabulated on an equispaced grid of [0,1].
double ks_distance(std::vector<double> xs, const std::vector<double>& cdf) {
    std::sort(xs.begin(), xs.end());
    const double G = static_cast<double>(cdf.size() - 1);
    auto F = [&](double x) {
        double h = std::clamp(x, 0.0, 1.0) * G;
        auto i = std::min(static_cast<std::size_t>(h), cdf.size() - 2);
        return cdf[i] + (h - static_cast<double>(i)) * (cdf[i + 1] - cdf[i]);
    };
    double d = 0.0;
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double f = F(xs[i]);
        d = std::max({d, std::fabs((i + 1) / n - f), std::fabs(f - i / n)});
    }
    return d;
}

// Marginal CDFs of an unnormalized 2-d density on [0,1]^2 by the trapezoid rule on a grid.
std::vector<std::vector<double>> trapezoid_marginal_cdfs(const std::function<double(double, double)>& logf,
                                                        std::size_t G) {
    std::vector<double> v(G * G);
    double mx = -INFINITY;
    for (std::size_t i = 0; i < G; ++i)
        for (std::size_t j = 0; j < G; ++j) {
            v[i * G + j] = logf(i / double(G - 1), j / double(G - 1));
            mx = std::max(mx, v[i * G + j]);
        }
    for (auto& x : v) x = std::exp(x - mx);
    const double h = 1.0 / double(G - 1);
    std::vector<std::vector<double>> out;
    for (int dim = 0; dim < 2; ++dim) {
        std::vector<double> marg(G, 0.0);
        for (std::size_t a = 0; a < G; ++a)
            for (std::size_t b = 0; b < G; ++b) {
                double w = (b == 0 || b == G - 1) ? 0.5 : 1.0;
                marg[a] += w * h * (dim == 0 ? v[a * G + b] : v[b * G + a]);
            }
        std::vector<double> cdf(G, 0.0);
        for (std::size_t a = 1; a < G; ++a) cdf[a] = cdf[a - 1] + 0.5 * h * (marg[a - 1] + marg[a]);
        for (auto& c : cdf) c /= cdf.back();
        out.push_back(cdf);
    }
    return out;
}

Marginals run_ar1(std::size_t p, double rho, bool whitening, std::size_t* evals, double* secs) {
    auto model = make_ar1_normal(p, rho, 0.125);
    RunConfig cfg;
    cfg.seed = 1;
    cfg.whitening = whitening;
    EvaluationLedger ledger;
    auto t0 = Clock::now();
    auto res = run(*model, cfg, ledger);
    if (secs) *secs = seconds_since(t0);
    if (evals) *evals = ledger.count();
    return marginals_and_correlations(res.design.points);
}

// ---------------------------------------------------------------------------

void criterion_1_3_12() {
    // 1: banana budget and runtime, via the command line.
    auto a = scratch("banana_a");
    auto t0 = Clock::now();
    int code = cli({"generate", "--density", "banana", "--seed", "1", "--out", a.string()});
    double banana_s = seconds_since(t0);
    std::size_t banana_evals = code == 0 ? read_ledger(a / "ledger.csv").size() : 0;

    auto ar = make_ar1_normal(30, 0.9, 0.125);
    EvaluationLedger l30;
    RunConfig c30;
    c30.seed = 1;
    t0 = Clock::now();
    run(*ar, c30, l30);
    double p30_s = seconds_since(t0);
    report(1, "budget exactness and runtime",
           code == 0 && banana_evals == 654 && banana_s < 60.0 && l30.count() == 5302 && p30_s < 1200.0,
           {fmtn("banana: %zu evaluations (want 654) in %.1f s (limit 60 s)", banana_evals, banana_s),
            fmtn("p=30 AR(1) rho=0.9: %zu evaluations (want 5302) in %.1f s (limit 1200 s)", l30.count(), p30_s)});

    // 3: banana design symmetry and follow-up marginals against a trapezoid oracle.
    t0 = Clock::now();
    Design d = read_design(a / "design.csv");
    double mean_x1 = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) mean_x1 += d.points[i][0] / d.size();
    int fcode = cli({"followup", "--run", a.string(), "--N", "10000", "--seed", "1"});
    double ks[2] = {1.0, 1.0};
    std::size_t nsamp = 0;
    if (fcode == 0) {
        auto t = parse_csv(read_file(a / "samples.csv"), "samples.csv");
        nsamp = t.rows.size();
        auto banana = make_banana();
        auto cdfs = trapezoid_marginal_cdfs(
            [&](double x, double y) { return banana->log_density_unit(Point{x, y}); }, 400);
        for (int l = 0; l < 2; ++l) {
            std::vector<double> xs;
            for (auto& r : t.rows) xs.push_back(r[l]);
            ks[l] = ks_distance(xs, cdfs[l]);
        }
    }
    double c3_s = seconds_since(t0) + banana_s;
    report(3, "banana accuracy",
           std::fabs(mean_x1 - 0.5) <= 0.05 && ks[0] < 0.1 && ks[1] < 0.1 && c3_s < 300.0,
           {fmtn("design mean x1 (unit scale) = %.4f (want |. - 0.5| <= 0.05)", mean_x1),
            fmtn("follow-up: %zu samples; KS x1 = %.4f, KS x2 = %.4f (want < 0.1)", nsamp, ks[0], ks[1]),
            fmt("runtime %.1f s (limit 300 s)", c3_s)});

    // 12: a second identical run.
    auto b = scratch("banana_b");
    int code_b = cli({"generate", "--density", "banana", "--seed", "1", "--out", b.string()});
    bool same_design = code_b == 0 && read_file(a / "design.csv") == read_file(b / "design.csv");
    bool same_report = code_b == 0 && read_file(a / "report.json") == read_file(b / "report.json");
    std::string da, db;
    if (code_b == 0) {
        da = json::parse(read_file(a / "report.json"))["ledger_digest"];
        db = json::parse(read_file(b / "report.json"))["ledger_digest"];
    }
    report(12, "determinism", same_design && same_report && !da.empty() && da == db,
           {fmtn("design.csv identical: %s; report.json identical: %s", same_design ? "yes" : "no",
                 same_report ? "yes" : "no"),
            "ledger digests: " + da + " / " + db});
}

void criterion_2() {
    struct Row { std::size_t p, n, K; };
    const Row rows[] = {{2, 109, 6}, {3, 113, 7}, {10, 149, 13}, {30, 241, 22}};
    bool ok = true;
    std::vector<std::string> det;
    for (auto r : rows) {
        std::size_t n = default_n(r.p), K = default_K(r.p);
        ok = ok && n == r.n && K == r.K;
        det.push_back(fmtn("p=%zu -> (n, K) = (%zu, %zu), want (%zu, %zu)", r.p, n, K, r.n, r.K));
    }
    report(2, "default design size and stage count", ok, det);
}

void criterion_4() {
    std::size_t evals = 0;
    double secs = 0.0;
    auto m = run_ar1(10, 0.0, true, &evals, &secs);
    double worst_mean = 0.0, lo = INFINITY, hi = 0.0;
    for (std::size_t l = 0; l < 10; ++l) {
        worst_mean = std::max(worst_mean, std::fabs(m.mean[l] - 0.5));
        lo = std::min(lo, m.sd[l] * 8.0);
        hi = std::max(hi, m.sd[l] * 8.0);
    }
    report(4, "independent normal marginals (p=10, rho=0, n=149)",
           worst_mean <= 0.03 && lo >= 0.7 && hi <= 1.3 && secs < 600.0,
           {fmt("max |mean - 0.5| = %.4f (want <= 0.03)", worst_mean),
            fmtn("sd / (1/8) in [%.3f, %.3f] (want within [0.7, 1.3])", lo, hi),
            fmtn("%zu evaluations in %.1f s (limit 600 s)", evals, secs)});
}

void criterion_5() {
    auto m = run_ar1(10, 0.9, true, nullptr, nullptr);
    double mae = 0.0;
    for (int i = 0; i < 10; ++i)
        for (int j = i + 1; j < 10; ++j) mae += std::fabs(m.correlation(i, j) - std::pow(0.9, j - i)) / 45.0;
    auto u = run_ar1(10, 0.9, false, nullptr, nullptr);
    double sd_w = 0.0, sd_u = 0.0;
    for (int l = 0; l < 10; ++l) {
        sd_w += m.sd[l] / 10.0;
        sd_u += u.sd[l] / 10.0;
    }
    report(5, "correlated normal with whitening (p=10, rho=0.9)", mae <= 0.15 && sd_u > 0.125,
           {fmt("whitened: correlation MAE over 45 pairs = %.4f (want <= 0.15)", mae),
            fmt("whitened: mean marginal sd / (1/8) = %.3f", sd_w * 8.0),
            fmt("unwhitened: mean marginal sd / (1/8) = %.3f (want > 1)", sd_u * 8.0)});
}

void criterion_6() {
    const double sigma = 0.125;
    const std::size_t p = 2;
    bool literal_ok = true, corrected_ok = true, engine_ok = true;
    std::vector<std::string> det;
    for (double rho : {0.0, 0.5, 0.9}) {
        Eigen::Matrix2d S;
        S << 1.0, rho, rho, 1.0;
        S *= sigma * sigma;
        const Eigen::Matrix2d Si = S.inverse();
        // Oracle: log f(.5-u) + log f(.5+u) + 2p log |x2 - x1|_Sigma, maximized on a 201^2 grid.
        double best = -INFINITY;
        Eigen::Vector2d ub(0, 0);
        for (int a = 0; a <= 200; ++a)
            for (int b = 0; b <= 200; ++b) {
                Eigen::Vector2d u(-0.5 + a * 0.005, -0.5 + b * 0.005);
                double q = u.dot(Si * u);
                if (q <= 0.0) continue;
                double v = -q + static_cast<double>(p) * std::log(4.0 * q);
                if (v > best) {
                    best = v;
                    ub = u;
                }
            }
        double q = ub.dot(Si * ub);
        double lit = std::fabs(q - p * sigma * sigma) / (p * sigma * sigma);
        double cor = std::fabs(q - static_cast<double>(p)) / static_cast<double>(p);
        literal_ok = literal_ok && lit < 0.05;
        corrected_ok = corrected_ok && cor < 0.05;

        auto model = make_ar1_normal(p, rho, sigma);
        auto spec = DistanceSpec::whitened(S, 2.0);
        auto crit = [&](const Point& x1, const Point& x2) {
            PointSet pts(p);
            pts.push_back(x1);
            pts.push_back(x2);
            std::vector<double> lf{model->log_density_unit(x1), model->log_density_unit(x2)};
            return psi_log(pts, lf, 1.0, spec).value;
        };
        double at_opt = crit(Point{0.5 - ub[0], 0.5 - ub[1]}, Point{0.5 + ub[0], 0.5 + ub[1]});
        Rng rng(derive_seed(6, static_cast<std::uint64_t>(rho * 10)));
        std::size_t beaten = 0;
        for (int t = 0; t < 1000; ++t) {
            Point x1{rng.uniform(), rng.uniform()}, x2{rng.uniform(), rng.uniform()};
            beaten += crit(x1, x2) > at_opt;
        }
        engine_ok = engine_ok && beaten == 0;
        det.push_back(fmtn("rho=%.1f: grid optimum u=(%.3f, %.3f), u'Sigma^-1 u = %.4f; "
                           "rel. error vs p*sigma^2 = %.4f, vs p = %.4f; random designs beating it: %zu/1000",
                           rho, ub[0], ub[1], q, lit, cor, beaten));
    }
    det.push_back(std::string("literal target u'Sigma^-1 u = p*sigma^2 (tolerance 0.05): ") +
                  (literal_ok ? "met" : "NOT met"));
    det.push_back(std::string("with Sigma = sigma^2 R the optimum solves d/dq[-q + p log q] = 0, i.e. "
                              "u'Sigma^-1 u = p (equivalently u'R^-1 u = p*sigma^2): ") +
                  (corrected_ok ? "met" : "NOT met"));
    report(6, "two-point ellipsoid property", literal_ok && engine_ok, det);
}

void criterion_7() {
    auto model = make_uniform(2);
    RunConfig cfg;
    cfg.n = 25;
    cfg.seed = 1;
    cfg.s_mode = SMode::fixed;
    cfg.s_fixed = 0.0;
    EvaluationLedger l0;
    auto r0 = run(*model, cfg, l0);
    double min_gap = INFINITY;
    for (std::size_t l = 0; l < 2; ++l) {
        std::vector<double> v;
        for (std::size_t i = 0; i < r0.design.size(); ++i) v.push_back(r0.design.points[i][l]);
        std::sort(v.begin(), v.end());
        for (std::size_t i = 1; i < v.size(); ++i) min_gap = std::min(min_gap, v[i] - v[i - 1]);
    }

    cfg.s_fixed = 2.0;
    cfg.whitening = false;
    EvaluationLedger l2;
    auto r2 = run(*model, cfg, l2);
    PointSet C(2);
    for (auto& rec : l2.records()) C.push_back(rec.x);
    const auto spec = DistanceSpec::identity(2.0);
    std::vector<double> zeros(25, 0.0);
    double psi_design = psi_log(r2.design.points, zeros, 1.0, spec).value;
    Rng rng(77);
    std::vector<double> psis;
    std::vector<std::size_t> idx(C.size());
    for (int t = 0; t < 100; ++t) {
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = 0; i < 25; ++i) std::swap(idx[i], idx[i + below(rng, idx.size() - i)]);
        PointSet sub(2);
        for (std::size_t i = 0; i < 25; ++i) sub.push_back(C[idx[i]]);
        psis.push_back(psi_log(sub, zeros, 1.0, spec).value);
    }
    std::nth_element(psis.begin(), psis.begin() + 50, psis.end());
    double median = 0.5 * (psis[50] + *std::max_element(psis.begin(), psis.begin() + 50));
    report(7, "uniform projections", r0.design.size() == 25 && min_gap > 1e-6 && psi_design >= median,
           {fmt("s=0: minimum gap between projected coordinates = %.3g (want > 1e-6)", min_gap),
            fmtn("s=2, W=I: design log psi = %.4f, median over 100 random 25-subsets of the %zu candidates = %.4f",
                 psi_design, C.size(), median)});
}

void criterion_8() {
    Rng rng(8);
    PointSet X(2);
    std::vector<double> y;
    for (int i = 0; i < 50; ++i) {
        Point x{rng.uniform(), rng.uniform()};
        X.push_back(x);
        y.push_back(std::sin(4.0 * x[0]) * std::cos(3.0 * x[1]) - 2.0 * x[0] * x[0]);
    }
    auto m = SurrogateModel::fit(X, y, default_theta(X));
    double interp = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) interp = std::max(interp, std::fabs(m.predict(X[i]) - y[i]));

    auto mc = SurrogateModel::fit(X, std::vector<double>(50, 1.75), default_theta(X));
    PointSet one(2);
    one.push_back(Point{0.2, 0.7});
    auto m1 = SurrogateModel::fit(one, std::vector<double>{-4.0}, 10.0);
    double cerr = 0.0, serr = 0.0;
    for (int t = 0; t < 1000; ++t) {
        Point q{rng.uniform(), rng.uniform()};
        cerr = std::max(cerr, std::fabs(mc.predict(q) - 1.75));
        serr = std::max(serr, std::fabs(m1.predict(q) + 4.0));
    }
    report(8, "surrogate contract", interp < 1e-6 && cerr < 1e-8 && serr < 1e-12,
           {fmt("max interpolation error at 50 training points = %.3g (want < 1e-6)", interp),
            fmt("constant data: max error at 1000 probes = %.3g (want < 1e-8)", cerr),
            fmt("single point: max deviation at 1000 probes = %.3g", serr)});
}

void criterion_9() {
    Rng rng(9);
    double worst = 0.0;
    std::size_t mono_bad = 0;
    const double ss[] = {1e-6, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0};
    for (int t = 0; t < 1000; ++t) {
        std::size_t p = 1 + below(rng, 10);
        Point u(p), v(p);
        for (std::size_t l = 0; l < p; ++l) {
            u[l] = rng.uniform();
            v[l] = rng.uniform();
        }
        double lg = 0.0;
        for (std::size_t l = 0; l < p; ++l) lg += std::log(std::fabs(u[l] - v[l]));
        double geo = std::exp(lg / static_cast<double>(p));
        worst = std::max(worst, std::fabs(dist_s(u, v, DistanceSpec::identity(1e-6)) - geo));
        double prev = 0.0;
        for (double s : ss) {
            double d = dist_s(u, v, DistanceSpec::identity(s));
            if (d < prev * (1.0 - 1e-12)) ++mono_bad;
            prev = d;
        }
    }
    report(9, "geometry limits", worst < 1e-4 && mono_bad == 0,
           {fmt("max |d_s - geometric mean| at s=1e-6 over 1000 pairs = %.3g (want < 1e-4)", worst),
            fmtn("monotonicity violations over s in {1e-6,...,3}: %zu", mono_bad)});
}

void criterion_10() {
    Rng rng(10);
    const std::size_t S = 1000000;
    std::size_t within = 0;
    double worst_z = 0.0;
    for (int set = 0; set < 10; ++set) {
        PointSet X(2);
        for (int i = 0; i < 16; ++i) X.push_back(Point{rng.uniform(), rng.uniform()});
        // Integrand: sum over coordinate subsets u of (local discrepancy of the box between
        // y_u and its nearest corner)^2, for y uniform on [0,1]^2.
        double acc = 0.0, acc2 = 0.0;
        for (std::size_t s = 0; s < S; ++s) {
            double y[2] = {rng.uniform(), rng.uniform()};
            double lo[2], hi[2], vol[2];
            for (int l = 0; l < 2; ++l) {
                lo[l] = y[l] < 0.5 ? 0.0 : y[l];
                hi[l] = y[l] < 0.5 ? y[l] : 1.0;
                vol[l] = hi[l] - lo[l];
            }
            int c0 = 0, c1 = 0, c01 = 0;
            for (int i = 0; i < 16; ++i) {
                bool in0 = X[i][0] >= lo[0] && X[i][0] < hi[0];
                bool in1 = X[i][1] >= lo[1] && X[i][1] < hi[1];
                c0 += in0;
                c1 += in1;
                c01 += in0 && in1;
            }
            double d0 = c0 / 16.0 - vol[0], d1 = c1 / 16.0 - vol[1], d01 = c01 / 16.0 - vol[0] * vol[1];
            double g = d0 * d0 + d1 * d1 + d01 * d01;
            acc += g;
            acc2 += g * g;
        }
        double mean = acc / S;
        double se = std::sqrt((acc2 / S - mean * mean) / S);
        double z = std::fabs(mean - cl2_discrepancy_sq(X)) / se;
        worst_z = std::max(worst_z, z);
        within += z <= 3.0;
    }
    PointSet c(1), z(1);
    c.push_back(Point{0.5});
    z.push_back(Point{0.0});
    double v_c = cl2_discrepancy_sq(c), v_z = cl2_discrepancy_sq(z);
    bool hand_c = std::fabs(v_c - 1.0 / 12.0) < 1e-15;
    bool hand_z = std::fabs(v_z - 7.0 / 12.0) < 1e-15;
    bool hand_z_corrected = std::fabs(v_z - 1.0 / 3.0) < 1e-15;
    report(10, "centered L2 discrepancy oracle", within == 10 && hand_c && hand_z,
           {fmtn("Monte Carlo (1e6 samples) within 3 SE on %zu/10 random 16-point sets; worst |z| = %.2f",
                 within, worst_z),
            fmtn("n=1, x=0.5: CL2^2 = %.17g (want 1/12): %s", v_c, hand_c ? "match" : "MISMATCH"),
            fmtn("n=1, x=0: CL2^2 = %.17g (want 7/12): %s", v_z, hand_z ? "match" : "MISMATCH"),
            std::string("n=1, x=0 by hand: 13/12 - 2(1 + 1/4 - 1/8) + (1 + 1/4 + 1/4) = 1/3; the middle term "
                        "is 2*1.125, not 2*1: ") +
                (hand_z_corrected ? "matches 1/3" : "does not match 1/3")});
}

void criterion_11() {
    int wins = 0;
    std::vector<std::string> det;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        cli::DensitySpec ds;
        ds.kind = "banana";
        RunConfig cfg;
        cfg.seed = seed;
        auto j = cli::bench_case(ds, cfg);
        double med = j["med"]["cl2_truth_transform"], am = j["metropolis"]["cl2_truth_transform"];
        wins += med < am;
        det.push_back(fmtn("seed %2llu: MED %.4f vs adaptive Metropolis %.4f (acceptance %.3f)",
                           static_cast<unsigned long long>(seed), med, am,
                           j["metropolis"]["acceptance"].get<double>()));
    }
    det.push_back(fmtn("MED lower in %d/10 seeds (want >= 8)", wins));
    report(11, "benchmark direction (banana, matched budget 654)", wins >= 8, det);
}

}  // namespace

int main() {
    auto t0 = Clock::now();
    criterion_2();
    criterion_8();
    criterion_9();
    criterion_10();
    criterion_6();
    criterion_7();
    criterion_1_3_12();
    criterion_4();
    criterion_5();
    criterion_11();
    std::printf("%d criterion(s) failed; total %.1f s\n", g_failed, seconds_since(t0));
    return g_failed == 0 ? 0 : 1;
}
