#include "med/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <omp.h>

#include "med/baselines.hpp"
#include "med/diagnostics.hpp"
#include "med/external.hpp"
#include "med/io.hpp"
#include "med/qmc.hpp"
#include "med/rng.hpp"
#include "med/surrogate.hpp"

#ifndef MED_VERSION
#define MED_VERSION "0.0.0"
#endif

namespace med::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
    std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

double parse_number(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw UsageError("invalid value for '" + key + "': '" + s + "'");
    }
}

}  // namespace

Box parse_box(const std::string& text, std::size_t p) {
    std::vector<Interval> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto colon = item.find(':', item[0] == '-' ? 1 : 0);
        if (colon == std::string::npos) throw UsageError("invalid value for 'box': '" + text + "'");
        Interval iv{parse_number(item.substr(0, colon), "box"), parse_number(item.substr(colon + 1), "box")};
        if (!(iv.lo < iv.hi)) throw UsageError("invalid value for 'box': empty interval '" + item + "'");
        parts.push_back(iv);
    }
    if (parts.size() == 1) return Box(p, parts[0]);
    if (parts.size() != p)
        throw UsageError("invalid value for 'box': " + std::to_string(parts.size()) +
                         " intervals for dimension " + std::to_string(p));
    return parts;
}

std::unique_ptr<DensityModel> make_density(const DensitySpec& spec) {
    if (spec.kind == "banana") {
        if (spec.p != 0 && spec.p != 2) throw UsageError("invalid value for 'p': banana is 2-dimensional");
        return make_banana();
    }
    if (spec.kind == "ar1") {
        if (spec.p < 1) throw UsageError("missing or invalid value for 'p'");
        if (!(std::fabs(spec.rho) < 1.0)) throw UsageError("invalid value for 'rho': must satisfy |rho| < 1");
        if (!(spec.sigma > 0.0)) throw UsageError("invalid value for 'sigma': must be positive");
        return make_ar1_normal(spec.p, spec.rho, spec.sigma);
    }
    if (spec.kind == "uniform") {
        if (spec.p < 1) throw UsageError("missing or invalid value for 'p'");
        return make_uniform(spec.p);
    }
    if (spec.kind == "external") {
        if (spec.cmd.empty()) throw UsageError("missing value for 'cmd'");
        if (spec.p < 1) throw UsageError("missing or invalid value for 'p'");
        if (!(spec.timeout_s > 0.0)) throw UsageError("invalid value for 'timeout': must be positive");
        if (spec.concurrency < 1) throw UsageError("invalid value for 'concurrency': must be >= 1");
        ExternalOptions o;
        o.command = spec.cmd;
        o.dim = spec.p;
        if (!spec.box.empty()) o.box = parse_box(spec.box, spec.p);
        o.timeout = std::chrono::milliseconds(static_cast<long long>(spec.timeout_s * 1000.0));
        o.max_concurrency = spec.concurrency;
        return make_external(std::move(o));
    }
    if (spec.kind.empty()) throw UsageError("missing value for 'density'");
    throw UsageError("invalid value for 'density': '" + spec.kind + "'");
}

json config_json(const GenerateOptions& opts, const RunConfig& r) {
    json d;
    d["kind"] = opts.density.kind;
    if (opts.density.kind == "ar1") {
        d["rho"] = opts.density.rho;
        d["sigma"] = opts.density.sigma;
    }
    if (opts.density.kind == "external") {
        d["cmd"] = opts.density.cmd;
        d["box"] = opts.density.box;
        d["timeout"] = opts.density.timeout_s;
        d["concurrency"] = opts.density.concurrency;
    }
    json c;
    c["density"] = d;
    c["n"] = r.n;
    c["K"] = r.K;
    c["seed"] = r.seed;
    c["m"] = r.m;
    c["n_combos"] = r.n_combos;
    c["delta"] = r.delta;
    c["theta"] = r.theta;
    c["jitter"] = r.jitter;
    c["s_mode"] = r.s_mode == SMode::fixed ? "fixed" : "adaptive";
    if (r.s_mode == SMode::fixed) c["s"] = r.s_fixed;
    c["s_quantile"] = r.s_quantile;
    c["whitening"] = r.whitening;
    c["lattice_shift"] = r.lattice_shift;
    c["surrogate_cap"] = r.surrogate_cap;
    return c;
}

json report_json(const RunResult& result, const GenerateOptions& opts, const RunConfig& resolved,
                 const std::string& digest) {
    const auto& rep = result.report;
    json j;
    j["config"] = config_json(opts, resolved);
    j["p"] = rep.p;
    j["n"] = rep.n;
    j["K"] = rep.K;
    j["budget"] = rep.budget;
    j["evaluations"] = rep.evaluations;
    j["ledger_digest"] = digest;
    j["lattice_z"] = rep.lattice_z;
    json stages = json::array();
    for (const auto& s : rep.stages) {
        stages.push_back({{"k", s.k},
                          {"gamma", s.gamma},
                          {"s", s.s},
                          {"sigma_condition", s.sigma_condition},
                          {"psi_log", s.psi_log},
                          {"psi_tilde_log", s.psi_tilde_log},
                          {"candidates_scored", s.candidates_scored},
                          {"candidate_set_size", s.candidate_set_size},
                          {"evaluations", s.evaluations}});
    }
    j["stages"] = stages;
    j["theta_sensitivity"] = rep.theta_sensitivity;
    const auto& d = result.design;
    j["design"] = {{"size", d.size()},
                   {"max_logf", *std::max_element(d.logf.begin(), d.logf.end())},
                   {"cl2", cl2_discrepancy(d.points)}};
    return j;
}

RunResult generate(const GenerateOptions& opts, std::ostream& log) {
    if (opts.out.empty()) throw UsageError("missing value for 'out'");
    auto model = make_density(opts.density);
    const RunConfig resolved = resolve_config(opts.run, model->dim());
    fs::create_directories(opts.out);

    const std::string started = utc_now();
    EvaluationLedger ledger;
    RunResult res = run(*model, resolved, ledger, [&](const StageReport& s) {
        log << "stage " << s.k << "/" << resolved.K << " gamma=" << s.gamma << " s=" << s.s
            << " evaluations=" << s.evaluations << " (" << std::llround(s.elapsed_ms) << " ms)\n";
    });
    const std::string finished = utc_now();
    const std::string digest = ledger.digest();

    const fs::path out(opts.out);
    write_file_atomic(out / "design.csv", design_csv(res.design));
    write_file_atomic(out / "ledger.csv", ledger_csv(ledger, model->dim()));
    write_file_atomic(out / "report.json", report_json(res, opts, resolved, digest).dump(2) + "\n");

    json m;
    m["config"] = config_json(opts, resolved);
    m["seed"] = resolved.seed;
    m["version"] = MED_VERSION;
    m["started"] = started;
    m["finished"] = finished;
    m["ledger_digest"] = digest;
    m["evaluations"] = ledger.count();
    json timings = json::array();
    for (const auto& s : res.report.stages) timings.push_back({{"k", s.k}, {"elapsed_ms", s.elapsed_ms}});
    m["stage_timings_ms"] = timings;
    m["elapsed_ms"] = res.report.elapsed_ms;
    if (auto* ext = dynamic_cast<ExternalDensity*>(model.get())) m["child_spawns"] = ext->spawn_count();
    write_file_atomic(out / "manifest.json", m.dump(2) + "\n");
    return res;
}

namespace {

double marginal_ks_uniform(const PointSet& u) {
    double worst = 0.0;
    std::vector<double> v(u.size());
    for (std::size_t l = 0; l < u.dim(); ++l) {
        for (std::size_t i = 0; i < u.size(); ++i) v[i] = u[i][l];
        std::sort(v.begin(), v.end());
        const double n = static_cast<double>(v.size());
        for (std::size_t i = 0; i < v.size(); ++i)
            worst = std::max({worst, std::fabs(static_cast<double>(i + 1) / n - v[i]),
                              std::fabs(v[i] - static_cast<double>(i) / n)});
    }
    return worst;
}

}  // namespace

json bench_case(const DensitySpec& density, const RunConfig& run_cfg) {
    auto model = make_density(density);
    if (!model->builtin() || !model->has_truth_transform())
        throw UsageError("invalid value for 'density': bench requires a builtin density");
    const std::size_t p = model->dim();
    const RunConfig cfg = resolve_config(run_cfg, p);
    const std::size_t budget = cfg.n * cfg.K;

    json j;
    j["density"] = density.kind;
    j["p"] = p;
    j["n"] = cfg.n;
    j["K"] = cfg.K;
    j["budget"] = budget;
    j["seed"] = cfg.seed;

    EvaluationLedger med_ledger;
    auto res = run(*model, cfg, med_ledger);
    PointSet med_u = truth_transform(*model, res.design.points);
    j["med"] = {{"evaluations", med_ledger.count()},
                {"points", res.design.size()},
                {"cl2_truth_transform", cl2_discrepancy(med_u)},
                {"marginal_ks", marginal_ks_uniform(med_u)}};

    EvaluationLedger am_ledger;
    ChainSpec spec;
    Rng rng(derive_seed(cfg.seed, 0xa11));
    spec.start.resize(p);
    for (auto& v : spec.start) v = rng.uniform();
    spec.length = 1000 * budget;
    spec.max_evaluations = budget;
    spec.seed = derive_seed(cfg.seed, 0xa12);
    Chain chain = adaptive_metropolis(*model, am_ledger, spec);
    PointSet am_u = truth_transform(*model, chain.samples);
    j["metropolis"] = {{"label", "adaptive Metropolis (rank-1 triangular update, target 0.234)"},
                       {"evaluations", am_ledger.count()},
                       {"points", chain.samples.size()},
                       {"acceptance", chain.acceptance_rate()},
                       {"burn_in", 0},
                       {"cl2_truth_transform", cl2_discrepancy(am_u)},
                       {"marginal_ks", marginal_ks_uniform(am_u)}};

    // Hammersley points are uniform in the transformed space.
    PointSet ham = hammersley(budget, p);
    j["hammersley"] = {{"points", budget},
                       {"cl2_truth_transform", cl2_discrepancy(ham)},
                       {"marginal_ks", marginal_ks_uniform(ham)}};
    return j;
}

namespace {

// Applies config-file keys that were not given on the command line.
void apply_config(const json& cfg, CLI::App& sub, const std::map<std::string, std::function<void(const json&)>>& setters) {
    if (!cfg.is_object()) throw UsageError("config file must hold a JSON object");
    for (auto& [key, value] : cfg.items()) {
        auto it = setters.find(key);
        if (it == setters.end()) throw UsageError("unknown config key '" + key + "'");
        CLI::Option* opt = nullptr;
        try {
            opt = sub.get_option("--" + key);
        } catch (const CLI::OptionNotFound&) {
        }
        if (opt && opt->count() > 0) continue;
        try {
            it->second(value);
        } catch (const json::exception& e) {
            throw UsageError("invalid value for config key '" + key + "': " + e.what());
        }
    }
}

template <class T>
std::function<void(const json&)> set(T& target) {
    return [&target](const json& v) { target = v.get<T>(); };
}

std::size_t env_threads() {
    if (const char* s = std::getenv("MED_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(s, &end, 10);
        if (end && *end == '\0' && v >= 0) return static_cast<std::size_t>(v);
        throw UsageError(std::string("invalid value for 'MED_THREADS': '") + s + "'");
    }
    return 0;
}

void add_density_flags(CLI::App& sub, DensitySpec& d) {
    sub.add_option("--density", d.kind, "banana | ar1 | uniform | external");
    sub.add_option("--p", d.p, "Dimension");
    sub.add_option("--rho", d.rho, "AR(1) correlation");
    sub.add_option("--sigma", d.sigma, "AR(1) marginal sd (unit scale)");
    sub.add_option("--cmd", d.cmd, "External density command");
    sub.add_option("--box", d.box, "Box of an external density: lo:hi or lo:hi,lo:hi,...");
    sub.add_option("--timeout", d.timeout_s, "External request timeout in seconds");
    sub.add_option("--concurrency", d.concurrency, "External worker processes");
}

}  // namespace

int main(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Minimum energy designs for expensive unnormalized densities"};
    app.require_subcommand(1);
    app.set_version_flag("--version", MED_VERSION);

    // generate
    GenerateOptions gen;
    std::string gen_config;
    std::string s_mode;
    double s_value = 2.0;
    bool no_whitening = false, no_shift = false;
    int threads = -1;
    auto* g = app.add_subcommand("generate", "Build a design and write design/ledger/report/manifest");
    add_density_flags(*g, gen.density);
    g->add_option("--n", gen.run.n, "Design size (default: largest prime below 100 + 5p)");
    g->add_option("--K", gen.run.K, "Stages (default: ceil(4 sqrt(p)))");
    g->add_option("--seed", gen.run.seed, "Master seed");
    g->add_option("--m", gen.run.m, "Local-fill candidates per region (default 50p)");
    g->add_option("--theta", gen.run.theta, "Surrogate correlation parameter (default per region)");
    g->add_option("--s-mode", s_mode, "adaptive | fixed");
    g->add_option("--s", s_value, "Fixed s (implies --s-mode fixed)");
    g->add_option("--s-quantile", gen.run.s_quantile, "Quantile for adaptive s (0 = min/max)");
    g->add_flag("--no-whitening", no_whitening, "Use the unwhitened distance");
    g->add_flag("--no-shift", no_shift, "Unshifted initial lattice");
    g->add_option("--threads", threads, "Worker threads (default: MED_THREADS or all cores)");
    g->add_option("--out", gen.out, "Output directory");
    g->add_option("--config", gen_config, "JSON config file; flags win on conflict");

    // diagnose
    std::string diag_design, diag_out;
    DensitySpec diag_density;
    std::size_t bins = 0;
    bool truth = false;
    double diag_s = 2.0;
    auto* d = app.add_subcommand("diagnose", "Quality diagnostics of a design file");
    d->add_option("design", diag_design, "design.csv")->required();
    add_density_flags(*d, diag_density);
    d->add_option("--bins", bins, "Histogram bins (default ceil(sqrt(n)))");
    d->add_flag("--truth", truth, "Add truth-based comparisons for a builtin density");
    d->add_option("--s", diag_s, "Distance exponent for psi");
    d->add_option("--out", diag_out, "Output directory (default: JSON to stdout)");

    // followup
    std::string run_dir, fu_out;
    std::size_t N = 10000;
    std::uint64_t fu_seed = 1;
    auto* f = app.add_subcommand("followup", "Surrogate MCMC chains started at the design points");
    f->add_option("--run", run_dir, "Directory of a completed generate run")->required();
    f->add_option("--N", N, "Total chain length budget");
    f->add_option("--seed", fu_seed, "Seed");
    f->add_option("--out", fu_out, "Output directory (default: the run directory)");
    f->add_option("--threads", threads, "Worker threads");

    // bench
    DensitySpec bench_density;
    RunConfig bench_run;
    std::string sweep, bench_out;
    auto* b = app.add_subcommand("bench", "MED vs adaptive Metropolis vs Hammersley at matched budget");
    add_density_flags(*b, bench_density);
    b->add_option("--n", bench_run.n, "Design size");
    b->add_option("--K", bench_run.K, "Stages");
    b->add_option("--seed", bench_run.seed, "Master seed");
    b->add_option("--sweep", sweep, "Comma-separated dimensions for an ar1 sweep");
    b->add_option("--threads", threads, "Worker threads");
    b->add_option("--out", bench_out, "Output directory (default: JSON to stdout)");

    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::Success& e) {
            return app.exit(e, out, err);
        } catch (const CLI::ParseError& e) {
            app.exit(e, out, err);
            return kExitUsage;
        }

        if (threads < 0) threads = static_cast<int>(env_threads());
        gen.run.threads = threads;
        bench_run.threads = threads;

        if (g->parsed()) {
            if (!gen_config.empty()) {
                json cfg;
                try {
                    cfg = json::parse(read_file(gen_config));
                } catch (const json::exception& e) {
                    throw UsageError("config file " + gen_config + ": " + e.what());
                } catch (const MedError& e) {
                    throw UsageError(e.what());
                }
                std::map<std::string, std::function<void(const json&)>> setters{
                    {"density", set(gen.density.kind)}, {"p", set(gen.density.p)},
                    {"rho", set(gen.density.rho)},      {"sigma", set(gen.density.sigma)},
                    {"cmd", set(gen.density.cmd)},      {"box", set(gen.density.box)},
                    {"timeout", set(gen.density.timeout_s)},
                    {"concurrency", set(gen.density.concurrency)},
                    {"n", set(gen.run.n)},              {"K", set(gen.run.K)},
                    {"seed", set(gen.run.seed)},        {"m", set(gen.run.m)},
                    {"theta", set(gen.run.theta)},      {"s-mode", set(s_mode)},
                    {"s", set(s_value)},                {"s-quantile", set(gen.run.s_quantile)},
                    {"no-whitening", set(no_whitening)}, {"no-shift", set(no_shift)},
                    {"threads", set(gen.run.threads)},  {"out", set(gen.out)},
                };
                apply_config(cfg, *g, setters);
            }
            if (!s_mode.empty() && s_mode != "adaptive" && s_mode != "fixed")
                throw UsageError("invalid value for 's-mode': '" + s_mode + "'");
            if (s_mode == "fixed" || (s_mode.empty() && g->get_option("--s")->count() > 0)) {
                gen.run.s_mode = SMode::fixed;
                gen.run.s_fixed = s_value;
            }
            gen.run.whitening = !no_whitening;
            gen.run.lattice_shift = !no_shift;
            try {
                resolve_config(gen.run, std::max<std::size_t>(1, gen.density.p));
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            auto res = generate(gen, err);
            out << "wrote " << res.design.size() << " points, " << res.report.evaluations
                << " evaluations to " << gen.out << "\n";
            return kExitOk;
        }

        if (d->parsed()) {
            Design design = read_design(diag_design);
            std::unique_ptr<DensityModel> model;
            if (!diag_density.kind.empty()) {
                if (diag_density.kind == "banana" || diag_density.p == 0) diag_density.p = design.dim();
                model = make_density(diag_density);
                if (model->dim() != design.dim())
                    throw UsageError("invalid value for 'p': design has dimension " + std::to_string(design.dim()));
            }
            if (truth && (!model || !model->has_truth_transform()))
                throw UsageError("missing value for 'density': --truth needs a builtin density");
            auto rep = diagnose(design, DistanceSpec::identity(diag_s), bins, truth ? model.get() : nullptr);
            json j = to_json(rep);
            if (diag_out.empty()) {
                out << j.dump(2) << "\n";
                return kExitOk;
            }
            fs::create_directories(diag_out);
            const fs::path o(diag_out);
            write_file_atomic(o / "diagnostics.json", j.dump(2) + "\n");
            std::string hist = "dim,bin,lo,hi,mass\n";
            const auto& h = rep.marginals.histogram;
            for (std::size_t l = 0; l < h.size(); ++l)
                for (std::size_t k = 0; k < h[l].size(); ++k) {
                    double w = 1.0 / static_cast<double>(h[l].size());
                    hist += std::to_string(l + 1) + "," + std::to_string(k + 1) + "," +
                            format_double(k * w) + "," + format_double((k + 1) * w) + "," +
                            format_double(h[l][k]) + "\n";
                }
            write_file_atomic(o / "histogram_long.csv", hist);
            std::string pts = "point,dim,value\n";
            for (std::size_t i = 0; i < design.size(); ++i)
                for (std::size_t l = 0; l < design.dim(); ++l)
                    pts += std::to_string(i + 1) + "," + std::to_string(l + 1) + "," +
                           format_double(design.points[i][l]) + "\n";
            write_file_atomic(o / "points_long.csv", pts);
            std::string corr = "row,col,value\n";
            const auto& c = rep.marginals.correlation;
            for (Eigen::Index r = 0; r < c.rows(); ++r)
                for (Eigen::Index q = 0; q < c.cols(); ++q)
                    corr += std::to_string(r + 1) + "," + std::to_string(q + 1) + "," +
                            format_double(c(r, q)) + "\n";
            write_file_atomic(o / "correlation_long.csv", corr);
            out << "wrote diagnostics to " << diag_out << "\n";
            return kExitOk;
        }

        if (f->parsed()) {
            if (threads > 0) omp_set_num_threads(threads);
            const fs::path dir(run_dir);
            if (!fs::exists(dir / "ledger.csv")) throw MedError("ledger missing: " + (dir / "ledger.csv").string());
            if (!fs::exists(dir / "design.csv")) throw MedError("design missing: " + (dir / "design.csv").string());
            Design design = read_design(dir / "design.csv");
            auto rows = read_ledger(dir / "ledger.csv");
            PointSet X(design.dim());
            std::vector<double> y;
            for (auto& r : rows) {
                if (r.x.size() != design.dim()) throw MedError("ledger and design dimensions differ");
                X.push_back(r.x);
                y.push_back(r.logf);
            }
            auto sur = SurrogateModel::fit(X, y, default_theta(X));
            auto res = followup_mcmc(design, sur, N, fu_seed);
            const fs::path o = fu_out.empty() ? dir : fs::path(fu_out);
            fs::create_directories(o);
            write_file_atomic(o / "samples.csv", samples_csv(res.samples, res.chain));
            json j;
            j["N"] = N;
            j["seed"] = fu_seed;
            j["chains"] = design.size();
            j["samples"] = res.samples.size();
            j["lengths"] = res.lengths;
            j["acceptance"] = res.acceptance;
            j["burn_in"] = 0;
            j["surrogate_points"] = X.size();
            j["surrogate_theta"] = sur.theta();
            j["new_exact_evaluations"] = 0;
            write_file_atomic(o / "followup.json", j.dump(2) + "\n");
            out << "wrote " << res.samples.size() << " samples to " << (o / "samples.csv").string() << "\n";
            return kExitOk;
        }

        if (b->parsed()) {
            json j;
            if (!sweep.empty()) {
                if (!bench_density.kind.empty() && bench_density.kind != "ar1")
                    throw UsageError("invalid value for 'sweep': only the ar1 density sweeps dimension");
                bench_density.kind = "ar1";
                json table = json::array();
                std::stringstream ss(sweep);
                std::string item;
                while (std::getline(ss, item, ',')) {
                    double v = parse_number(item, "sweep");
                    if (!(v >= 1.0) || v != std::floor(v)) throw UsageError("invalid value for 'sweep': '" + item + "'");
                    DensitySpec ds = bench_density;
                    ds.p = static_cast<std::size_t>(v);
                    table.push_back(bench_case(ds, bench_run));
                }
                j["sweep"] = table;
            } else {
                j = bench_case(bench_density, bench_run);
            }
            if (bench_out.empty()) {
                out << j.dump(2) << "\n";
            } else {
                fs::create_directories(bench_out);
                write_file_atomic(fs::path(bench_out) / "comparison.json", j.dump(2) + "\n");
                out << "wrote " << (fs::path(bench_out) / "comparison.json").string() << "\n";
            }
            return kExitOk;
        }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace med::cli
