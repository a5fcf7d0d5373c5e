#pragma once

#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "med/density.hpp"
#include "med/engine.hpp"

namespace med::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

struct DensitySpec {
    std::string kind;  // banana | ar1 | uniform | external
    std::size_t p = 0; // 0: 2 for banana, required otherwise
    double rho = 0.9;
    double sigma = 0.125;
    std::string cmd;
    std::string box;   // "lo:hi" for every dimension or "lo:hi,lo:hi,..."
    double timeout_s = 60.0;
    std::size_t concurrency = 1;
};

/// Builds the density; invalid parameters raise UsageError naming the key.
std::unique_ptr<DensityModel> make_density(const DensitySpec& spec);

Box parse_box(const std::string& text, std::size_t p);

/// Everything `generate` needs, after merging the config file and flags.
struct GenerateOptions {
    DensitySpec density;
    RunConfig run;
    std::string out;
};

/// Stable JSON echo of the resolved configuration.
nlohmann::json config_json(const GenerateOptions& opts, const RunConfig& resolved);

/// Deterministic run report (no timings).
nlohmann::json report_json(const RunResult& result, const GenerateOptions& opts,
                           const RunConfig& resolved, const std::string& digest);

/// Runs the engine and writes design.csv, ledger.csv, report.json and manifest.json.
RunResult generate(const GenerateOptions& opts, std::ostream& log);

/// One benchmark case at matched budget K*n: MED, adaptive Metropolis and Hammersley.
nlohmann::json bench_case(const DensitySpec& density, const RunConfig& run);

/// Entry point of the `med` executable. Returns the process exit code.
int main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace med::cli
