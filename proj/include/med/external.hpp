#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include "med/density.hpp"

namespace med {

struct ExternalOptions {
    std::string command;  // run through /bin/sh -c
    std::size_t dim = 0;
    Box box;              // empty means the unit box
    std::chrono::milliseconds timeout{60000};
    std::size_t max_concurrency = 1;
};

/// Density served by child processes over JSON lines on stdin/stdout:
///   request  {"id": <int>, "x": [<p reals in unit scale>]}
///   response {"id": <int>, "logf": <finite real>}
/// A child that dies or times out is restarted once for the failing request;
/// a second failure, a NaN/non-numeric logf, or an id mismatch aborts with ProtocolError.
class ExternalDensity final : public DensityModel {
public:
    explicit ExternalDensity(ExternalOptions opts);
    ~ExternalDensity() override;

    double log_density_unit(std::span<const double> unit) override;
    void evaluate_batch(const PointSet& xs, const BatchCallback& done) override;
    bool builtin() const override { return false; }

    const ExternalOptions& options() const { return opts_; }
    /// Number of child (re)starts so far, across all workers.
    std::size_t spawn_count() const;

private:
    class Worker;
    double request(Worker& w, std::span<const double> x);

    ExternalOptions opts_;
    std::vector<std::unique_ptr<Worker>> workers_;
    std::uint64_t next_id_ = 1;
};

std::unique_ptr<ExternalDensity> make_external(ExternalOptions opts);

}  // namespace med
