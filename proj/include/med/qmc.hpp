#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "med/rng.hpp"
#include "med/types.hpp"

namespace med {

bool is_prime(std::uint64_t n);
/// Largest prime strictly below `bound` (bound > 2).
std::uint64_t largest_prime_below(std::uint64_t bound);
std::uint64_t smallest_prime_at_least(std::uint64_t n);
std::vector<std::uint32_t> first_primes(std::size_t count);

/// Bernoulli polynomial B2(x) = x^2 - x + 1/6 on [0,1).
inline double bernoulli2(double x) { return x * x - x + 1.0 / 6.0; }

/// Rank-1 lattice {frac(i z / n + shift)}, i = 0..n-1.
struct LatticeRule {
    std::size_t n = 0;
    std::vector<std::uint64_t> z;
    Point shift;  // empty: unshifted

    std::size_t dim() const { return z.size(); }
    PointSet points() const;
};

/// Product weight of coordinate l (0-based) in the lattice error criterion: 1/(l+1)^2.
double lattice_weight(std::size_t l);

/// Squared worst-case error of an unshifted lattice for the shift-invariant kernel
/// prod_l (1 + w_l B2(frac(x_l))): -1 + (1/n) sum_i prod_l (1 + w_l B2(frac(i z_l / n))).
double lattice_error_sq(std::size_t n, std::span<const std::uint64_t> z);

/// Component-by-component construction with z_1 = 1. Requires prime n. A shift is
/// drawn from `shift_seed` when given.
LatticeRule cbc_lattice(std::size_t n, std::size_t p, std::optional<std::uint64_t> shift_seed = {});

/// Same construction for any n >= 2, searching only components coprime to n.
LatticeRule cbc_lattice_any(std::size_t n, std::size_t p,
                            std::optional<std::uint64_t> shift_seed = {});

double radical_inverse(std::uint64_t i, std::uint32_t base);

/// Point i is (i/n, phi_2(i), phi_3(i), ...), i = 0..n-1.
PointSet hammersley(std::size_t n, std::size_t p);

// ---------------------------------------------------------------------------
// Local candidate pools

enum class Provenance { lattice, local_fill, linear_combination };

struct CandidatePool {
    PointSet points;
    std::vector<Provenance> provenance;

    std::size_t size() const { return points.size(); }
};

/// Max-norm proximity queries against a fixed point set (sorted on the first coordinate).
class ProximityIndex {
public:
    ProximityIndex() = default;
    explicit ProximityIndex(const PointSet& points);

    void insert(std::span<const double> x);
    /// True when some indexed point lies within `delta` of x in max-norm.
    bool near(std::span<const double> x, double delta) const;
    std::size_t size() const { return points_.size(); }

private:
    PointSet points_;
    std::vector<std::pair<double, std::size_t>> order_;
};

/// Rank-1 lattice of prime size >= count, reused (with a fresh shift per region) as the
/// space-filling design for local fills.
class LocalFillStream {
public:
    LocalFillStream(std::size_t count, std::size_t dim);
    const LatticeRule& rule() const { return rule_; }
    std::size_t size() const { return rule_.n; }

private:
    LatticeRule rule_;
};

/// w*a + (1-w)*b clipped to [0,1]^p.
Point linear_combination(std::span<const double> a, std::span<const double> b, double w);

struct LocalCandidateOptions {
    std::size_t m = 0;         // local-fill points to keep
    std::size_t n_combos = 5;  // linear combinations of adjacent points
    double delta = 1e-6;       // minimum max-norm gap to evaluated points
    /// Lower-triangular map from fill coordinates to the unit cube (x = frame * y). When set,
    /// `center` and `region` are given in fill coordinates and fill points that map outside
    /// [0,1]^p are dropped. Empty: fill coordinates are unit-cube coordinates.
    Eigen::MatrixXd frame;
};

/// Builds the candidate pool for one local region:
///  - the stream with a fresh random shift, mapped into the bounding box of `region`
///    (inflated by delta where degenerate) and through `opts.frame`, minus points within
///    delta of `existing`; the first `m` survivors in stream order are kept;
///  - `n_combos` points w*center + (1-w)*adjacent[t], w ~ U[-0.5, 1.5], clipped and
///    deduplicated against `existing` and the pool.
/// `adjacent` and `unit_center` are unit-cube points.
CandidatePool local_candidates(const LocalFillStream& stream, std::span<const double> center,
                               std::span<const double> unit_center,
                               const PointSet& region, const PointSet& adjacent,
                               const ProximityIndex& existing, const LocalCandidateOptions& opts,
                               Rng& rng);

}  // namespace med
