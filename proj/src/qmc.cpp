#include "med/qmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace med {

bool is_prime(std::uint64_t n) {
    if (n < 2) return false;
    if (n % 2 == 0) return n == 2;
    for (std::uint64_t d = 3; d * d <= n; d += 2)
        if (n % d == 0) return false;
    return true;
}

std::uint64_t largest_prime_below(std::uint64_t bound) {
    if (bound <= 2) throw std::invalid_argument("largest_prime_below: bound must exceed 2");
    for (std::uint64_t c = bound - 1;; --c)
        if (is_prime(c)) return c;
}

std::uint64_t smallest_prime_at_least(std::uint64_t n) {
    for (std::uint64_t c = std::max<std::uint64_t>(n, 2);; ++c)
        if (is_prime(c)) return c;
}

std::vector<std::uint32_t> first_primes(std::size_t count) {
    std::vector<std::uint32_t> out;
    for (std::uint32_t c = 2; out.size() < count; ++c)
        if (is_prime(c)) out.push_back(c);
    return out;
}

PointSet LatticeRule::points() const {
    const std::size_t p = z.size();
    PointSet out(n, p);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = out[i];
        for (std::size_t l = 0; l < p; ++l) {
            double v = static_cast<double>((i * z[l]) % n) / static_cast<double>(n);
            if (!shift.empty()) {
                v += shift[l];
                v -= std::floor(v);
            }
            row[l] = v;
        }
    }
    return out;
}

double lattice_weight(std::size_t l) {
    double k = static_cast<double>(l + 1);
    return 1.0 / (k * k);
}

double lattice_error_sq(std::size_t n, std::span<const std::uint64_t> z) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double prod = 1.0;
        for (std::size_t l = 0; l < z.size(); ++l) {
            double x = static_cast<double>((i * z[l]) % n) / static_cast<double>(n);
            prod *= 1.0 + lattice_weight(l) * bernoulli2(x);
        }
        sum += prod;
    }
    return -1.0 + sum / static_cast<double>(n);
}

namespace {

LatticeRule cbc_construct(std::size_t n, std::size_t p, bool coprime_only,
                          std::optional<std::uint64_t> shift_seed) {
    if (p < 1) throw std::invalid_argument("cbc_lattice: p must be >= 1");
    std::vector<double> b2(n);
    for (std::size_t k = 0; k < n; ++k) b2[k] = bernoulli2(static_cast<double>(k) / n);

    std::vector<std::uint64_t> allowed;
    for (std::uint64_t c = 1; c < n; ++c)
        if (!coprime_only || std::gcd(c, static_cast<std::uint64_t>(n)) == 1) allowed.push_back(c);
    if (n == 1) allowed.push_back(1);

    LatticeRule rule;
    rule.n = n;
    std::vector<double> prod(n, 1.0);
    for (std::size_t l = 0; l < p; ++l) {
        const double w = lattice_weight(l);
        std::uint64_t best_z = 1;
        if (l > 0) {
            double best = std::numeric_limits<double>::infinity();
            for (auto c : allowed) {
                double e = 0.0;
                for (std::size_t i = 0; i < n; ++i) e += prod[i] * (1.0 + w * b2[(i * c) % n]);
                if (e < best) {
                    best = e;
                    best_z = c;
                }
            }
        }
        rule.z.push_back(best_z);
        for (std::size_t i = 0; i < n; ++i) prod[i] *= 1.0 + w * b2[(i * best_z) % n];
    }
    if (shift_seed) {
        Rng rng(*shift_seed);
        rule.shift.resize(p);
        for (auto& s : rule.shift) s = rng.uniform();
    }
    return rule;
}

}  // namespace

LatticeRule cbc_lattice(std::size_t n, std::size_t p, std::optional<std::uint64_t> shift_seed) {
    if (!is_prime(n)) throw std::invalid_argument("cbc_lattice: n = " + std::to_string(n) + " is not prime");
    return cbc_construct(n, p, false, shift_seed);
}

LatticeRule cbc_lattice_any(std::size_t n, std::size_t p,
                            std::optional<std::uint64_t> shift_seed) {
    if (n < 2) throw std::invalid_argument("cbc_lattice_any: n must be >= 2");
    return cbc_construct(n, p, true, shift_seed);
}

double radical_inverse(std::uint64_t i, std::uint32_t base) {
    double inv = 1.0 / base;
    double f = inv;
    double r = 0.0;
    while (i > 0) {
        r += f * static_cast<double>(i % base);
        i /= base;
        f *= inv;
    }
    return r;
}

PointSet hammersley(std::size_t n, std::size_t p) {
    if (p < 1) throw std::invalid_argument("hammersley: p must be >= 1");
    auto primes = first_primes(p > 1 ? p - 1 : 0);
    PointSet out(n, p);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = out[i];
        row[0] = static_cast<double>(i) / static_cast<double>(n);
        for (std::size_t l = 1; l < p; ++l) row[l] = radical_inverse(i, primes[l - 1]);
    }
    return out;
}

// ---------------------------------------------------------------------------

ProximityIndex::ProximityIndex(const PointSet& points) : points_(points.dim()) {
    points_ = points;
    order_.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) order_.emplace_back(points[i][0], i);
    std::sort(order_.begin(), order_.end());
}

void ProximityIndex::insert(std::span<const double> x) {
    if (points_.dim() == 0) points_ = PointSet(x.size());
    std::size_t idx = points_.size();
    points_.push_back(x);
    std::pair<double, std::size_t> key{x[0], idx};
    order_.insert(std::upper_bound(order_.begin(), order_.end(), key), key);
}

bool ProximityIndex::near(std::span<const double> x, double delta) const {
    auto lo = std::lower_bound(order_.begin(), order_.end(),
                               std::pair<double, std::size_t>{x[0] - delta, 0});
    for (auto it = lo; it != order_.end() && it->first <= x[0] + delta; ++it) {
        auto y = points_[it->second];
        bool close = true;
        for (std::size_t l = 0; l < x.size() && close; ++l)
            close = std::fabs(x[l] - y[l]) <= delta;
        if (close) return true;
    }
    return false;
}

LocalFillStream::LocalFillStream(std::size_t count, std::size_t dim)
    : rule_(cbc_lattice(smallest_prime_at_least(std::max<std::size_t>(count, 2)), dim)) {}

Point linear_combination(std::span<const double> a, std::span<const double> b, double w) {
    if (a.size() != b.size()) throw std::invalid_argument("linear_combination: dimension mismatch");
    Point out(a.size());
    for (std::size_t l = 0; l < a.size(); ++l)
        out[l] = std::clamp(w * a[l] + (1.0 - w) * b[l], 0.0, 1.0);
    return out;
}

CandidatePool local_candidates(const LocalFillStream& stream, std::span<const double> center,
                               std::span<const double> unit_center,
                               const PointSet& region, const PointSet& adjacent,
                               const ProximityIndex& existing, const LocalCandidateOptions& opts,
                               Rng& rng) {
    const std::size_t p = center.size();
    if (opts.m < 1) throw std::invalid_argument("local_candidates: m must be >= 1");
    if (stream.rule().dim() != p) throw std::invalid_argument("local_candidates: stream dimension mismatch");
    if (unit_center.size() != p) throw std::invalid_argument("local_candidates: center dimension mismatch");
    const bool framed = opts.frame.size() != 0;
    if (framed && (opts.frame.rows() != static_cast<Eigen::Index>(p) || opts.frame.cols() != static_cast<Eigen::Index>(p)))
        throw std::invalid_argument("local_candidates: frame dimension mismatch");

    // Bounding box of the region, inflated where degenerate.
    std::vector<double> lo(center.begin(), center.end());
    std::vector<double> hi(center.begin(), center.end());
    for (std::size_t i = 0; i < region.size(); ++i) {
        auto r = region[i];
        for (std::size_t l = 0; l < p; ++l) {
            lo[l] = std::min(lo[l], r[l]);
            hi[l] = std::max(hi[l], r[l]);
        }
    }
    for (std::size_t l = 0; l < p; ++l) {
        if (hi[l] - lo[l] < opts.delta) {
            lo[l] = framed ? lo[l] - opts.delta : std::max(0.0, lo[l] - opts.delta);
            hi[l] = framed ? hi[l] + opts.delta : std::min(1.0, hi[l] + opts.delta);
        }
    }

    LatticeRule shifted = stream.rule();
    shifted.shift.resize(p);
    for (auto& s : shifted.shift) s = rng.uniform();
    PointSet raw = shifted.points();

    CandidatePool pool;
    pool.points = PointSet(p);
    pool.points.reserve(opts.m + opts.n_combos);
    ProximityIndex pool_index;
    Point x(p);
    for (std::size_t i = 0; i < raw.size() && pool.size() < opts.m; ++i) {
        auto y = raw[i];
        for (std::size_t l = 0; l < p; ++l) y[l] = lo[l] + y[l] * (hi[l] - lo[l]);
        if (framed) {
            bool inside = true;
            for (std::size_t r = 0; r < p && inside; ++r) {
                double acc = 0.0;
                for (std::size_t c = 0; c <= r; ++c) acc += opts.frame(r, c) * y[c];
                x[r] = acc;
                inside = acc >= 0.0 && acc <= 1.0;
            }
            if (!inside) continue;
        } else {
            std::copy(y.begin(), y.end(), x.begin());
        }
        if (existing.near(x, opts.delta)) continue;
        pool.points.push_back(x);
        pool.provenance.push_back(Provenance::local_fill);
        pool_index.insert(x);
    }

    if (!adjacent.empty()) {
        for (std::size_t t = 0; t < opts.n_combos; ++t) {
            double w = rng.uniform(-0.5, 1.5);
            Point c = linear_combination(unit_center, adjacent[t % adjacent.size()], w);
            if (existing.near(c, opts.delta) || pool_index.near(c, opts.delta)) continue;
            pool.points.push_back(c);
            pool.provenance.push_back(Provenance::linear_combination);
            pool_index.insert(c);
        }
    }
    return pool;
}

}  // namespace med
