// Serial vs OpenMP kernel timings. Usage: med_bench [n] [p] [reps]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <vector>

#include <omp.h>

#include "med/kernels.hpp"
#include "med/rng.hpp"

namespace k = med::kernels;

namespace {

double time_ms(int reps, const std::function<void()>& f) {
    auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) f();
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / reps;
}

}  // namespace

int main(int argc, char** argv) {
    const std::size_t n = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 2000;
    const std::size_t p = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 10;
    const int reps = argc > 3 ? std::atoi(argv[3]) : 3;

    med::Rng rng(7);
    std::vector<double> pts(n * p), logf(n);
    for (auto& v : pts) v = rng.uniform();
    for (auto& v : logf) v = -10.0 * rng.uniform();

    std::printf("n=%zu p=%zu threads=%d\n", n, p, omp_get_max_threads());
    std::printf("%-18s %12s %12s %8s %s\n", "kernel", "serial_ms", "openmp_ms", "speedup", "equal");

    auto row = [&](const char* name, double ts, double tp, bool eq) {
        std::printf("%-18s %12.3f %12.3f %8.2f %s\n", name, ts, tp, ts / tp, eq ? "yes" : "NO");
    };

    for (double s : {2.0, 0.0, 0.7}) {
        k::MinPair a, b;
        double ts = time_ms(reps, [&] { a = k::serial::min_pair_term(pts.data(), logf.data(), n, p, 0.5, s); });
        double tp = time_ms(reps, [&] { b = k::parallel::min_pair_term(pts.data(), logf.data(), n, p, 0.5, s); });
        char name[32];
        std::snprintf(name, sizeof name, "min_pair s=%.1f", s);
        row(name, ts, tp, a.value == b.value && a.i == b.i && a.j == b.j);
    }
    {
        std::vector<double> a(n, 1e300), b(n, 1e300);
        double ts = time_ms(reps, [&] {
            k::serial::update_min_terms(pts.data(), logf.data(), n, pts.data(), logf.data(), n / 2, p, 0.5, 2.0, a.data());
        });
        double tp = time_ms(reps, [&] {
            k::parallel::update_min_terms(pts.data(), logf.data(), n, pts.data(), logf.data(), n / 2, p, 0.5, 2.0, b.data());
        });
        row("update_min_terms", ts, tp, a == b);
    }
    {
        double a = 0, b = 0;
        double ts = time_ms(reps, [&] { a = k::serial::cl2_cross_sum(pts.data(), n, p); });
        double tp = time_ms(reps, [&] { b = k::parallel::cl2_cross_sum(pts.data(), n, p); });
        row("cl2_cross_sum", ts, tp, a == b);
    }
    return 0;
}
