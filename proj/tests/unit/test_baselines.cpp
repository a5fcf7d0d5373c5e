#include <doctest.h>

#include <cmath>
#include <numeric>

#include "med/baselines.hpp"

using namespace med;

TEST_CASE("a vanishing proposal accepts every step") {
    ChainSpec spec;
    spec.start = {0.5, 0.5};
    spec.length = 500;
    spec.scale = 1e-12 * Eigen::MatrixXd::Identity(2, 2);
    spec.adapt = false;
    auto c = metropolis([](std::span<const double> x) { return -20.0 * x[0] - 3.0 * x[1]; }, spec);
    CHECK(c.acceptance_rate() > 0.99);
    CHECK(c.samples.size() == 500);
}

TEST_CASE("a flat target accepts every in-cube proposal") {
    ChainSpec spec;
    spec.start = {0.5, 0.5, 0.5};
    spec.length = 2000;
    spec.scale = 0.3 * Eigen::MatrixXd::Identity(3, 3);
    spec.adapt = false;
    spec.seed = 8;
    auto c = metropolis([](std::span<const double>) { return 0.0; }, spec);
    CHECK(c.accepted == c.evaluations - 1);
    CHECK(c.accepted < c.steps);
    for (std::size_t i = 0; i < c.samples.size(); ++i)
        for (std::size_t l = 0; l < 3; ++l) {
            CHECK(c.samples[i][l] >= 0.0);
            CHECK(c.samples[i][l] <= 1.0);
        }
}

TEST_CASE("adaptive Metropolis on the banana tunes acceptance and logs every call") {
    auto b = make_banana();
    EvaluationLedger ledger;
    ChainSpec spec;
    spec.start = {0.5, 0.5};
    spec.length = 5000;
    spec.seed = 3;
    auto c = adaptive_metropolis(*b, ledger, spec);
    CHECK(c.acceptance_rate() > 0.1);
    CHECK(c.acceptance_rate() < 0.5);
    CHECK(ledger.count() == c.evaluations);

    EvaluationLedger capped;
    spec.max_evaluations = 300;
    auto d = adaptive_metropolis(*b, capped, spec);
    CHECK(capped.count() == 300);
    CHECK(d.evaluations == 300);
}

TEST_CASE("softmax weights and chain lengths") {
    std::vector<double> lf{0.0, std::log(0.5), std::log(0.5)};
    auto w = softmax_weights(lf);
    CHECK(w[0] == doctest::Approx(0.5));
    CHECK(w[1] == doctest::Approx(0.25));
    std::vector<double> shifted{-700.0, -700.0 + std::log(0.5), -700.0 + std::log(0.5)};
    auto w2 = softmax_weights(shifted);
    for (std::size_t i = 0; i < 3; ++i) CHECK(w2[i] == doctest::Approx(w[i]).epsilon(1e-12));

    CHECK(chain_lengths(w, 100) == std::vector<std::size_t>{50, 25, 25});
    std::vector<double> thirds(3, 1.0 / 3.0);
    CHECK(chain_lengths(thirds, 91) == std::vector<std::size_t>{31, 31, 31});
    std::vector<double> lf5{-1.0, -0.2, -3.0, -0.7, -0.1};
    auto l5 = chain_lengths(softmax_weights(lf5), 1000);
    auto total = std::accumulate(l5.begin(), l5.end(), std::size_t{0});
    CHECK(total >= 1000);
    CHECK(total <= 1005);
}

TEST_CASE("follow-up chains sample the surrogate density") {
    Design d;
    d.points = PointSet(1);
    for (int i = 0; i < 30; ++i) {
        double x = (i + 0.5) / 30.0;
        d.points.push_back(Point{x});
        d.logf.push_back(-(x - 0.5) * (x - 0.5) / (2 * 0.1 * 0.1));
    }
    auto sur = SurrogateModel::fit(d.points, d.logf, default_theta(d.points));
    auto res = followup_mcmc(d, sur, 40000, 5);
    CHECK(res.samples.size() >= 40000);
    CHECK(res.samples.size() <= 40030);
    CHECK(res.chain.size() == res.samples.size());

    const int B = 20;
    std::vector<double> hist(B, 0.0), ref(B, 0.0);
    for (std::size_t i = 0; i < res.samples.size(); ++i)
        hist[std::min(B - 1, static_cast<int>(res.samples[i][0] * B))] += 1.0 / res.samples.size();
    double z = 0.0;
    const int G = 100;
    for (int b = 0; b < B; ++b)
        for (int g = 0; g < G; ++g) {
            double x = (b + (g + 0.5) / G) / B;
            double v = std::exp(sur.predict(Point{x}));
            ref[b] += v;
            z += v;
        }
    double tv = 0.0;
    for (int b = 0; b < B; ++b) tv += 0.5 * std::fabs(hist[b] - ref[b] / z);
    CHECK(tv < 0.05);

    auto again = followup_mcmc(d, sur, 40000, 5);
    CHECK(again.samples.raw() == res.samples.raw());
}
