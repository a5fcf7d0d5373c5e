#include <doctest.h>

#include <cmath>
#include <numbers>

#include "med/density.hpp"
#include "med/math.hpp"

using namespace med;

TEST_CASE("banana log density at known points") {
    // log f = -x1^2/200 - (x2 + 0.03 x1^2 - 3)^2 / 2
    CHECK(BananaDensity::log_density_original(0.0, 3.0) == doctest::Approx(0.0));
    CHECK(BananaDensity::log_density_original(10.0, 0.0) == doctest::Approx(-0.5));
    CHECK(BananaDensity::log_density_original(0.0, 0.0) == doctest::Approx(-4.5));
    auto b = make_banana();
    CHECK(b->dim() == 2);
    // Unit point mapping to (0, 3): x1 = 0.5, x2 = 28/35.
    Point u{0.5, 28.0 / 35.0};
    CHECK(b->log_density_unit(u) == doctest::Approx(0.0).epsilon(1e-12));
    auto x = b->to_original(u);
    CHECK(x[0] == doctest::Approx(0.0));
    CHECK(x[1] == doctest::Approx(3.0));
}

TEST_CASE("banana truth transform sends the mode to the center") {
    auto b = make_banana();
    auto t = b->truth_transform(Point{0.5, 28.0 / 35.0});
    CHECK(t[0] == doctest::Approx(0.5));
    CHECK(t[1] == doctest::Approx(0.5));
}

TEST_CASE("ar1 precision matrix matches the tridiagonal closed form") {
    const double rho = 0.9, sigma = 0.125;
    auto m = make_ar1_normal(4, rho, sigma);
    Eigen::MatrixXd prec = m->covariance().inverse();
    const double c = 1.0 / (sigma * sigma * (1.0 - rho * rho));
    CHECK(prec(0, 1) == doctest::Approx(-rho * c).epsilon(1e-9));
    CHECK(prec(0, 1) == doctest::Approx(-0.9 / (sigma * sigma * 0.19)).epsilon(1e-9));
    CHECK(prec(0, 0) == doctest::Approx(c).epsilon(1e-9));
    CHECK(prec(1, 1) == doctest::Approx((1.0 + rho * rho) * c).epsilon(1e-9));
    CHECK(std::fabs(prec(0, 2)) < 1e-6 * c);

    // Quadratic form through the tridiagonal precision.
    Point x{0.6, 0.45, 0.52, 0.3};
    double q = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            double pij = 0.0;
            if (i == j) pij = (i == 0 || i == 3) ? c : (1 + rho * rho) * c;
            if (std::abs(i - j) == 1) pij = -rho * c;
            q += (x[i] - 0.5) * pij * (x[j] - 0.5);
        }
    CHECK(m->log_density_unit(x) == doctest::Approx(-0.5 * q).epsilon(1e-10));
}

TEST_CASE("ar1 rejects rho >= 1") {
    CHECK_THROWS_AS(make_ar1_normal(3, 1.0, 0.125), NumericError);
}

TEST_CASE("uniform density is flat with identity truth transform") {
    auto u = make_uniform(3);
    CHECK(u->log_density_unit(Point{0.1, 0.2, 0.3}) == 0.0);
    auto t = u->truth_transform(Point{0.1, 0.2, 0.3});
    CHECK(t[2] == 0.3);
}

TEST_CASE("floor_logf clamps and rejects NaN") {
    CHECK(floor_logf(-INFINITY) == kLogFloor);
    CHECK(floor_logf(-1e300) == kLogFloor);
    CHECK(floor_logf(-3.0) == -3.0);
    CHECK_THROWS_AS(floor_logf(std::nan("")), NumericError);
}

TEST_CASE("ledger records every evaluation and the digest is order sensitive") {
    auto u = make_uniform(2);
    EvaluationLedger a, b;
    PointSet pts(2);
    pts.push_back(Point{0.1, 0.2});
    pts.push_back(Point{0.3, 0.4});
    a.set_stage(1);
    eval_logf_batch(*u, pts, a);
    b.set_stage(1);
    eval_logf(*u, pts[1], b);
    eval_logf(*u, pts[0], b);
    CHECK(a.count() == 2);
    CHECK(b.count() == 2);
    CHECK(a.digest() != b.digest());

    EvaluationLedger c;
    c.set_stage(1);
    eval_logf_batch(*u, pts, c);
    CHECK(a.digest() == c.digest());
    CHECK(a.records()[0].stage == 1);
}

TEST_CASE("piecewise prior") {
    auto pr = make_piecewise_prior(0.0, 1.0, 2.0, 3.0);
    CHECK(pr.log_density(0.5) == doctest::Approx(pr.log_density(0.2)));
    CHECK(pr.log_density(-1.0) == doctest::Approx(pr.log_density(0.5) - 2.0));
    CHECK(pr.log_density(2.0) == doctest::Approx(pr.log_density(0.5) - 3.0));
    CHECK_THROWS(make_piecewise_prior(1.0, 0.0, 1.0, 1.0));
    CHECK_THROWS(make_piecewise_prior(0.0, 1.0, -1.0, 1.0));
    std::vector<PiecewisePrior> f{pr, pr};
    CHECK(product_prior_log_density(f, Point{-1.0, 2.0}) ==
          doctest::Approx(pr.log_density(-1.0) + pr.log_density(2.0)));
}

TEST_CASE("normal cdf") {
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
    CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975));
}
