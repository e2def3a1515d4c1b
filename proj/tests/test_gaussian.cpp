#include <doctest.h>

#include "eload/error.hpp"
#include "eload/gaussian.hpp"
#include "support.hpp"

using namespace eload;
using testing::random_spd;
using testing::random_vector;

namespace {

GaussianSpec scalar(double mean, double var) {
  return {VectorXd::Constant(1, mean), MatrixXd::Constant(1, 1, var)};
}

}  // namespace

TEST_CASE("combine: equal precision averages the means") {
  const auto g = combine(scalar(0, 1), scalar(2, 1));
  CHECK(g.mean(0) == doctest::Approx(1.0));
  CHECK(g.cov(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("combine: a Gaussian with itself halves the covariance") {
  Rng rng(3);
  const GaussianSpec g{random_vector(4, rng), random_spd(4, rng)};
  const auto c = combine(g, g);
  CHECK((c.mean - g.mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((c.cov - g.cov / 2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("combine: diagonal example") {
  GaussianSpec g1{VectorXd::Zero(2), Eigen::Vector2d(1, 4).asDiagonal()};
  GaussianSpec g2{VectorXd::Constant(2, 5), Eigen::Vector2d(4, 1).asDiagonal()};
  const auto c = combine(g1, g2);
  // Oracle: per coordinate, precision p = 1/s1 + 1/s2, mean (m1/s1 + m2/s2)/p.
  for (int i = 0; i < 2; ++i) {
    const double s1 = g1.cov(i, i), s2 = g2.cov(i, i);
    const double p = 1 / s1 + 1 / s2;
    CHECK(c.cov(i, i) == doctest::Approx(1 / p));
    CHECK(c.mean(i) == doctest::Approx((g1.mean(i) / s1 + g2.mean(i) / s2) / p));
  }
  CHECK(c.mean(0) == doctest::Approx(1.0));
  CHECK(c.mean(1) == doctest::Approx(4.0));
  CHECK(c.cov(0, 0) == doctest::Approx(0.8));
  CHECK(c.cov(1, 1) == doctest::Approx(0.8));
  CHECK(std::abs(c.cov(0, 1)) < 1e-15);
}

TEST_CASE("combine: rejects mismatched or non-SPD inputs") {
  Rng rng(1);
  const GaussianSpec g2{VectorXd::Zero(2), MatrixXd::Identity(2, 2)};
  CHECK_THROWS_AS(combine(scalar(0, 1), g2), ValidationError);
  GaussianSpec bad{VectorXd::Zero(2), MatrixXd::Identity(2, 2)};
  bad.cov(1, 1) = -1.0;
  CHECK_THROWS_AS(combine(bad, g2), NumericalError);
}

TEST_CASE("combine is commutative and associative") {
  Rng rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    const auto d = 1 + rep % 6;
    const GaussianSpec a{random_vector(d, rng, 3), random_spd(d, rng)};
    const GaussianSpec b{random_vector(d, rng, 3), random_spd(d, rng)};
    const GaussianSpec c{random_vector(d, rng, 3), random_spd(d, rng)};
    const auto ab = combine(a, b), ba = combine(b, a);
    CHECK((ab.mean - ba.mean).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((ab.cov - ba.cov).cwiseAbs().maxCoeff() <= 1e-8);
    const auto left = combine(combine(a, b), c), right = combine(a, combine(b, c));
    CHECK((left.mean - right.mean).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((left.cov - right.cov).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("combine: product of densities is proportional to the combined density") {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const auto d = 1 + rep % 4;
    const GaussianSpec a{random_vector(d, rng), random_spd(d, rng)};
    const GaussianSpec b{random_vector(d, rng), random_spd(d, rng)};
    const auto c = combine(a, b);
    const auto gap = [&](const VectorXd& x) {
      return a.log_density(x) + b.log_density(x) - c.log_density(x);
    };
    const double ref = gap(VectorXd::Zero(d));
    for (int i = 0; i < 25; ++i) CHECK(gap(random_vector(d, rng, 2)) == doctest::Approx(ref).epsilon(1e-8));
  }
}

TEST_CASE("log_density matches the scalar formula") {
  const auto g = scalar(1.0, 4.0);
  const double x = 2.5;
  const double expected = -0.5 * std::log(2 * std::numbers::pi * 4.0) - (x - 1) * (x - 1) / 8.0;
  CHECK(g.log_density(VectorXd::Constant(1, x)) == doctest::Approx(expected));
}

TEST_CASE("conditional: zero cross precision ignores x2") {
  PrecisionBlocks b{MatrixXd::Constant(1, 1, 4.0), MatrixXd::Zero(1, 1), MatrixXd::Constant(1, 1, 1.0)};
  for (double x2 : {-3.0, 0.0, 7.0}) {
    const auto g = conditional(b, VectorXd::Constant(1, 2.0), VectorXd::Zero(1), VectorXd::Constant(1, x2));
    CHECK(g.mean(0) == doctest::Approx(2.0));
    CHECK(g.cov(0, 0) == doctest::Approx(0.25));
  }
}

TEST_CASE("conditional: centered x2 returns mu1") {
  Rng rng(8);
  const MatrixXd P = random_spd(5, rng);
  PrecisionBlocks b{P.topLeftCorner(2, 2), P.topRightCorner(2, 3), P.bottomRightCorner(3, 3)};
  const VectorXd mu1 = random_vector(2, rng), mu2 = random_vector(3, rng);
  const auto g = conditional(b, mu1, mu2, mu2);
  CHECK((g.mean - mu1).cwiseAbs().maxCoeff() == 0.0);
}

namespace {

// Mean and variance of X1 | X2 = x2 from the unnormalized joint density on a
// fine grid over x1.
std::pair<double, double> brute_conditional(double R, double S, double T, double mu1, double mu2, double x2) {
  const auto joint = [&](double x1) {
    const double a = x1 - mu1, b = x2 - mu2;
    return std::exp(-0.5 * (R * a * a + 2 * S * a * b + T * b * b));
  };
  const double lo = mu1 - 40, hi = mu1 + 40;
  const double z = testing::simpson(joint, lo, hi, 80000);
  const double m = testing::simpson([&](double x) { return x * joint(x); }, lo, hi, 80000) / z;
  const double v = testing::simpson([&](double x) { return (x - m) * (x - m) * joint(x); }, lo, hi, 80000) / z;
  return {m, v};
}

}  // namespace

TEST_CASE("conditional: scalar example against the discretized joint") {
  PrecisionBlocks b{MatrixXd::Constant(1, 1, 2.0), MatrixXd::Constant(1, 1, 1.0), MatrixXd::Constant(1, 1, 1.0)};
  const auto g = conditional(b, VectorXd::Zero(1), VectorXd::Zero(1), VectorXd::Constant(1, 1.0));
  const auto [m, v] = brute_conditional(2, 1, 1, 0, 0, 1);
  CHECK(g.mean(0) == doctest::Approx(m).epsilon(1e-6));
  CHECK(g.cov(0, 0) == doctest::Approx(v).epsilon(1e-6));
  CHECK(g.mean(0) == doctest::Approx(-0.5));
  CHECK(g.cov(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("conditional agrees with brute force on random 2-D joints") {
  Rng rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    const MatrixXd P = random_spd(2, rng);
    const double mu1 = testing::uniform(-3, 3, rng), mu2 = testing::uniform(-3, 3, rng);
    const double x2 = testing::uniform(-3, 3, rng);
    PrecisionBlocks b{P.topLeftCorner(1, 1), P.topRightCorner(1, 1), P.bottomRightCorner(1, 1)};
    const auto g = conditional(b, VectorXd::Constant(1, mu1), VectorXd::Constant(1, mu2), VectorXd::Constant(1, x2));
    const auto [m, v] = brute_conditional(P(0, 0), P(0, 1), P(1, 1), mu1, mu2, x2);
    CHECK(std::abs(g.mean(0) - m) < 1e-4);
    CHECK(std::abs(g.cov(0, 0) - v) < 1e-4);
  }
}

TEST_CASE("conditional: singular R is a numerical error") {
  PrecisionBlocks b{MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 1), MatrixXd::Identity(1, 1)};
  CHECK_THROWS_AS(conditional(b, VectorXd::Zero(2), VectorXd::Zero(1), VectorXd::Zero(1)), NumericalError);
}

TEST_CASE("regression_posterior: identity design") {
  const VectorXd y = (VectorXd(3) << 1, -2, 5).finished();
  const auto g = regression_posterior(MatrixXd::Identity(3, 3), VectorXd::Zero(3), y, 2.0);
  CHECK((g.mean - y).norm() < 1e-12);
  CHECK((g.cov - 2.0 * MatrixXd::Identity(3, 3)).norm() < 1e-12);
}

TEST_CASE("regression_posterior: two observations of one mean") {
  const MatrixXd M = MatrixXd::Ones(2, 1);
  const VectorXd y = (VectorXd(2) << 1, 3).finished();
  const auto g = regression_posterior(M, VectorXd::Zero(2), y, 1.0);
  // Oracle: OLS mean of (1, 3) and variance sigma2 / n.
  CHECK(g.mean(0) == doctest::Approx((1.0 + 3.0) / 2));
  CHECK(g.cov(0, 0) == doctest::Approx(1.0 / 2));
}

TEST_CASE("regression_posterior: Z = y gives a zero mean") {
  Rng rng(2);
  const MatrixXd M = testing::random_matrix(10, 3, rng);
  const VectorXd y = random_vector(10, rng);
  const auto g = regression_posterior(M, y, y, 0.7);
  CHECK(g.mean.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("regression_posterior matches normal equations solved independently") {
  Rng rng(4);
  const MatrixXd M = testing::random_matrix(30, 4, rng);
  const VectorXd Z = random_vector(30, rng), y = random_vector(30, rng);
  const auto g = regression_posterior(M, Z, y, 1.5);
  const VectorXd ols = M.colPivHouseholderQr().solve(y - Z);
  CHECK((g.mean - ols).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((g.cov - 1.5 * (M.transpose() * M).inverse()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("regression_posterior: rank-deficient design") {
  MatrixXd M(4, 2);
  M << 1, 2, 2, 4, 3, 6, 4, 8;
  CHECK_THROWS_AS(regression_posterior(M, VectorXd::Zero(4), VectorXd::Ones(4), 1.0), NumericalError);
  CHECK_THROWS_AS(regression_posterior(MatrixXd::Ones(2, 2), VectorXd::Zero(2), VectorXd::Ones(2), 1.0),
                  NumericalError);
}

TEST_CASE("spd_factor: jitter rescues a singular PSD matrix, not an indefinite one") {
  MatrixXd psd(2, 2);
  psd << 1, 1, 1, 1;
  CHECK_NOTHROW(spd_factor(psd));
  MatrixXd indefinite(2, 2);
  indefinite << 1, 0, 0, -1;
  CHECK_THROWS_AS(spd_factor(indefinite), NumericalError);
}

TEST_CASE("sample: degenerate covariance returns the mean") {
  Rng rng(9);
  GaussianSpec g{(VectorXd(2) << 0.2, 0.3).finished(), 1e-12 * MatrixXd::Identity(2, 2)};
  const auto x = sample(g, TruncationRegion::positive_l1_ball(2), rng);
  CHECK((x.value - g.mean).norm() < 1e-4);
  CHECK((sample(g, rng) - g.mean).norm() < 1e-4);
}

TEST_CASE("sample: untruncated moments within 3 standard errors") {
  Rng rng(13);
  const int n = 100000;
  GaussianSpec g{(VectorXd(3) << 1, -2, 0.5).finished(), MatrixXd()};
  g.cov = random_spd(3, rng);
  MatrixXd draws(n, 3);
  for (int i = 0; i < n; ++i) draws.row(i) = sample(g, rng).transpose();
  const auto m = testing::moments(draws);
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(m.mean(i) - g.mean(i)) < 3 * std::sqrt(g.cov(i, i) / n));
    for (int j = 0; j < 3; ++j) {
      // Var of the sample covariance: (s_ij^2 + s_ii s_jj) / n.
      const double se = std::sqrt((g.cov(i, j) * g.cov(i, j) + g.cov(i, i) * g.cov(j, j)) / n);
      CHECK(std::abs(m.cov(i, j) - g.cov(i, j)) < 3 * se);
    }
  }
}

TEST_CASE("sample: 1-D truncation to [0, 1] matches numerical integration") {
  const double z = testing::simpson(testing::normal_pdf, 0, 1);
  const double oracle = testing::simpson([](double x) { return x * testing::normal_pdf(x); }, 0, 1) / z;
  CHECK(oracle == doctest::Approx(0.459862).epsilon(1e-5));
  Rng rng(17);
  const auto g = scalar(0, 1);
  const auto region = TruncationRegion::positive_l1_ball(1);
  double sum = 0.0;
  int outside = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto x = sample(g, region, rng);
    outside += region.contains(x.value) ? 0 : 1;
    sum += x.value(0);
  }
  CHECK(outside == 0);
  CHECK(std::abs(sum / n - oracle) < 0.005);
}

TEST_CASE("sample: region of negligible mass falls back and stays inside") {
  Rng rng(19);
  GaussianSpec g{VectorXd::Constant(3, -6.0), 0.25 * MatrixXd::Identity(3, 3)};
  const auto region = TruncationRegion::positive_l1_ball(3);
  int fallbacks = 0;
  for (int i = 0; i < 200; ++i) {
    const auto x = sample(g, region, rng);
    CHECK(region.contains(x.value));
    fallbacks += x.used_fallback ? 1 : 0;
  }
  CHECK(fallbacks == 200);
}

TEST_CASE("sample: fallback chain targets the truncated law") {
  // Bivariate N(0, I) on the simplex corner: x1 has the law of the
  // marginal of the truncated density, computed on a grid.
  Rng rng(23);
  GaussianSpec g{VectorXd::Zero(2), MatrixXd::Identity(2, 2)};
  const auto region = TruncationRegion::positive_l1_ball(2);
  SampleOptions opt;
  opt.max_attempts = 0;
  opt.gibbs_sweeps = 1;
  VectorXd state = VectorXd::Constant(2, 0.25);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    opt.start = state;
    state = sample(g, region, rng, opt).value;
    sum += state(0);
  }
  const auto marginal = [](double x) {
    return testing::normal_pdf(x) * testing::simpson(testing::normal_pdf, 0, 1 - x, 200);
  };
  const double z = testing::simpson(marginal, 0, 1, 2000);
  const double oracle = testing::simpson([&](double x) { return x * marginal(x); }, 0, 1, 2000) / z;
  CHECK(std::abs(sum / n - oracle) < 0.005);
}

TEST_CASE("truncated_standard_normal covers tails and bounded intervals") {
  Rng rng(29);
  const int n = 50000;
  // Upper tail [3, inf): mean phi(3) / (1 - Phi(3)).
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = truncated_standard_normal(3.0, std::numeric_limits<double>::infinity(), rng);
    REQUIRE(x >= 3.0);
    sum += x;
  }
  const double tail_mass = testing::simpson(testing::normal_pdf, 3, 40, 40000);
  CHECK(std::abs(sum / n - testing::normal_pdf(3) / tail_mass) < 0.01);
  // Interval far in the lower tail.
  sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = truncated_normal(1.0, 0.5, -4.0, -3.5, rng);
    REQUIRE(x >= -4.0);
    REQUIRE(x <= -3.5);
    sum += x;
  }
  const auto dens = [](double x) { return std::exp(-0.5 * ((x - 1) / 0.5) * ((x - 1) / 0.5)); };
  const double oracle = testing::simpson([&](double x) { return x * dens(x); }, -4, -3.5) / testing::simpson(dens, -4, -3.5);
  CHECK(std::abs(sum / n - oracle) < 0.005);
}

TEST_CASE("sample is deterministic given the generator seed") {
  GaussianSpec g{VectorXd::Constant(2, 0.3), 0.5 * MatrixXd::Identity(2, 2)};
  Rng a(99), b(99);
  for (int i = 0; i < 100; ++i) {
    CHECK(sample(g, TruncationRegion::positive_l1_ball(2), a).value ==
          sample(g, TruncationRegion::positive_l1_ball(2), b).value);
  }
}
