#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "eload/error.hpp"
#include "eload/forecast.hpp"
#include "support.hpp"

using namespace eload;

namespace {

Chain constant_chain(const testing::SmallProblem& p, const std::vector<Eta>& etas, double sigma2 = 1.0) {
  Chain c;
  c.prior = "noninfo";
  c.spec = p.design.spec;
  for (const auto& e : etas) c.draws.push_back({ThetaState{e, sigma2}, std::nullopt});
  return c;
}

}  // namespace

TEST_CASE("predict: identical draws reproduce f") {
  const auto p = testing::small_problem(60);
  const auto r = predict(constant_chain(p, {p.truth, p.truth, p.truth}), p.design);
  CHECK(r.point == eval_f(p.truth, p.design));
  CHECK(r.horizon() == 60);
  CHECK(r.dates == p.design.dates);
  CHECK_FALSE(r.predictive_draws.has_value());
}

TEST_CASE("predict: two draws average") {
  const auto p = testing::small_problem(60);
  Eta other = p.truth;
  other.alpha(2) += 10;
  other.u -= 2;
  const auto r = predict(constant_chain(p, {p.truth, other}), p.design);
  const VectorXd expected = 0.5 * (eval_f(p.truth, p.design) + eval_f(other, p.design));
  CHECK((r.point - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("predict is linear in the empirical measure of the chain") {
  Rng rng(4);
  const auto p = testing::small_problem(40);
  std::vector<Eta> first, second;
  for (int i = 0; i < 3; ++i) {
    Eta e = p.truth;
    e.alpha += testing::random_vector(3, rng);
    first.push_back(e);
  }
  for (int i = 0; i < 5; ++i) {
    Eta e = p.truth;
    e.gamma += testing::uniform(-1, 1, rng);
    second.push_back(e);
  }
  auto both = first;
  both.insert(both.end(), second.begin(), second.end());
  const VectorXd a = predict(constant_chain(p, first), p.design).point;
  const VectorXd b = predict(constant_chain(p, second), p.design).point;
  const VectorXd ab = predict(constant_chain(p, both), p.design).point;
  CHECK((ab - (3.0 * a + 5.0 * b) / 8.0).cwiseAbs().maxCoeff() < 1e-12 * ab.cwiseAbs().maxCoeff());
}

TEST_CASE("predictive draws add noise around the point forecast") {
  Rng rng(6);
  const auto p = testing::small_problem(30);
  std::vector<Eta> etas;
  for (int i = 0; i < 400; ++i) {
    Eta e = p.truth;
    e.alpha(2) += 0.3 * standard_normal(rng);
    etas.push_back(e);
  }
  const auto chain = constant_chain(p, etas, 4.0);
  PredictOptions opt;
  opt.draw_seed = 12;
  const auto r = predict(chain, p.design, opt);
  REQUIRE(r.predictive_draws.has_value());
  CHECK(r.predictive_draws->rows() == 30);
  CHECK(r.predictive_draws->cols() == 400);
  MatrixXd fs(30, 400);
  for (int s = 0; s < 400; ++s) fs.col(s) = eval_f(etas[static_cast<std::size_t>(s)], p.design);
  for (Eigen::Index t = 0; t < 30; ++t) {
    const auto var = [](const auto& row) {
      const double m = row.mean();
      return (row.array() - m).square().sum() / static_cast<double>(row.size() - 1);
    };
    CHECK(var(r.predictive_draws->row(t)) >= var(fs.row(t)));
  }
  const auto again = predict(chain, p.design, opt);
  CHECK(*again.predictive_draws == *r.predictive_draws);
}

TEST_CASE("predict rejects a design of another model") {
  const auto p = testing::small_problem(30);
  auto chain = constant_chain(p, {p.truth});
  auto design = p.design;
  design.A = MatrixXd::Ones(30, 4);
  CHECK_THROWS_AS(predict(chain, design), ValidationError);
  chain.draws.clear();
  CHECK_THROWS_AS(predict(chain, p.design), ValidationError);
}

TEST_CASE("criterion") {
  const VectorXd f = (VectorXd(3) << 1, 2, 3).finished();
  CHECK(criterion(f, f) == 0.0);
  CHECK(criterion(f, (f.array() - 2.5).matrix()) == doctest::Approx(2.5));
  CHECK(criterion((VectorXd(2) << 3, 4).finished(), VectorXd::Zero(2)) == doctest::Approx(std::sqrt(12.5)));
  CHECK(criterion((VectorXd(2) << 3, 4).finished(), VectorXd::Zero(2)) == doctest::Approx(3.5355).epsilon(1e-4));
  CHECK_THROWS_AS(criterion(f, VectorXd::Zero(2)), ValidationError);
}

TEST_CASE("rmse and mape") {
  const VectorXd y = (VectorXd(2) << 100, 100).finished();
  CHECK(rmse(y, y) == 0.0);
  CHECK(mape(y, y) == 0.0);
  const VectorXd yh = (VectorXd(2) << 90, 110).finished();
  CHECK(rmse(y, yh) == doctest::Approx(10.0));
  CHECK(mape(y, yh) == doctest::Approx(10.0));
  const VectorXd z = VectorXd::Zero(1);
  CHECK_THROWS_AS(mape(z, VectorXd::Ones(1)), ValidationError);
  CHECK(rmse(z, VectorXd::Ones(1)) == 1.0);
}

TEST_CASE("criterion and rmse agree") {
  Rng rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const VectorXd a = testing::random_vector(50, rng), b = testing::random_vector(50, rng);
    CHECK(criterion(a, b) == rmse(a, b));
  }
}

TEST_CASE("quantile interpolates order statistics") {
  CHECK(quantile({3, 1, 2}, 0.5) == 2.0);
  CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
  CHECK(quantile({1, 2}, 0.0) == 1.0);
  CHECK(quantile({1, 2}, 1.0) == 2.0);
  CHECK_THROWS_AS(quantile({}, 0.5), ValidationError);
  CHECK_THROWS_AS(quantile({1.0}, 1.5), ValidationError);
}

TEST_CASE("forecast files") {
  const auto p = testing::small_problem(10);
  const auto chain = constant_chain(p, {p.truth, p.truth});
  PredictOptions opt;
  opt.draw_seed = 1;
  const auto path = (std::filesystem::temp_directory_path() / "eload_forecast.csv").string();
  save_forecast(path, predict(chain, p.design, opt));
  std::ifstream in(path);
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(header == "date,point,q05,q95");
  CHECK(first.rfind(format_date(p.design.dates[0]) + ",", 0) == 0);
  std::filesystem::remove(path);
}
