#include "eload/forecast.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "eload/error.hpp"

namespace eload {

namespace {

void require_same_length(const VectorXd& a, const VectorXd& b, const char* what) {
  if (a.size() != b.size()) {
    throw ValidationError(fmt::format("{}: length mismatch ({} vs {})", what, a.size(), b.size()));
  }
  if (a.size() == 0) throw ValidationError(fmt::format("{}: empty input", what));
}

}  // namespace

ForecastResult predict(const Chain& chain, const DesignSet& future, const PredictOptions& options) {
  if (chain.draws.empty()) throw ValidationError("chain has no kept draws");
  if (future.A.cols() != chain.spec.d_alpha() || future.B.cols() != chain.spec.d_beta()) {
    throw ValidationError(fmt::format(
        "future design (d_alpha = {}, d_beta = {}) does not match the chain's model ({}, {})",
        future.A.cols(), future.B.cols(), chain.spec.d_alpha(), chain.spec.d_beta()));
  }
  const auto h = future.size();
  const auto s = static_cast<Eigen::Index>(chain.draws.size());
  ForecastResult out;
  out.dates = future.dates;
  out.point = VectorXd::Zero(h);
  std::optional<Rng> rng;
  if (options.draw_seed) {
    rng.emplace(*options.draw_seed);
    out.predictive_draws = MatrixXd(h, s);
  }
  for (Eigen::Index i = 0; i < s; ++i) {
    const auto& theta = chain.draws[static_cast<std::size_t>(i)].theta;
    const VectorXd f = eval_f(theta.eta, future);
    out.point += (f - out.point) / static_cast<double>(i + 1);
    if (rng) {
      const double sd = std::sqrt(theta.sigma2);
      auto col = out.predictive_draws->col(i);
      for (Eigen::Index t = 0; t < h; ++t) col(t) = f(t) + sd * standard_normal(*rng);
    }
  }
  return out;
}

double criterion(const VectorXd& f_true, const VectorXd& y_hat) {
  require_same_length(f_true, y_hat, "criterion");
  return std::sqrt((f_true - y_hat).squaredNorm() / static_cast<double>(f_true.size()));
}

double rmse(const VectorXd& y, const VectorXd& y_hat) {
  require_same_length(y, y_hat, "rmse");
  return std::sqrt((y - y_hat).squaredNorm() / static_cast<double>(y.size()));
}

double mape(const VectorXd& y, const VectorXd& y_hat) {
  require_same_length(y, y_hat, "mape");
  if ((y.array() == 0.0).any()) throw ValidationError("mape is undefined for a zero observation");
  return 100.0 * ((y - y_hat).array().abs() / y.array().abs()).mean();
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw ValidationError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("quantile level outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

void save_forecast(const std::string& path, const ForecastResult& forecast) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path));
  const bool bands = forecast.predictive_draws.has_value();
  out << (bands ? "date,point,q05,q95\n" : "date,point\n");
  for (Eigen::Index t = 0; t < forecast.horizon(); ++t) {
    out << format_date(forecast.dates[static_cast<std::size_t>(t)]) << ',' << fmt::format("{}", forecast.point(t));
    if (bands) {
      const auto row = forecast.predictive_draws->row(t);
      std::vector<double> v;
      v.reserve(static_cast<std::size_t>(row.size()));
      for (Eigen::Index k = 0; k < row.size(); ++k) v.push_back(row(k));
      out << ',' << fmt::format("{}", quantile(v, 0.05)) << ',' << fmt::format("{}", quantile(v, 0.95));
    }
    out << '\n';
  }
  if (!out) throw IoError(fmt::format("write to '{}' failed", path));
}

}  // namespace eload
