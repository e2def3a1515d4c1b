#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eload/calendar.hpp"
#include "eload/inference.hpp"

namespace eload {

struct ForecastResult {
  VectorXd point;                         ///< predictive mean per horizon day, MW
  std::optional<MatrixXd> predictive_draws;  ///< H x S, noise included
  std::vector<Date> dates;

  [[nodiscard]] Eigen::Index horizon() const { return point.size(); }
};

struct PredictOptions {
  /// When set, one noisy draw per kept chain draw is produced with this seed.
  std::optional<std::uint64_t> draw_seed;
};

/// Posterior predictive mean: the average of f(eta) over the kept draws.
ForecastResult predict(const Chain& chain, const DesignSet& future,
                       const PredictOptions& options = {});

/// sqrt(mean((f_true - y_hat)^2)).
double criterion(const VectorXd& f_true, const VectorXd& y_hat);
double rmse(const VectorXd& y, const VectorXd& y_hat);
/// 100 * mean(|y - y_hat| / |y|); throws on a zero observation.
double mape(const VectorXd& y, const VectorXd& y_hat);

/// Empirical quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double p);

/// `date,point[,q05,q95]`.
void save_forecast(const std::string& path, const ForecastResult& forecast);

}  // namespace eload
