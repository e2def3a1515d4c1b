#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <optional>
#include <string>

namespace eload {

/// First two posterior moments of eta on the long dataset; the information
/// carried over to the short dataset's prior.
struct PosteriorSummary {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  std::string dataset_id;
  long iterations = 0;
  int d_alpha = 0;
  int d_beta = 0;
  /// Fourier phase origin of the long dataset's design; a short dataset
  /// must share it for the coefficients to be comparable.
  std::optional<std::chrono::year_month_day> origin;

  [[nodiscard]] Eigen::Index dim() const { return mu.size(); }
};

}  // namespace eload
