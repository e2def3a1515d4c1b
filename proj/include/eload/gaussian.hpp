#pragma once

// Gaussian arithmetic used by every Gibbs block: the precision-weighted
// product of two Gaussians, conditioning from a partitioned precision,
// the flat-prior linear-regression posterior and (truncated) sampling.

#include <Eigen/Dense>

#include <optional>

#include "eload/rng.hpp"

namespace eload {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// A (mean, covariance) pair.
struct GaussianSpec {
  VectorXd mean;
  MatrixXd cov;

  [[nodiscard]] Eigen::Index dim() const { return mean.size(); }

  /// Throws ValidationError on shape/symmetry problems and NumericalError
  /// when the covariance has no Cholesky factor.
  void validate() const;

  [[nodiscard]] double log_density(const VectorXd& x) const;
};

enum class Truncation { none, positive_l1_ball };

/// Support restriction applied when sampling. positive_l1_ball is
/// {x >= 0 componentwise, sum(x) <= 1}.
struct TruncationRegion {
  Truncation kind = Truncation::none;
  Eigen::Index dimension = 0;

  [[nodiscard]] bool contains(const VectorXd& x) const;

  static TruncationRegion none(Eigen::Index d) { return {Truncation::none, d}; }
  static TruncationRegion positive_l1_ball(Eigen::Index d) {
    return {Truncation::positive_l1_ball, d};
  }
};

/// Symmetrizes and factorizes. When the plain factorization fails a jitter
/// of 1e-10 * trace / d is added to the diagonal once; a second failure
/// throws NumericalError.
Eigen::LLT<MatrixXd> spd_factor(const MatrixXd& m, const char* what = "matrix");

/// Inverse of an SPD matrix through spd_factor, symmetrized.
MatrixXd spd_inverse(const MatrixXd& m, const char* what = "matrix");

/// The conjugacy product: ([S1^-1 + S2^-1]^-1 (S1^-1 m1 + S2^-1 m2), [S1^-1 + S2^-1]^-1).
GaussianSpec combine(const GaussianSpec& g1, const GaussianSpec& g2);

/// Blocks of a joint precision matrix [[R, S], [S', T]] partitioned as
/// (X1, X2).
struct PrecisionBlocks {
  MatrixXd R;
  MatrixXd S;
  MatrixXd T;
};

/// Distribution of X1 given X2 = x2 for a joint Gaussian with mean
/// (mu1, mu2) and precision blocks (R, S, T):
/// N(mu1 - R^-1 S (x2 - mu2), R^-1).
GaussianSpec conditional(const PrecisionBlocks& blocks, const VectorXd& mu1,
                         const VectorXd& mu2, const VectorXd& x2);

/// Posterior of X under a flat prior when Y | X ~ N(Z + M X, sigma2 I):
/// N((M'M)^-1 M'(y - Z), sigma2 (M'M)^-1).
GaussianSpec regression_posterior(const MatrixXd& M, const VectorXd& Z,
                                  const VectorXd& y, double sigma2);

struct SampleOptions {
  /// Rejection attempts before switching to coordinate-wise Gibbs.
  int max_attempts = 1000;
  /// Gibbs sweeps in the fallback scheme.
  int gibbs_sweeps = 10;
  /// Starting point for the fallback sweeps. When it lies in the region the
  /// sweeps leave the truncated target invariant, which makes the fallback
  /// an exact MCMC kernel inside a Gibbs sampler.
  std::optional<VectorXd> start;
};

struct TruncatedDraw {
  VectorXd value;
  bool used_fallback = false;
  int attempts = 0;
};

/// Exact draw from N(mean, cov) (Cholesky based).
VectorXd sample(const GaussianSpec& g, Rng& rng);

/// Draw from N(mean, cov) restricted to the region: rejection from the
/// untruncated Gaussian, then coordinate-wise Gibbs with truncated 1-D
/// conditionals once the rejection budget is exhausted.
TruncatedDraw sample(const GaussianSpec& g, const TruncationRegion& region, Rng& rng,
                     const SampleOptions& options = {});

/// N(0, 1) restricted to [lo, hi]; infinite bounds allowed.
double truncated_standard_normal(double lo, double hi, Rng& rng);

/// N(mean, sd^2) restricted to [lo, hi].
double truncated_normal(double mean, double sd, double lo, double hi, Rng& rng);

}  // namespace eload
