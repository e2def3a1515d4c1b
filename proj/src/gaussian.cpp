#include "eload/gaussian.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "eload/error.hpp"

namespace eload {

namespace {

constexpr double kSymmetryTolerance = 1e-10;
constexpr double kJitterScale = 1e-10;

MatrixXd symmetrized(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

void require_dims(const GaussianSpec& g1, const GaussianSpec& g2) {
  if (g1.dim() != g2.dim()) {
    throw ValidationError(
        fmt::format("Gaussian dimension mismatch: {} vs {}", g1.dim(), g2.dim()));
  }
}

}  // namespace

void GaussianSpec::validate() const {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw ValidationError(fmt::format("covariance is {}x{} but mean has dimension {}",
                                      cov.rows(), cov.cols(), mean.size()));
  }
  if (!mean.allFinite() || !cov.allFinite()) {
    throw ValidationError("Gaussian with non-finite mean or covariance");
  }
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance * scale) {
    throw ValidationError("covariance is not symmetric");
  }
  spd_factor(cov, "covariance");
}

double GaussianSpec::log_density(const VectorXd& x) const {
  const auto llt = spd_factor(cov, "covariance");
  const VectorXd diff = x - mean;
  const VectorXd w = llt.matrixL().solve(diff);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const auto d = static_cast<double>(dim());
  return -0.5 * d * std::log(2.0 * std::numbers::pi) - 0.5 * log_det - 0.5 * w.squaredNorm();
}

bool TruncationRegion::contains(const VectorXd& x) const {
  if (x.size() != dimension) return false;
  if (kind == Truncation::none) return x.allFinite();
  return x.allFinite() && (x.array() >= 0.0).all() && x.sum() <= 1.0;
}

Eigen::LLT<MatrixXd> spd_factor(const MatrixXd& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw ValidationError(fmt::format("{} is not square ({}x{})", what, m.rows(), m.cols()));
  }
  MatrixXd sym = symmetrized(m);
  Eigen::LLT<MatrixXd> llt(sym);
  if (llt.info() == Eigen::Success) return llt;
  const double jitter = kJitterScale * sym.trace() / static_cast<double>(sym.rows());
  if (jitter > 0.0 && std::isfinite(jitter)) {
    sym.diagonal().array() += jitter;
    llt.compute(sym);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw NumericalError(fmt::format("{} is not symmetric positive definite", what));
}

MatrixXd spd_inverse(const MatrixXd& m, const char* what) {
  const auto llt = spd_factor(m, what);
  return symmetrized(llt.solve(MatrixXd::Identity(m.rows(), m.cols())));
}

GaussianSpec combine(const GaussianSpec& g1, const GaussianSpec& g2) {
  require_dims(g1, g2);
  const auto llt1 = spd_factor(g1.cov, "first covariance");
  const auto llt2 = spd_factor(g2.cov, "second covariance");
  const auto n = g1.dim();
  const MatrixXd eye = MatrixXd::Identity(n, n);
  const MatrixXd precision = symmetrized(llt1.solve(eye) + llt2.solve(eye));
  const VectorXd shift = llt1.solve(g1.mean) + llt2.solve(g2.mean);
  const auto llt = spd_factor(precision, "combined precision");
  return {llt.solve(shift), symmetrized(llt.solve(eye))};
}

GaussianSpec conditional(const PrecisionBlocks& blocks, const VectorXd& mu1,
                         const VectorXd& mu2, const VectorXd& x2) {
  const auto d1 = mu1.size();
  const auto d2 = mu2.size();
  if (blocks.R.rows() != d1 || blocks.R.cols() != d1 || blocks.S.rows() != d1 ||
      blocks.S.cols() != d2 || x2.size() != d2 ||
      (blocks.T.size() != 0 && (blocks.T.rows() != d2 || blocks.T.cols() != d2))) {
    throw ValidationError("inconsistent precision block dimensions");
  }
  Eigen::LLT<MatrixXd> llt;
  try {
    llt = spd_factor(blocks.R, "precision block R");
  } catch (const NumericalError&) {
    throw NumericalError("precision block R is singular");
  }
  const auto eye = MatrixXd::Identity(d1, d1);
  return {mu1 - llt.solve(blocks.S * (x2 - mu2)), symmetrized(llt.solve(eye))};
}

GaussianSpec regression_posterior(const MatrixXd& M, const VectorXd& Z, const VectorXd& y,
                                  double sigma2) {
  const auto n = M.rows();
  const auto d = M.cols();
  if (Z.size() != n || y.size() != n) {
    throw ValidationError(
        fmt::format("regression shapes: M is {}x{}, Z has {}, y has {}", n, d, Z.size(), y.size()));
  }
  if (d > n) {
    throw NumericalError(fmt::format("regression has fewer rows than columns ({} < {})", n, d));
  }
  if (!(sigma2 > 0.0)) throw ValidationError("sigma2 must be positive");
  const MatrixXd gram = M.transpose() * M;
  Eigen::LLT<MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-14) {
    throw NumericalError("rank-deficient design: M'M is singular");
  }
  const auto eye = MatrixXd::Identity(d, d);
  return {llt.solve(M.transpose() * (y - Z)), symmetrized(sigma2 * llt.solve(eye))};
}

VectorXd sample(const GaussianSpec& g, Rng& rng) {
  const auto llt = spd_factor(g.cov, "covariance");
  VectorXd z(g.dim());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = standard_normal(rng);
  return g.mean + llt.matrixL() * z;
}

namespace {

// Coordinate-wise Gibbs on {x >= 0, sum(x) <= 1}. x_i given the others is
// N(m_i - sum_{j != i} P_ij (x_j - m_j) / P_ii, 1 / P_ii) restricted to
// [0, 1 - sum_{j != i} x_j].
VectorXd gibbs_l1_ball(const GaussianSpec& g, VectorXd x, int sweeps, Rng& rng) {
  const MatrixXd precision = spd_inverse(g.cov, "covariance");
  const auto d = g.dim();
  double total = x.sum();
  for (int s = 0; s < sweeps; ++s) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const double pii = precision(i, i);
      const double cross = precision.row(i).dot(x - g.mean) - pii * (x(i) - g.mean(i));
      const double m = g.mean(i) - cross / pii;
      const double others = total - x(i);
      const double upper = std::max(0.0, 1.0 - others);
      const double xi = truncated_normal(m, 1.0 / std::sqrt(pii), 0.0, upper, rng);
      total = others + xi;
      x(i) = xi;
    }
  }
  return x;
}

}  // namespace

TruncatedDraw sample(const GaussianSpec& g, const TruncationRegion& region, Rng& rng,
                     const SampleOptions& options) {
  if (region.dimension != g.dim()) {
    throw ValidationError(fmt::format("truncation region dimension {} does not match {}",
                                      region.dimension, g.dim()));
  }
  if (region.kind == Truncation::none) return {sample(g, rng), false, 1};

  const auto llt = spd_factor(g.cov, "covariance");
  const MatrixXd L = llt.matrixL();
  VectorXd z(g.dim());
  for (int attempt = 1; attempt <= options.max_attempts; ++attempt) {
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = standard_normal(rng);
    VectorXd x = g.mean + L * z;
    if (region.contains(x)) return {std::move(x), false, attempt};
  }

  VectorXd start;
  int sweeps = options.gibbs_sweeps;
  if (options.start && region.contains(*options.start)) {
    start = *options.start;
  } else {
    // Interior point; no chain history to start from, so sweep longer.
    start = VectorXd::Constant(g.dim(), 1.0 / static_cast<double>(g.dim() + 1));
    sweeps *= 10;
  }
  VectorXd x = gibbs_l1_ball(g, std::move(start), sweeps, rng);
  // Guard against rounding in the running sum.
  x = x.cwiseMax(0.0);
  if (const double s = x.sum(); s > 1.0) x /= s;
  return {std::move(x), true, options.max_attempts};
}

double truncated_standard_normal(double lo, double hi, Rng& rng) {
  if (std::isnan(lo) || std::isnan(hi) || lo > hi) {
    throw ValidationError(fmt::format("invalid truncation interval [{}, {}]", lo, hi));
  }
  if (lo == hi) return lo;
  constexpr double kSqrt2Pi = 2.5066282746310002;

  if (lo <= 0.0 && hi >= 0.0) {
    if (hi - lo < kSqrt2Pi) {
      // Uniform proposal, acceptance exp(-z^2 / 2).
      std::uniform_real_distribution<double> unif(lo, hi);
      for (;;) {
        const double z = unif(rng);
        if (uniform01(rng) <= std::exp(-0.5 * z * z)) return z;
      }
    }
    for (;;) {
      const double z = standard_normal(rng);
      if (z >= lo && z <= hi) return z;
    }
  }

  // One-sided case with 0 < a < b; the negative side is mirrored.
  const bool mirrored = hi < 0.0;
  const double a = mirrored ? -hi : lo;
  const double b = mirrored ? -lo : hi;
  double z = 0.0;
  if (std::isfinite(b) && 0.5 * (b * b - a * a) < 1.0) {
    std::uniform_real_distribution<double> unif(a, b);
    for (;;) {
      z = unif(rng);
      if (uniform01(rng) <= std::exp(0.5 * (a * a - z * z))) break;
    }
  } else {
    // Exponential proposal with the optimal rate.
    const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
    for (;;) {
      z = a - std::log(1.0 - uniform01(rng)) / rate;
      if (z > b) continue;
      const double t = z - rate;
      if (uniform01(rng) <= std::exp(-0.5 * t * t)) break;
    }
  }
  return mirrored ? -z : z;
}

double truncated_normal(double mean, double sd, double lo, double hi, Rng& rng) {
  if (!(sd > 0.0)) throw ValidationError("truncated normal needs a positive sd");
  const double z = truncated_standard_normal((lo - mean) / sd, (hi - mean) / sd, rng);
  return std::clamp(mean + sd * z, lo, hi);
}

}  // namespace eload
