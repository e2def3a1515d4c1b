#pragma once

// Generators and independent oracles shared by the unit tests.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "eload/calendar.hpp"
#include "eload/model.hpp"
#include "eload/rng.hpp"
#include "eload/simulation.hpp"

namespace testing {

using eload::MatrixXd;
using eload::Rng;
using eload::VectorXd;

inline MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = eload::standard_normal(rng);
  return m;
}

inline VectorXd random_vector(Eigen::Index n, Rng& rng, double scale = 1.0) {
  return scale * random_matrix(n, 1, rng);
}

/// Well conditioned SPD matrix: G G' / d + 0.5 I.
inline MatrixXd random_spd(Eigen::Index d, Rng& rng) {
  const MatrixXd g = random_matrix(d, d, rng);
  return g * g.transpose() / static_cast<double>(d) + 0.5 * MatrixXd::Identity(d, d);
}

inline double uniform(double lo, double hi, Rng& rng) { return lo + (hi - lo) * eload::uniform01(rng); }

/// Composite Simpson rule on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return s * h / 3.0;
}

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

/// Sample mean and covariance (divisor n - 1) of the rows.
struct Moments {
  VectorXd mean;
  MatrixXd cov;
};

inline Moments moments(const MatrixXd& rows) {
  Moments m;
  m.mean = rows.colwise().mean().transpose();
  const MatrixXd centered = rows.rowwise() - m.mean.transpose();
  m.cov = centered.transpose() * centered / static_cast<double>(rows.rows() - 1);
  return m;
}

/// Batch-means standard error of the mean of a correlated series.
inline double batch_se(const std::vector<double>& x, int batches = 50) {
  const std::size_t len = x.size() / static_cast<std::size_t>(batches);
  std::vector<double> means;
  for (int b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < len; ++i) s += x[static_cast<std::size_t>(b) * len + i];
    means.push_back(s / static_cast<double>(len));
  }
  double mu = 0.0;
  for (double m : means) mu += m;
  mu /= batches;
  double v = 0.0;
  for (double m : means) v += (m - mu) * (m - mu);
  v /= batches - 1;
  return std::sqrt(v / batches);
}

/// A small simulated dataset: d11 = 1, d12 = 1, three daytypes, daily
/// temperatures crossing the threshold range.
struct SmallProblem {
  eload::ModelSpec spec;
  eload::Eta truth;
  eload::DesignSet design;
  double sigma = 1.0;
};

inline SmallProblem small_problem(long days = 200, std::uint64_t seed = 7, double sigma = 1.0) {
  SmallProblem p;
  p.spec.fourier_order = 1;
  p.spec.offset_periods = 1;
  p.spec.daytypes = 3;
  p.spec.u_lo = 6.0;
  p.spec.u_hi = 16.0;
  p.truth.alpha = VectorXd(3);
  p.truth.alpha << 8.0, -4.0, 100.0;
  p.truth.beta = VectorXd(2);
  p.truth.beta << 0.3, 0.4;
  p.truth.gamma = -2.0;
  p.truth.u = 11.0;
  p.sigma = sigma;
  const eload::Date start{std::chrono::year{2001}, std::chrono::January, std::chrono::day{1}};
  auto cal = eload::make_calendar(start, days, 1);
  for (auto& d : cal) d.daytype = (d.daytype - 1) % 3 + 1;
  Rng rng(seed);
  eload::TemperatureConfig tc;
  std::vector<eload::Date> dates;
  for (const auto& d : cal) dates.push_back(d.date);
  const VectorXd temps = eload::synth_temperature(dates, tc, rng);
  const auto records = eload::simulate(p.truth, temps, cal, sigma, p.spec, rng);
  p.design = eload::build_design(records, p.spec);
  return p;
}

/// Direct evaluation of the uncondensed model: level times the daytype
/// weight psi_j, with psi = (beta, 1 - |beta|_1), plus heating.
inline double direct_f(const eload::Eta& eta, const VectorXd& a_row, int daytype, double temperature) {
  const auto d2 = eta.beta.size() + 1;
  VectorXd psi(d2);
  psi << eta.beta, 1.0 - eta.beta.sum();
  double heat = temperature <= eta.u ? eta.gamma * (temperature - eta.u) : 0.0;
  return a_row.dot(eta.alpha) * psi(daytype - 1) + heat;
}

}  // namespace testing
