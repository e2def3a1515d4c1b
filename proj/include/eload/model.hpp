#pragma once

#include <Eigen/Dense>

#include "eload/calendar.hpp"

namespace eload {

/// eta = (alpha, beta, gamma, u): the parameters of interest.
struct Eta {
  VectorXd alpha;
  VectorXd beta;
  double gamma = 1.0;
  double u = 0.0;

  [[nodiscard]] Eigen::Index size() const { return alpha.size() + beta.size() + 2; }

  /// Stacked as (alpha, beta, gamma, u).
  [[nodiscard]] VectorXd pack() const;
  static Eta unpack(const VectorXd& packed, int d_alpha, int d_beta);
};

/// Index ranges of the blocks inside a packed eta.
struct EtaLayout {
  int d_alpha = 0;
  int d_beta = 0;

  [[nodiscard]] int alpha_offset() const { return 0; }
  [[nodiscard]] int beta_offset() const { return d_alpha; }
  [[nodiscard]] int gamma_index() const { return d_alpha + d_beta; }
  [[nodiscard]] int u_index() const { return d_alpha + d_beta + 1; }
  [[nodiscard]] int size() const { return d_alpha + d_beta + 2; }

  static EtaLayout of(const ModelSpec& spec) { return {spec.d_alpha(), spec.d_beta()}; }
};

struct ThetaState {
  Eta eta;
  double sigma2 = 1.0;

  /// Throws ValidationError unless beta is in the positive l1 ball, u is in
  /// the spec's bounds, sigma2 > 0 and dimensions match.
  void validate(const ModelSpec& spec) const;
  /// Same checks, as a predicate.
  [[nodiscard]] bool valid(const ModelSpec& spec) const;
};

/// gamma (T - u) when T <= u, else 0.
inline double heating_term(double gamma, double u, double temperature) {
  return temperature <= u ? gamma * (temperature - u) : 0.0;
}

/// f_t = (A_t alpha)(B_t beta + C_t) + heating_term(gamma, u, T_t).
VectorXd eval_f(const Eta& eta, const DesignSet& design);

/// Gaussian log-likelihood -(N/2) log(2 pi sigma2) - |y - f|^2 / (2 sigma2).
double log_likelihood(const ThetaState& theta, const DesignSet& design);

/// Residual sum of squares |y - f(eta)|^2.
double residual_ss(const Eta& eta, const DesignSet& design);

/// True when |gamma| is below 1e-12; the parameter space excludes zero.
bool gamma_degenerate(double gamma);

}  // namespace eload
