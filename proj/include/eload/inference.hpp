#pragma once

// Metropolis-within-Gibbs samplers for the heating-threshold load model:
// the flat/Jeffreys prior and the hierarchical prior built from a long
// dataset's posterior moments. Every block except u has a closed-form full
// conditional; u moves by a Gaussian random walk whose variance is tuned
// during burn-in and then frozen.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "eload/calendar.hpp"
#include "eload/gaussian.hpp"
#include "eload/model.hpp"
#include "eload/posterior_summary.hpp"
#include "eload/rng.hpp"

namespace eload {

/// Similarity hyperparameters: eta | k, l ~ N(diag(k) mu_A, Sigma_A / l),
/// k | q, r ~ N(q 1, I / r).
struct HyperState {
  VectorXd k;
  double l = 1.0;
  double q = 1.0;
  double r = 1.0;

  static HyperState initial(Eigen::Index d) { return {VectorXd::Ones(d), 1.0, 1.0, 1.0}; }
};

/// l ~ G(a_l, b_l), q ~ N(1, sigma_q2), r ~ G(a_r, b_r); gamma laws use the
/// shape/rate convention.
struct HyperPriorConfig {
  double sigma_q2 = 1e4;
  double a_l = 1e-3;
  double b_l = 1e-3;
  double a_r = 1e-6;
  double b_r = 1e-6;

  void validate() const;
};

struct FrozenBlocks {
  bool sigma2 = false;
  bool alpha = false;
  bool beta = false;
  bool gamma = false;
  bool u = false;
  bool k = false;
  bool l = false;
  bool q = false;
  bool r = false;
};

struct McmcConfig {
  long iterations = 20000;  ///< total, burn-in included
  long burn_in = 2000;
  std::uint64_t seed = 1;
  double mh_initial_step = 1.0;  ///< proposal standard deviation for u before adaptation, degC
  long adapt_window = 1000;      ///< u draws per proposal re-estimation during burn-in
  int fallback_sweeps = 10;
  FrozenBlocks frozen;
  std::optional<ThetaState> initial;
  std::optional<HyperState> initial_hyper;

  [[nodiscard]] long kept() const { return iterations - burn_in; }
  void validate() const;

  static McmcConfig desk() { return {}; }
  static McmcConfig paper() {
    McmcConfig c;
    c.iterations = 500000;
    c.burn_in = 10000;
    c.adapt_window = 5000;
    return c;
  }
  /// "desk" or "paper".
  static McmcConfig preset(const std::string& name);
};

/// Hierarchical prior on eta built from a long-dataset summary. Caches the
/// precision of Sigma_A.
class InformativePrior {
public:
  /// mu_ridge > 0 replaces coordinates of mu_A smaller than it in magnitude
  /// by +/- mu_ridge. With mu_ridge == 0 a zero coordinate is an error,
  /// since the k full conditional divides by mu_A.
  InformativePrior(PosteriorSummary summary, HyperPriorConfig hyper, double mu_ridge = 0.0);

  [[nodiscard]] const PosteriorSummary& summary() const { return summary_; }
  [[nodiscard]] const VectorXd& mu() const { return summary_.mu; }
  [[nodiscard]] const MatrixXd& sigma() const { return summary_.sigma; }
  [[nodiscard]] const MatrixXd& precision() const { return precision_; }
  [[nodiscard]] const HyperPriorConfig& hyper() const { return hyper_; }
  [[nodiscard]] Eigen::Index dim() const { return summary_.mu.size(); }
  [[nodiscard]] double mu_ridge() const { return mu_ridge_; }

private:
  PosteriorSummary summary_;
  HyperPriorConfig hyper_;
  MatrixXd precision_;
  double mu_ridge_ = 0.0;
};

struct NonInformativePrior {};

using PriorChoice = std::variant<NonInformativePrior, InformativePrior>;

/// Hierarchical prior together with the current hyperparameters.
struct InformativeState {
  const InformativePrior& prior;
  const HyperState& hyper;
};

struct InverseGammaParams {
  double shape = 0.0;
  double scale = 0.0;
};

struct GammaParams {
  double shape = 0.0;
  double rate = 0.0;
};

enum class LinearBlock { alpha, beta, gamma };

struct BlockConditional {
  GaussianSpec gaussian;
  TruncationRegion region;
};

/// sigma2 | rest ~ IG(N / 2, |y - f(eta)|^2 / 2). Throws NumericalError on
/// a zero residual.
InverseGammaParams cond_sigma2(const Eta& eta, const DesignSet& design);

/// Full conditional of alpha, beta or gamma. Without `informative` this is
/// the flat-prior regression posterior of the block; with it, that Gaussian
/// is combined with the prior's conditional given the other eta blocks.
/// The beta conditional carries the positive l1-ball truncation.
BlockConditional cond_linear_block(LinearBlock block, const ThetaState& state,
                                   const DesignSet& design,
                                   const std::optional<InformativeState>& informative = {});

GammaParams cond_r(const HyperState& hyper, const HyperPriorConfig& cfg);
GaussianSpec cond_q(const HyperState& hyper, const HyperPriorConfig& cfg);
GammaParams cond_l(const Eta& eta, const HyperState& hyper, const InformativePrior& prior);
GaussianSpec cond_k(const Eta& eta, const HyperState& hyper, const InformativePrior& prior);

/// Unnormalized log full conditional of u (likelihood plus, when
/// informative, the prior's Gaussian term in u); -inf outside [u_lo, u_hi].
double log_cond_u(double u, const ThetaState& state, const DesignSet& design,
                  const std::optional<InformativeState>& informative = {});

struct MhResult {
  double u = 0.0;
  bool accepted = false;
};

/// One random-walk Metropolis step on u with proposal variance step_cov.
MhResult mh_step_u(const ThetaState& state, const DesignSet& design,
                   const std::optional<InformativeState>& informative, double step_cov,
                   Rng& rng);

/// Empirical variance of the draws times (2.38 / d_block)^2; returns
/// `previous` when the draws have zero variance (or fewer than two).
double adapt_proposal(std::span<const double> u_history, int d_block, double previous);

/// Unnormalized log posterior with the flat/Jeffreys prior.
double log_posterior_noninformative(const ThetaState& theta, const DesignSet& design);

/// Unnormalized log posterior with the hierarchical prior.
double log_posterior_informative(const ThetaState& theta, const HyperState& hyper,
                                 const DesignSet& design, const InformativePrior& prior);

struct Draw {
  ThetaState theta;
  std::optional<HyperState> hyper;
};

struct Chain {
  ModelSpec spec;
  McmcConfig config;
  std::string prior;  ///< "noninfo" or "info"
  std::vector<Draw> draws;
  double acceptance_rate_u = 0.0;
  double step_cov = 0.0;
  long fallback_draws = 0;

  [[nodiscard]] bool informative() const { return prior == "info"; }
  /// Kept eta draws as rows.
  [[nodiscard]] MatrixXd eta_matrix() const;
};

/// Throws NumericalError unless N > d_alpha + 1 and the rank diagnostic
/// passes on the default grid.
void check_propriety(const DesignSet& design);

/// Starting point: alpha and gamma by least squares at beta = 1/d2 and the
/// midpoint threshold; sigma2 the residual variance.
ThetaState initial_state(const DesignSet& design);

Chain fit(const DesignSet& design, const PriorChoice& prior, const McmcConfig& cfg);

}  // namespace eload
