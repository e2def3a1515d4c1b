#include "eload/inference.hpp"

#include <fmt/format.h>

#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>

#include "eload/error.hpp"

namespace eload {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

VectorXd heating_degrees(const VectorXd& T, double u) {
  VectorXd hd(T.size());
  for (Eigen::Index t = 0; t < T.size(); ++t) hd(t) = T(t) <= u ? T(t) - u : 0.0;
  return hd;
}

std::vector<int> complement(int offset, int length, int total) {
  std::vector<int> rest;
  rest.reserve(static_cast<std::size_t>(total - length));
  for (int i = 0; i < total; ++i) {
    if (i < offset || i >= offset + length) rest.push_back(i);
  }
  return rest;
}

// Conditional of eta[offset, offset + length) given the other coordinates
// under eta ~ N(diag(k) mu_A, Sigma_A / l).
GaussianSpec prior_block_conditional(int offset, int length, const Eta& eta,
                                     const InformativeState& info) {
  const VectorXd packed = eta.pack();
  const int total = static_cast<int>(packed.size());
  if (total != info.prior.dim() || info.hyper.k.size() != total) {
    throw ValidationError(fmt::format(
        "informative prior dimension {} (k: {}) does not match eta dimension {}",
        info.prior.dim(), info.hyper.k.size(), total));
  }
  const VectorXd mean = info.hyper.k.cwiseProduct(info.prior.mu());
  const MatrixXd precision = info.hyper.l * info.prior.precision();
  const auto rest = complement(offset, length, total);
  const Eigen::VectorXi idx = Eigen::Map<const Eigen::VectorXi>(
      rest.data(), static_cast<Eigen::Index>(rest.size()));
  PrecisionBlocks blocks{precision.block(offset, offset, length, length),
                         precision(Eigen::seqN(offset, length), idx), precision(idx, idx)};
  return conditional(blocks, mean.segment(offset, length), mean(idx), packed(idx));
}

double sum_squares_about(const VectorXd& k, double q) {
  return (k.array() - q).square().sum();
}

double prior_quadratic(const Eta& eta, const HyperState& hyper, const InformativePrior& prior) {
  const VectorXd delta = eta.pack() - hyper.k.cwiseProduct(prior.mu());
  return delta.dot(prior.precision() * delta);
}

}  // namespace

void HyperPriorConfig::validate() const {
  if (!(sigma_q2 > 0.0 && a_l > 0.0 && b_l > 0.0 && a_r > 0.0 && b_r > 0.0)) {
    throw ValidationError("hyperprior parameters must be strictly positive");
  }
}

void McmcConfig::validate() const {
  if (iterations <= 0) throw ValidationError("iterations must be positive");
  if (burn_in < 0 || burn_in >= iterations) {
    throw ValidationError(
        fmt::format("burn-in ({}) must be in [0, iterations = {})", burn_in, iterations));
  }
  if (adapt_window < 0 || adapt_window > burn_in) {
    throw ValidationError(fmt::format("adapt window ({}) must be in [0, burn-in = {}]",
                                      adapt_window, burn_in));
  }
  if (adapt_window == 1) throw ValidationError("adapt window needs at least two draws");
  if (!(mh_initial_step > 0.0)) throw ValidationError("MH initial step must be positive");
  if (fallback_sweeps < 1) throw ValidationError("fallback sweeps must be >= 1");
}

McmcConfig McmcConfig::preset(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "paper") return paper();
  throw ValidationError(fmt::format("unknown MCMC preset '{}' (expected desk or paper)", name));
}

InformativePrior::InformativePrior(PosteriorSummary summary, HyperPriorConfig hyper,
                                   double mu_ridge)
    : summary_(std::move(summary)), hyper_(hyper), mu_ridge_(mu_ridge) {
  hyper_.validate();
  const auto d = summary_.mu.size();
  if (d == 0 || summary_.sigma.rows() != d || summary_.sigma.cols() != d) {
    throw ValidationError(fmt::format("summary mean has {} entries but covariance is {}x{}", d,
                                      summary_.sigma.rows(), summary_.sigma.cols()));
  }
  if (!summary_.mu.allFinite() || !summary_.sigma.allFinite()) {
    throw ValidationError("summary has non-finite moments");
  }
  if (mu_ridge < 0.0) throw ValidationError("mu ridge must be non-negative");
  for (Eigen::Index i = 0; i < d; ++i) {
    double& m = summary_.mu(i);
    if (std::abs(m) < mu_ridge) {
      m = m < 0.0 ? -mu_ridge : mu_ridge;
    } else if (m == 0.0) {
      throw NumericalError(fmt::format(
          "posterior mean coordinate {} is zero; the similarity coefficients are undefined "
          "there (use --mu-ridge to replace small coordinates)",
          i + 1));
    }
  }
  summary_.sigma = 0.5 * (summary_.sigma + summary_.sigma.transpose());
  precision_ = spd_inverse(summary_.sigma, "summary covariance");
}

InverseGammaParams cond_sigma2(const Eta& eta, const DesignSet& design) {
  if (design.size() < 1) throw ValidationError("empty design");
  const double ss = residual_ss(eta, design);
  if (!(ss > 0.0)) {
    throw NumericalError("zero residual: the state interpolates the data exactly");
  }
  return {0.5 * static_cast<double>(design.size()), 0.5 * ss};
}

BlockConditional cond_linear_block(LinearBlock block, const ThetaState& state,
                                   const DesignSet& design,
                                   const std::optional<InformativeState>& informative) {
  const Eta& eta = state.eta;
  const VectorXd shape = design.B * eta.beta + design.C;
  const VectorXd hd = heating_degrees(design.T, eta.u);
  const EtaLayout layout{static_cast<int>(design.A.cols()), static_cast<int>(design.B.cols())};

  GaussianSpec likelihood;
  TruncationRegion region;
  int offset = 0;
  int length = 0;
  switch (block) {
    case LinearBlock::alpha: {
      const MatrixXd M = shape.asDiagonal() * design.A;
      likelihood = regression_posterior(M, eta.gamma * hd, design.y, state.sigma2);
      region = TruncationRegion::none(layout.d_alpha);
      offset = layout.alpha_offset();
      length = layout.d_alpha;
      break;
    }
    case LinearBlock::beta: {
      const VectorXd level = design.A * eta.alpha;
      const MatrixXd M = level.asDiagonal() * design.B;
      const VectorXd Z = level.cwiseProduct(design.C) + eta.gamma * hd;
      likelihood = regression_posterior(M, Z, design.y, state.sigma2);
      region = TruncationRegion::positive_l1_ball(layout.d_beta);
      offset = layout.beta_offset();
      length = layout.d_beta;
      break;
    }
    case LinearBlock::gamma: {
      const VectorXd Z = (design.A * eta.alpha).cwiseProduct(shape);
      likelihood = regression_posterior(hd, Z, design.y, state.sigma2);
      region = TruncationRegion::none(1);
      offset = layout.gamma_index();
      length = 1;
      break;
    }
  }
  if (!informative) return {std::move(likelihood), region};
  const GaussianSpec prior = prior_block_conditional(offset, length, eta, *informative);
  return {combine(prior, likelihood), region};
}

GammaParams cond_r(const HyperState& hyper, const HyperPriorConfig& cfg) {
  const auto d = static_cast<double>(hyper.k.size());
  return {cfg.a_r + 0.5 * d, cfg.b_r + 0.5 * sum_squares_about(hyper.k, hyper.q)};
}

GaussianSpec cond_q(const HyperState& hyper, const HyperPriorConfig& cfg) {
  const auto d = static_cast<double>(hyper.k.size());
  const double precision = 1.0 / cfg.sigma_q2 + hyper.r * d;
  const double mean = (1.0 / cfg.sigma_q2 + hyper.r * hyper.k.sum()) / precision;
  return {VectorXd::Constant(1, mean), MatrixXd::Constant(1, 1, 1.0 / precision)};
}

GammaParams cond_l(const Eta& eta, const HyperState& hyper, const InformativePrior& prior) {
  const auto d = static_cast<double>(prior.dim());
  return {prior.hyper().a_l + 0.5 * d,
          prior.hyper().b_l + 0.5 * prior_quadratic(eta, hyper, prior)};
}

GaussianSpec cond_k(const Eta& eta, const HyperState& hyper, const InformativePrior& prior) {
  const auto d = prior.dim();
  const VectorXd inv_mu = prior.mu().cwiseInverse();
  const GaussianSpec hierarchy{VectorXd::Constant(d, hyper.q),
                               MatrixXd::Identity(d, d) / hyper.r};
  const GaussianSpec data{inv_mu.cwiseProduct(eta.pack()),
                          inv_mu.asDiagonal() * prior.sigma() * inv_mu.asDiagonal() / hyper.l};
  return combine(hierarchy, data);
}

double log_cond_u(double u, const ThetaState& state, const DesignSet& design,
                  const std::optional<InformativeState>& informative) {
  if (!(u >= design.spec.u_lo && u <= design.spec.u_hi)) return kNegInf;
  Eta eta = state.eta;
  eta.u = u;
  double value = -residual_ss(eta, design) / (2.0 * state.sigma2);
  if (informative) {
    value -= 0.5 * informative->hyper.l * prior_quadratic(eta, informative->hyper,
                                                           informative->prior);
  }
  return value;
}

MhResult mh_step_u(const ThetaState& state, const DesignSet& design,
                   const std::optional<InformativeState>& informative, double step_cov,
                   Rng& rng) {
  const double current = state.eta.u;
  const double proposal = current + std::sqrt(step_cov) * standard_normal(rng);
  const double log_u = std::log(uniform01(rng));
  const double target = log_cond_u(proposal, state, design, informative);
  if (target == kNegInf) return {current, false};
  const double log_ratio = target - log_cond_u(current, state, design, informative);
  if (log_u < log_ratio) return {proposal, true};
  return {current, false};
}

double adapt_proposal(std::span<const double> u_history, int d_block, double previous) {
  if (u_history.size() < 2) return previous;
  const auto n = static_cast<double>(u_history.size());
  const double mean = std::accumulate(u_history.begin(), u_history.end(), 0.0) / n;
  double ss = 0.0;
  for (const double u : u_history) ss += (u - mean) * (u - mean);
  const double variance = ss / (n - 1.0);
  if (!(variance > 0.0)) return previous;
  const double factor = 2.38 / static_cast<double>(d_block);
  return factor * factor * variance;
}

double log_posterior_noninformative(const ThetaState& theta, const DesignSet& design) {
  if (!theta.valid(design.spec)) return kNegInf;
  const auto n = static_cast<double>(design.size());
  return -(0.5 * n + 1.0) * std::log(theta.sigma2) -
         residual_ss(theta.eta, design) / (2.0 * theta.sigma2);
}

double log_posterior_informative(const ThetaState& theta, const HyperState& hyper,
                                 const DesignSet& design, const InformativePrior& prior) {
  if (!(hyper.l > 0.0) || !(hyper.r > 0.0)) return kNegInf;
  const double base = log_posterior_noninformative(theta, design);
  if (base == kNegInf) return base;
  const auto d = static_cast<double>(prior.dim());
  const auto& hp = prior.hyper();
  return base + 0.5 * d * std::log(hyper.l) -
         0.5 * hyper.l * prior_quadratic(theta.eta, hyper, prior) +
         0.5 * d * std::log(hyper.r) - 0.5 * hyper.r * sum_squares_about(hyper.k, hyper.q) +
         (hp.a_l - 1.0) * std::log(hyper.l) - hp.b_l * hyper.l -
         0.5 * (hyper.q - 1.0) * (hyper.q - 1.0) / hp.sigma_q2 +
         (hp.a_r - 1.0) * std::log(hyper.r) - hp.b_r * hyper.r;
}

MatrixXd Chain::eta_matrix() const {
  if (draws.empty()) return {};
  const auto d = draws.front().theta.eta.size();
  MatrixXd out(static_cast<Eigen::Index>(draws.size()), d);
  for (std::size_t i = 0; i < draws.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = draws[i].theta.eta.pack().transpose();
  }
  return out;
}

void check_propriety(const DesignSet& design) {
  const auto n = design.size();
  const auto da = design.A.cols();
  if (n <= da + 1) {
    throw NumericalError(fmt::format(
        "posterior may be improper: N = {} observations but N > d_alpha + 1 = {} is required",
        n, da + 1));
  }
  const auto grid = default_rank_grid(design.spec);
  const auto report = rank_check(design, grid);
  if (report.any_flagged()) {
    for (const auto& e : report.entries) {
      if (e.flagged) {
        throw NumericalError(fmt::format(
            "rank condition fails at u = {} (smallest singular value {:.3g}); the design "
            "cannot identify the regression and heating parameters",
            e.point.u, e.smallest_singular_value));
      }
    }
  }
}

ThetaState initial_state(const DesignSet& design) {
  const auto& spec = design.spec;
  const auto n = design.size();
  const auto da = design.A.cols();
  ThetaState s;
  s.eta.beta = VectorXd::Constant(design.B.cols(), 1.0 / spec.daytypes);
  s.eta.u = 0.5 * (spec.u_lo + spec.u_hi);
  const VectorXd shape = design.B * s.eta.beta + design.C;
  MatrixXd astar(n, da + 1);
  astar.leftCols(da) = shape.asDiagonal() * design.A;
  astar.col(da) = heating_degrees(design.T, s.eta.u);
  const VectorXd coef = astar.colPivHouseholderQr().solve(design.y);
  s.eta.alpha = coef.head(da);
  s.eta.gamma = coef(da);
  const double rss = (design.y - astar * coef).squaredNorm();
  const auto dof = static_cast<double>(std::max<Eigen::Index>(1, n - da - 1));
  s.sigma2 = std::max(rss / dof, 1e-12);
  return s;
}

namespace {

double draw_gamma(const GammaParams& p, Rng& rng) {
  std::gamma_distribution<double> g(p.shape, 1.0 / p.rate);
  return g(rng);
}

double draw_inverse_gamma(const InverseGammaParams& p, Rng& rng) {
  std::gamma_distribution<double> g(p.shape, 1.0 / p.scale);
  return 1.0 / g(rng);
}

class Sampler {
public:
  Sampler(const DesignSet& design, const InformativePrior* prior, const McmcConfig& cfg)
      : design_(design), prior_(prior), cfg_(cfg), rng_(cfg.seed) {
    state_ = cfg.initial ? *cfg.initial : initial_state(design);
    if (!state_.valid(design.spec)) {
      throw NumericalError("initial state has zero posterior density");
    }
    if (prior_) {
      hyper_ = cfg.initial_hyper ? *cfg.initial_hyper : HyperState::initial(prior_->dim());
      if (hyper_.k.size() != prior_->dim() || !(hyper_.l > 0.0) || !(hyper_.r > 0.0)) {
        throw NumericalError("initial hyperparameters have zero prior density");
      }
    }
    step_cov_ = cfg.mh_initial_step * cfg.mh_initial_step;
  }

  Chain run() {
    Chain chain;
    chain.spec = design_.spec;
    chain.config = cfg_;
    chain.prior = prior_ ? "info" : "noninfo";
    chain.draws.reserve(static_cast<std::size_t>(cfg_.kept()));
    std::vector<double> window;
    window.reserve(static_cast<std::size_t>(cfg_.adapt_window));
    long accepted = 0;
    for (long it = 0; it < cfg_.iterations; ++it) {
      const bool moved = sweep();
      assert(state_.valid(design_.spec));
      if (it < cfg_.burn_in) {
        if (cfg_.adapt_window >= 2) {
          window.push_back(state_.eta.u);
          if (static_cast<long>(window.size()) == cfg_.adapt_window) {
            step_cov_ = adapt_proposal(window, 1, step_cov_);
            window.clear();
          }
        }
        continue;
      }
      accepted += moved ? 1 : 0;
      Draw draw{state_, std::nullopt};
      if (prior_) draw.hyper = hyper_;
      chain.draws.push_back(std::move(draw));
    }
    chain.acceptance_rate_u =
        cfg_.frozen.u ? 0.0 : static_cast<double>(accepted) / static_cast<double>(cfg_.kept());
    chain.step_cov = step_cov_;
    chain.fallback_draws = fallback_draws_;
    return chain;
  }

private:
  std::optional<InformativeState> info() const {
    if (!prior_) return std::nullopt;
    return InformativeState{*prior_, hyper_};
  }

  // One scan in the fixed block order; returns whether the u proposal was
  // accepted.
  bool sweep() {
    const auto& frozen = cfg_.frozen;
    if (!frozen.sigma2) state_.sigma2 = draw_inverse_gamma(cond_sigma2(state_.eta, design_), rng_);
    if (prior_) {
      const auto& hp = prior_->hyper();
      if (!frozen.r) hyper_.r = draw_gamma(cond_r(hyper_, hp), rng_);
      if (!frozen.q) hyper_.q = sample(cond_q(hyper_, hp), rng_)(0);
      if (!frozen.l) hyper_.l = draw_gamma(cond_l(state_.eta, hyper_, *prior_), rng_);
      if (!frozen.k) hyper_.k = sample(cond_k(state_.eta, hyper_, *prior_), rng_);
    }
    if (!frozen.gamma) {
      state_.eta.gamma = sample(cond_linear_block(LinearBlock::gamma, state_, design_, info()).gaussian, rng_)(0);
    }
    if (!frozen.beta) {
      const auto cond = cond_linear_block(LinearBlock::beta, state_, design_, info());
      SampleOptions options;
      options.gibbs_sweeps = cfg_.fallback_sweeps;
      options.start = state_.eta.beta;
      auto drawn = sample(cond.gaussian, cond.region, rng_, options);
      if (drawn.used_fallback) ++fallback_draws_;
      state_.eta.beta = std::move(drawn.value);
    }
    if (!frozen.alpha) {
      state_.eta.alpha = sample(cond_linear_block(LinearBlock::alpha, state_, design_, info()).gaussian, rng_);
    }
    if (frozen.u) return false;
    const auto mh = mh_step_u(state_, design_, info(), step_cov_, rng_);
    state_.eta.u = mh.u;
    return mh.accepted;
  }

  const DesignSet& design_;
  const InformativePrior* prior_;
  McmcConfig cfg_;
  Rng rng_;
  ThetaState state_;
  HyperState hyper_;
  double step_cov_ = 1.0;
  long fallback_draws_ = 0;
};

}  // namespace

Chain fit(const DesignSet& design, const PriorChoice& prior, const McmcConfig& cfg) {
  cfg.validate();
  design.spec.validate();
  check_propriety(design);
  const InformativePrior* informative = std::get_if<InformativePrior>(&prior);
  if (informative && informative->dim() != design.spec.d_eta()) {
    throw ValidationError(fmt::format("summary dimension {} does not match the model's eta ({})",
                                      informative->dim(), design.spec.d_eta()));
  }
  Sampler sampler(design, informative, cfg);
  return sampler.run();
}

}  // namespace eload
