#include "eload/model.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numbers>

#include "eload/error.hpp"

namespace eload {

VectorXd Eta::pack() const {
  VectorXd out(size());
  out << alpha, beta, gamma, u;
  return out;
}

Eta Eta::unpack(const VectorXd& packed, int d_alpha, int d_beta) {
  if (packed.size() != d_alpha + d_beta + 2) {
    throw ValidationError(fmt::format("packed eta has {} entries, expected {}", packed.size(),
                                      d_alpha + d_beta + 2));
  }
  Eta eta;
  eta.alpha = packed.head(d_alpha);
  eta.beta = packed.segment(d_alpha, d_beta);
  eta.gamma = packed(d_alpha + d_beta);
  eta.u = packed(d_alpha + d_beta + 1);
  return eta;
}

void ThetaState::validate(const ModelSpec& spec) const {
  if (eta.alpha.size() != spec.d_alpha() || eta.beta.size() != spec.d_beta()) {
    throw ValidationError(fmt::format("theta dimensions ({}, {}) do not match spec ({}, {})",
                                      eta.alpha.size(), eta.beta.size(), spec.d_alpha(),
                                      spec.d_beta()));
  }
  if (!eta.alpha.allFinite() || !std::isfinite(eta.gamma)) {
    throw ValidationError("non-finite alpha or gamma");
  }
  if (!eta.beta.allFinite() || (eta.beta.array() < 0.0).any() || eta.beta.sum() > 1.0) {
    throw ValidationError("beta outside the positive l1 unit ball");
  }
  if (!(eta.u >= spec.u_lo && eta.u <= spec.u_hi)) {
    throw ValidationError(
        fmt::format("u = {} outside [{}, {}]", eta.u, spec.u_lo, spec.u_hi));
  }
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw ValidationError("sigma2 must be positive and finite");
  }
}

bool ThetaState::valid(const ModelSpec& spec) const {
  try {
    validate(spec);
    return true;
  } catch (const ValidationError&) {
    return false;
  }
}

VectorXd eval_f(const Eta& eta, const DesignSet& design) {
  if (eta.alpha.size() != design.A.cols() || eta.beta.size() != design.B.cols()) {
    throw ValidationError(fmt::format("eta dimensions ({}, {}) do not match design ({}, {})",
                                      eta.alpha.size(), eta.beta.size(), design.A.cols(),
                                      design.B.cols()));
  }
  VectorXd f = (design.A * eta.alpha).cwiseProduct(design.B * eta.beta + design.C);
  for (Eigen::Index t = 0; t < f.size(); ++t) {
    f(t) += heating_term(eta.gamma, eta.u, design.T(t));
  }
  return f;
}

double residual_ss(const Eta& eta, const DesignSet& design) {
  return (design.y - eval_f(eta, design)).squaredNorm();
}

double log_likelihood(const ThetaState& theta, const DesignSet& design) {
  const auto n = static_cast<double>(design.size());
  return -0.5 * n * std::log(2.0 * std::numbers::pi * theta.sigma2) -
         residual_ss(theta.eta, design) / (2.0 * theta.sigma2);
}

bool gamma_degenerate(double gamma) { return std::abs(gamma) < 1e-12; }

}  // namespace eload
