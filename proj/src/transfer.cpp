#include "eload/transfer.hpp"

#include <fmt/format.h>

#include <fstream>
#include <json.hpp>

#include "eload/error.hpp"

namespace eload {

using nlohmann::json;

SummaryResult summarize(const Chain& chain, const SummarizeOptions& options) {
  if (chain.informative()) {
    throw ValidationError("moment transfer expects a chain from a non-informative fit");
  }
  const auto n = static_cast<long>(chain.draws.size());
  if (n < std::max(2L, options.min_draws)) {
    throw ValidationError(
        fmt::format("chain has {} kept draws; at least {} are needed", n, options.min_draws));
  }
  const MatrixXd eta = chain.eta_matrix();
  SummaryResult out;
  auto& s = out.summary;
  // Running mean: exact when all draws coincide.
  s.mu = VectorXd::Zero(eta.cols());
  for (Eigen::Index i = 0; i < eta.rows(); ++i) {
    s.mu += (eta.row(i).transpose() - s.mu) / static_cast<double>(i + 1);
  }
  const MatrixXd centred = eta.rowwise() - s.mu.transpose();
  s.sigma = (centred.transpose() * centred) / static_cast<double>(n - 1);
  s.sigma = 0.5 * (s.sigma + s.sigma.transpose());
  if (!s.mu.allFinite() || !s.sigma.allFinite()) {
    throw NumericalError("chain moments are not finite");
  }
  s.dataset_id = options.dataset_id;
  s.iterations = n;
  s.d_alpha = chain.spec.d_alpha();
  s.d_beta = chain.spec.d_beta();
  s.origin = chain.spec.origin;

  Eigen::LLT<MatrixXd> llt(s.sigma);
  if (llt.info() != Eigen::Success) {
    const auto d = static_cast<double>(s.sigma.rows());
    const double trace = s.sigma.trace();
    const double jitter = 1e-10 * (trace > 0.0 ? trace / d : 1.0);
    s.sigma.diagonal().array() += jitter;
    out.warnings.push_back(fmt::format(
        "degenerate posterior covariance; added {:.3g} to the diagonal", jitter));
    llt.compute(s.sigma);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("posterior covariance is not positive definite even after jitter");
    }
  }
  return out;
}

void write_summary(std::ostream& out, const PosteriorSummary& summary) {
  const auto d = summary.mu.size();
  json j;
  j["d"] = d;
  j["mu"] = std::vector<double>(summary.mu.data(), summary.mu.data() + d);
  json rows = json::array();
  for (Eigen::Index i = 0; i < d; ++i) {
    std::vector<double> row(static_cast<std::size_t>(d));
    for (Eigen::Index k = 0; k < d; ++k) row[static_cast<std::size_t>(k)] = summary.sigma(i, k);
    rows.push_back(row);
  }
  j["sigma"] = rows;
  j["meta"] = {{"dataset_id", summary.dataset_id},
               {"iterations", summary.iterations},
               {"d_alpha", summary.d_alpha},
               {"d_beta", summary.d_beta}};
  j["meta"]["origin"] = summary.origin ? json(format_date(*summary.origin)) : json(nullptr);
  out << j.dump(2) << '\n';
}

void save_summary(const std::string& path, const PosteriorSummary& summary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path));
  write_summary(out, summary);
  if (!out) throw IoError(fmt::format("write to '{}' failed", path));
}

PosteriorSummary read_summary(std::istream& in, const std::string& source) {
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("{}: malformed summary JSON ({})", source, e.what()));
  }
  for (const char* key : {"d", "mu", "sigma"}) {
    if (!j.contains(key)) {
      throw ValidationError(fmt::format("{}: summary is missing field '{}'", source, key));
    }
  }
  PosteriorSummary s;
  try {
    const auto d = j.at("d").get<Eigen::Index>();
    const auto mu = j.at("mu").get<std::vector<double>>();
    const auto sigma = j.at("sigma").get<std::vector<std::vector<double>>>();
    if (d <= 0 || static_cast<Eigen::Index>(mu.size()) != d ||
        static_cast<Eigen::Index>(sigma.size()) != d) {
      throw ValidationError(fmt::format("{}: field 'd' = {} disagrees with 'mu' ({}) or 'sigma' ({})",
                                        source, d, mu.size(), sigma.size()));
    }
    s.mu = Eigen::Map<const VectorXd>(mu.data(), d);
    s.sigma.resize(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      const auto& row = sigma[static_cast<std::size_t>(i)];
      if (static_cast<Eigen::Index>(row.size()) != d) {
        throw ValidationError(fmt::format("{}: sigma row {} has {} entries, expected {}", source,
                                          i + 1, row.size(), d));
      }
      for (Eigen::Index k = 0; k < d; ++k) s.sigma(i, k) = row[static_cast<std::size_t>(k)];
    }
    if (j.contains("meta")) {
      const auto& meta = j.at("meta");
      s.dataset_id = meta.value("dataset_id", std::string{});
      s.iterations = meta.value("iterations", 0L);
      s.d_alpha = meta.value("d_alpha", 0);
      s.d_beta = meta.value("d_beta", 0);
      if (meta.contains("origin") && !meta.at("origin").is_null()) {
        s.origin = parse_date(meta.at("origin").get<std::string>());
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("{}: summary schema mismatch ({})", source, e.what()));
  }
  return s;
}

PosteriorSummary load_summary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  return read_summary(in, path);
}

void check_compatible(const PosteriorSummary& summary, const ModelSpec& spec) {
  if (summary.dim() != spec.d_eta()) {
    throw ValidationError(fmt::format(
        "summary dimension {} is incompatible with the target model (d_alpha = {}, d_beta = {}, "
        "eta dimension {})",
        summary.dim(), spec.d_alpha(), spec.d_beta(), spec.d_eta()));
  }
  if ((summary.d_alpha != 0 && summary.d_alpha != spec.d_alpha()) ||
      (summary.d_beta != 0 && summary.d_beta != spec.d_beta())) {
    throw ValidationError(fmt::format(
        "summary block sizes (d_alpha = {}, d_beta = {}) are incompatible with the target "
        "model ({}, {})",
        summary.d_alpha, summary.d_beta, spec.d_alpha(), spec.d_beta()));
  }
}

MatrixXd correlation(const MatrixXd& covariance) {
  const VectorXd inv_sd = covariance.diagonal().cwiseSqrt().cwiseInverse();
  return inv_sd.asDiagonal() * covariance * inv_sd.asDiagonal();
}

}  // namespace eload
