#include "eload/serialization.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "eload/error.hpp"

namespace eload {

using nlohmann::json;

json to_json(const ModelSpec& spec) {
  json j{{"fourier_order", spec.fourier_order},
         {"offset_periods", spec.offset_periods},
         {"daytypes", spec.daytypes},
         {"u_lo", spec.u_lo},
         {"u_hi", spec.u_hi},
         {"period_days", spec.period_days}};
  j["cooling_threshold"] = spec.cooling_threshold ? json(*spec.cooling_threshold) : json(nullptr);
  j["origin"] = spec.origin ? json(format_date(*spec.origin)) : json(nullptr);
  return j;
}

ModelSpec model_spec_from_json(const json& j) {
  ModelSpec spec;
  try {
    spec.fourier_order = j.value("fourier_order", spec.fourier_order);
    spec.offset_periods = j.value("offset_periods", spec.offset_periods);
    spec.daytypes = j.value("daytypes", spec.daytypes);
    spec.u_lo = j.value("u_lo", spec.u_lo);
    spec.u_hi = j.value("u_hi", spec.u_hi);
    spec.period_days = j.value("period_days", spec.period_days);
    if (j.contains("cooling_threshold") && !j.at("cooling_threshold").is_null()) {
      spec.cooling_threshold = j.at("cooling_threshold").get<double>();
    }
    if (j.contains("origin") && !j.at("origin").is_null()) {
      spec.origin = parse_date(j.at("origin").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("model spec: {}", e.what()));
  }
  spec.validate();
  return spec;
}

json to_json(const McmcConfig& cfg) {
  return {{"iterations", cfg.iterations},         {"burn_in", cfg.burn_in},
          {"seed", cfg.seed},                     {"mh_initial_step", cfg.mh_initial_step},
          {"adapt_window", cfg.adapt_window},     {"fallback_sweeps", cfg.fallback_sweeps}};
}

McmcConfig mcmc_config_from_json(const json& j, const McmcConfig& base) {
  McmcConfig cfg = base;
  try {
    if (j.contains("preset")) {
      const auto seed = cfg.seed;
      cfg = McmcConfig::preset(j.at("preset").get<std::string>());
      cfg.seed = seed;
    }
    cfg.iterations = j.value("iterations", cfg.iterations);
    cfg.burn_in = j.value("burn_in", cfg.burn_in);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.mh_initial_step = j.value("mh_initial_step", cfg.mh_initial_step);
    cfg.adapt_window = j.value("adapt_window", cfg.adapt_window);
    cfg.fallback_sweeps = j.value("fallback_sweeps", cfg.fallback_sweeps);
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("MCMC config: {}", e.what()));
  }
  cfg.validate();
  return cfg;
}

json to_json(const HyperPriorConfig& cfg) {
  return {{"sigma_q2", cfg.sigma_q2}, {"a_l", cfg.a_l}, {"b_l", cfg.b_l},
          {"a_r", cfg.a_r},           {"b_r", cfg.b_r}};
}

HyperPriorConfig hyper_prior_from_json(const json& j) {
  HyperPriorConfig cfg;
  try {
    cfg.sigma_q2 = j.value("sigma_q2", cfg.sigma_q2);
    cfg.a_l = j.value("a_l", cfg.a_l);
    cfg.b_l = j.value("b_l", cfg.b_l);
    cfg.a_r = j.value("a_r", cfg.a_r);
    cfg.b_r = j.value("b_r", cfg.b_r);
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("hyperprior config: {}", e.what()));
  }
  cfg.validate();
  return cfg;
}

std::string sidecar_path(const std::string& chain_path) {
  std::filesystem::path p(chain_path);
  p.replace_extension(".json");
  return p.string();
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("{}: malformed JSON ({})", path, e.what()));
  }
}

void write_text_atomically(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot write '{}'", tmp));
    out << content;
    if (!out) throw IoError(fmt::format("write to '{}' failed", tmp));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError(fmt::format("cannot move '{}' to '{}': {}", tmp, path, ec.message()));
}

void save_chain(const std::string& path, const Chain& chain) {
  const int da = chain.spec.d_alpha();
  const int db = chain.spec.d_beta();
  const int d = chain.spec.d_eta();
  std::ostringstream csv;
  std::vector<std::string> header;
  for (int i = 1; i <= da; ++i) header.push_back(fmt::format("alpha.{}", i));
  for (int i = 1; i <= db; ++i) header.push_back(fmt::format("beta.{}", i));
  header.insert(header.end(), {"gamma", "u", "sigma2"});
  if (chain.informative()) {
    for (int i = 1; i <= d; ++i) header.push_back(fmt::format("k.{}", i));
    header.insert(header.end(), {"l", "q", "r"});
  }
  csv << fmt::format("{}\n", fmt::join(header, ","));
  std::vector<double> row;
  for (const auto& draw : chain.draws) {
    row.clear();
    const auto& eta = draw.theta.eta;
    row.insert(row.end(), eta.alpha.data(), eta.alpha.data() + eta.alpha.size());
    row.insert(row.end(), eta.beta.data(), eta.beta.data() + eta.beta.size());
    row.insert(row.end(), {eta.gamma, eta.u, draw.theta.sigma2});
    if (chain.informative()) {
      const auto& h = *draw.hyper;
      row.insert(row.end(), h.k.data(), h.k.data() + h.k.size());
      row.insert(row.end(), {h.l, h.q, h.r});
    }
    csv << fmt::format("{}\n", fmt::join(row, ","));
  }
  write_text_atomically(path, csv.str());

  json side{{"prior", chain.prior},
            {"seed", chain.config.seed},
            {"acceptance_rate_u", chain.acceptance_rate_u},
            {"step_cov", chain.step_cov},
            {"fallback_draws", chain.fallback_draws},
            {"kept", chain.draws.size()},
            {"config", to_json(chain.config)},
            {"spec", to_json(chain.spec)}};
  write_text_atomically(sidecar_path(path), side.dump(2) + "\n");
}

Chain load_chain(const std::string& path) {
  const json side = read_json_file(sidecar_path(path));
  Chain chain;
  try {
    chain.prior = side.at("prior").get<std::string>();
    chain.acceptance_rate_u = side.at("acceptance_rate_u").get<double>();
    chain.step_cov = side.value("step_cov", 0.0);
    chain.fallback_draws = side.value("fallback_draws", 0L);
    chain.config = mcmc_config_from_json(side.at("config"));
    chain.spec = model_spec_from_json(side.at("spec"));
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("{}: chain sidecar schema mismatch ({})",
                                      sidecar_path(path), e.what()));
  }
  if (chain.prior != "info" && chain.prior != "noninfo") {
    throw ValidationError(fmt::format("unknown prior kind '{}'", chain.prior));
  }
  const int da = chain.spec.d_alpha();
  const int db = chain.spec.d_beta();
  const int d = chain.spec.d_eta();
  const std::size_t width =
      static_cast<std::size_t>(da + db + 3) + (chain.informative() ? static_cast<std::size_t>(d + 3) : 0U);

  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(fmt::format("{}: empty chain file", path));
  {
    std::size_t columns = 1;
    for (const char c : line) columns += c == ',' ? 1U : 0U;
    if (columns != width) {
      throw ValidationError(fmt::format("{}: {} columns, expected {} for this model", path,
                                        columns, width));
    }
  }
  std::vector<double> row(width);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::size_t pos = 0;
    for (std::size_t c = 0; c < width; ++c) {
      const std::size_t next = line.find(',', pos);
      const std::string field = line.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
      char* end = nullptr;
      row[c] = std::strtod(field.c_str(), &end);
      if (field.empty() || end != field.c_str() + field.size()) {
        throw ValidationError(fmt::format("{}:{}: malformed value '{}'", path, line_no, field));
      }
      if ((next == std::string::npos) != (c + 1 == width)) {
        throw ValidationError(fmt::format("{}:{}: wrong number of fields", path, line_no));
      }
      pos = next + 1;
    }
    Draw draw;
    draw.theta.eta.alpha = Eigen::Map<const VectorXd>(row.data(), da);
    draw.theta.eta.beta = Eigen::Map<const VectorXd>(row.data() + da, db);
    draw.theta.eta.gamma = row[static_cast<std::size_t>(da + db)];
    draw.theta.eta.u = row[static_cast<std::size_t>(da + db + 1)];
    draw.theta.sigma2 = row[static_cast<std::size_t>(da + db + 2)];
    if (chain.informative()) {
      const double* h = row.data() + da + db + 3;
      draw.hyper = HyperState{Eigen::Map<const VectorXd>(h, d), h[d], h[d + 1], h[d + 2]};
    }
    chain.draws.push_back(std::move(draw));
  }
  return chain;
}

}  // namespace eload
