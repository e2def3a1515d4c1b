#include "eload/simulation.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "eload/error.hpp"
#include "eload/forecast.hpp"
#include "eload/serialization.hpp"
#include "eload/transfer.hpp"

namespace eload {

using nlohmann::json;
namespace chr = std::chrono;

namespace {

// Stream index of the scenario's weather; replicate indices are ints, so
// they never reach it.
constexpr std::uint64_t kTemperatureStream = 0xFFFF'FFFF'0000'0001ULL;

enum ReplicateStream : std::uint64_t { kNoise = 0, kFitA = 1, kFitBNonInfo = 2, kFitBInfo = 3 };

ModelSpec with_origin(const ModelSpec& spec, const Date& origin) {
  ModelSpec s = spec;
  if (!s.origin) s.origin = origin;
  return s;
}

std::vector<Date> dates_of(std::span<const CalendarDay> calendar) {
  std::vector<Date> dates;
  dates.reserve(calendar.size());
  for (const auto& day : calendar) dates.push_back(day.date);
  return dates;
}

bool in_dst(const Date& date) {
  const auto y = date.year();
  const chr::sys_days start{chr::year_month_weekday_last{y, chr::March, chr::Sunday[chr::last]}};
  const chr::sys_days end{chr::year_month_weekday_last{y, chr::October, chr::Sunday[chr::last]}};
  const chr::sys_days d{date};
  return d >= start && d < end;
}

json eta_json(const Eta& eta) {
  return {{"alpha", std::vector<double>(eta.alpha.data(), eta.alpha.data() + eta.alpha.size())},
          {"beta", std::vector<double>(eta.beta.data(), eta.beta.data() + eta.beta.size())},
          {"gamma", eta.gamma},
          {"u", eta.u}};
}

Eta eta_from_json(const json& j) {
  Eta eta;
  const auto a = j.at("alpha").get<std::vector<double>>();
  const auto b = j.at("beta").get<std::vector<double>>();
  eta.alpha = Eigen::Map<const VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
  eta.beta = Eigen::Map<const VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  eta.gamma = j.at("gamma").get<double>();
  eta.u = j.at("u").get<double>();
  return eta;
}

double column_mean(const MatrixXd& m, Eigen::Index c) { return m.col(c).mean(); }

}  // namespace

Eta default_truth() {
  Eta eta;
  eta.alpha.resize(10);
  eta.alpha << 27, 7, -3, 1, 5, -1, 4, 0.5, 490, 495;
  eta.beta.resize(6);
  eta.beta << 0.13, 0.15, 0.16, 0.16, 0.16, 0.13;
  eta.gamma = -3.0;
  eta.u = 14.0;
  return eta;
}

ModelSpec default_model_spec() {
  ModelSpec spec;
  spec.fourier_order = 4;
  spec.offset_periods = 2;
  spec.daytypes = 7;
  spec.u_lo = 5.0;
  spec.u_hi = 19.0;
  return spec;
}

ScenarioSpec ScenarioSpec::defaults() {
  ScenarioSpec s;
  s.eta_A = default_truth();
  s.model = default_model_spec();
  s.mcmc = McmcConfig::desk();
  return s;
}

void ScenarioSpec::validate() const {
  if (replications < 1) throw ValidationError("replications must be at least 1");
  if (years_A < 1 || years_B < 1) throw ValidationError("years_A and years_B must be at least 1");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma must be finite and >= 0");
  if (!(mu_ridge >= 0.0)) throw ValidationError("mu_ridge must be >= 0");
  if (!(temperature.ar_coefficient > -1.0 && temperature.ar_coefficient < 1.0)) {
    throw ValidationError("temperature AR coefficient must lie in (-1, 1)");
  }
  if (!(temperature.innovation_sd >= 0.0)) throw ValidationError("temperature innovation SD must be >= 0");
  model.validate();
  mcmc.validate();
  hyper.validate();
  if (eta_A.alpha.size() != model.d_alpha() || eta_A.beta.size() != model.d_beta()) {
    throw ValidationError(fmt::format("eta_A has d_alpha = {}, d_beta = {}; the model needs {}, {}",
                                      eta_A.alpha.size(), eta_A.beta.size(), model.d_alpha(),
                                      model.d_beta()));
  }
  ThetaState{eta_A, 1.0}.validate(model);
  const Eta eta_B = scale_truth(eta_A, k_true);
  ThetaState{eta_B, 1.0}.validate(model);
}

Eta scale_truth(const Eta& eta_A, const SimilarityFactors& k) {
  Eta eta = eta_A;
  eta.alpha *= k.alpha;
  if (eta.beta.size() > 0) eta.beta(0) *= k.beta;
  eta.gamma *= k.gamma;
  eta.u *= k.u;
  if ((eta.beta.array() < 0.0).any() || eta.beta.sum() > 1.0) {
    throw ValidationError(fmt::format(
        "scaled beta ({}) leaves the positive l1 ball; lower k_beta",
        fmt::join(std::vector<double>(eta.beta.data(), eta.beta.data() + eta.beta.size()), ", ")));
  }
  return eta;
}

std::vector<CalendarDay> make_calendar(const Date& start, long n_days, int offset_periods) {
  if (n_days < 0) throw ValidationError("negative calendar length");
  std::vector<CalendarDay> out;
  out.reserve(static_cast<std::size_t>(n_days));
  for (long i = 0; i < n_days; ++i) {
    CalendarDay day;
    day.date = add_days(start, i);
    day.daytype = static_cast<int>(chr::weekday{chr::sys_days{day.date}}.iso_encoding());
    day.offset_period = (offset_periods >= 2 && in_dst(day.date)) ? 2 : 1;
    out.push_back(day);
  }
  return out;
}

long days_in_years(const Date& start, int years) {
  const auto end_ymd = start + chr::years{years};
  const chr::sys_days end = end_ymd.ok() ? chr::sys_days{end_ymd} : chr::sys_days{end_ymd.year() / end_ymd.month() / chr::last} + chr::days{1};
  return (end - chr::sys_days{start}).count();
}

VectorXd synth_temperature(std::span<const Date> dates, const TemperatureConfig& cfg, Rng& rng) {
  VectorXd out(static_cast<Eigen::Index>(dates.size()));
  double anomaly = 0.0;
  const double stationary_sd =
      cfg.innovation_sd / std::sqrt(1.0 - cfg.ar_coefficient * cfg.ar_coefficient);
  for (std::size_t t = 0; t < dates.size(); ++t) {
    const auto& d = dates[t];
    const chr::sys_days jan1{d.year() / chr::January / 1};
    const double doy = static_cast<double>((chr::sys_days{d} - jan1).count() + 1);
    const double phase = 2.0 * std::numbers::pi * (doy - cfg.warmest_day_of_year) / 365.25;
    if (t == 0) {
      anomaly = stationary_sd * standard_normal(rng);
    } else {
      anomaly = cfg.ar_coefficient * anomaly + cfg.innovation_sd * standard_normal(rng);
    }
    out(static_cast<Eigen::Index>(t)) = cfg.mean + cfg.amplitude * std::cos(phase) + anomaly;
  }
  return out;
}

std::vector<SeriesRecord> simulate(const Eta& eta, const VectorXd& temperatures,
                                   std::span<const CalendarDay> calendar, double sigma,
                                   const ModelSpec& spec, Rng& rng) {
  if (temperatures.size() != static_cast<Eigen::Index>(calendar.size())) {
    throw ValidationError(fmt::format("{} temperatures for {} calendar days", temperatures.size(),
                                      calendar.size()));
  }
  std::vector<SeriesRecord> records;
  records.reserve(calendar.size());
  for (std::size_t t = 0; t < calendar.size(); ++t) {
    records.push_back({calendar[t], 0.0, temperatures(static_cast<Eigen::Index>(t))});
  }
  const DesignSet design = build_design(records, spec);
  const VectorXd f = eval_f(eta, design);
  for (std::size_t t = 0; t < records.size(); ++t) {
    records[t].load = f(static_cast<Eigen::Index>(t)) + sigma * standard_normal(rng);
  }
  return records;
}

VectorXd scenario_temperatures(const ScenarioSpec& scenario) {
  const long n = days_in_years(scenario.start, scenario.years_A + scenario.years_B);
  const auto cal = make_calendar(scenario.start, n, scenario.model.offset_periods);
  const auto dates = dates_of(cal);
  Rng rng(split_seed(scenario.seed, kTemperatureStream));
  return synth_temperature(dates, scenario.temperature, rng);
}

ScenarioData generate_data(const ScenarioSpec& scenario, const VectorXd& temperatures,
                           Rng& noise_rng) {
  const ModelSpec spec = with_origin(scenario.model, scenario.start);
  const long n_a = days_in_years(scenario.start, scenario.years_A);
  const Date start_b = add_days(scenario.start, n_a);
  const long n_b = days_in_years(start_b, scenario.years_B);
  const Date start_p = add_days(start_b, n_b);
  const long n_p = days_in_years(start_p, 1);
  if (temperatures.size() != n_a + n_b) {
    throw ValidationError(fmt::format("scenario needs {} temperatures, got {}", n_a + n_b,
                                      temperatures.size()));
  }

  ScenarioData data;
  data.eta_A = scenario.eta_A;
  data.eta_B = scale_truth(scenario.eta_A, scenario.k_true);

  const auto cal_a = make_calendar(scenario.start, n_a, spec.offset_periods);
  const auto cal_b = make_calendar(start_b, n_b, spec.offset_periods);
  const auto cal_p = make_calendar(start_p, n_p, spec.offset_periods);
  data.long_set = simulate(data.eta_A, temperatures.head(n_a), cal_a, scenario.sigma, spec, noise_rng);
  data.short_set = simulate(data.eta_B, temperatures.segment(n_a, n_b), cal_b, scenario.sigma, spec, noise_rng);

  std::vector<SeriesRecord> history = data.long_set;
  history.insert(history.end(), data.short_set.begin(), data.short_set.end());
  const auto dates_p = dates_of(cal_p);
  const VectorXd normal = normal_temperatures(history, dates_p);
  data.prediction_set = simulate(data.eta_B, normal, cal_p, scenario.sigma, spec, noise_rng);
  data.prediction_truth = eval_f(data.eta_B, build_design(data.prediction_set, spec));
  return data;
}

std::uint64_t replicate_seed(const ScenarioSpec& scenario, int index) {
  return split_seed(scenario.seed, static_cast<std::uint64_t>(index));
}

ScenarioData replicate_data(const ScenarioSpec& scenario, const VectorXd& temperatures, int index) {
  Rng noise(split_seed(replicate_seed(scenario, index), kNoise));
  return generate_data(scenario, temperatures, noise);
}

ReplicationRow run_replicate(const ScenarioSpec& scenario, const VectorXd& temperatures, int index) {
  ReplicationRow row;
  row.replicate = index;
  row.scenario = scenario.name;
  row.seed = replicate_seed(scenario, index);

  const ScenarioData data = replicate_data(scenario, temperatures, index);
  const ModelSpec spec = with_origin(scenario.model, scenario.start);
  const DesignSet design_a = build_design(data.long_set, spec);
  const DesignSet design_b = build_design(data.short_set, spec);
  const DesignSet design_p = build_design(data.prediction_set, spec);

  McmcConfig cfg = scenario.mcmc;
  cfg.seed = split_seed(row.seed, kFitA);
  const Chain chain_a = fit(design_a, NonInformativePrior{}, cfg);
  SummarizeOptions sopt;
  sopt.min_draws = std::min<long>(sopt.min_draws, static_cast<long>(chain_a.draws.size()));
  const SummaryResult summary = summarize(chain_a, sopt);

  cfg.seed = split_seed(row.seed, kFitBNonInfo);
  const Chain chain_noninfo = fit(design_b, NonInformativePrior{}, cfg);
  cfg.seed = split_seed(row.seed, kFitBInfo);
  const InformativePrior prior(summary.summary, scenario.hyper, scenario.mu_ridge);
  const Chain chain_info = fit(design_b, prior, cfg);

  row.crit_info = criterion(data.prediction_truth, predict(chain_info, design_p).point);
  row.crit_noninfo = criterion(data.prediction_truth, predict(chain_noninfo, design_p).point);
  row.ratio = row.crit_info / row.crit_noninfo;

  const auto d = static_cast<Eigen::Index>(spec.d_eta());
  MatrixXd hyper(static_cast<Eigen::Index>(chain_info.draws.size()), d + 3);
  for (std::size_t i = 0; i < chain_info.draws.size(); ++i) {
    const auto& h = *chain_info.draws[i].hyper;
    const auto r = static_cast<Eigen::Index>(i);
    hyper.row(r).head(d) = h.k.transpose();
    hyper(r, d) = h.l;
    hyper(r, d + 1) = h.q;
    hyper(r, d + 2) = h.r;
  }
  row.k_post = hyper.colwise().mean().head(d).transpose();
  row.l_post = column_mean(hyper, d);
  row.q_post = column_mean(hyper, d + 1);
  row.r_post = column_mean(hyper, d + 2);

  const MatrixXd eta_draws = chain_info.eta_matrix();
  const VectorXd truth = data.eta_B.pack();
  int covered = 0;
  for (Eigen::Index c = 0; c < d; ++c) {
    std::vector<double> col(eta_draws.col(c).data(), eta_draws.col(c).data() + eta_draws.rows());
    const double lo = quantile(col, 0.05);
    const double hi = quantile(std::move(col), 0.95);
    covered += (truth(c) >= lo && truth(c) <= hi) ? 1 : 0;
  }
  row.coverage90 = static_cast<double>(covered) / static_cast<double>(d);
  return row;
}

std::vector<ReplicationRow> run_replications(const ScenarioSpec& scenario, int jobs) {
  scenario.validate();
  const VectorXd temperatures = scenario_temperatures(scenario);
  scenario.model.check_support(temperatures);

  const int n = scenario.replications;
  std::vector<ReplicationRow> rows(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  const auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      auto& row = rows[static_cast<std::size_t>(i)];
      try {
        row = run_replicate(scenario, temperatures, i);
      } catch (const std::exception& e) {
        row = ReplicationRow{};
        row.replicate = i;
        row.scenario = scenario.name;
        row.seed = replicate_seed(scenario, i);
        const double nan = std::numeric_limits<double>::quiet_NaN();
        row.crit_info = row.crit_noninfo = row.ratio = nan;
        row.l_post = row.q_post = row.r_post = row.coverage90 = nan;
        row.k_post = VectorXd::Constant(scenario.model.d_eta(), nan);
        row.status = dynamic_cast<const NumericalError*>(&e) != nullptr ? "failed-numerical"
                     : dynamic_cast<const ValidationError*>(&e) != nullptr ? "failed-validation"
                                                                           : "failed";
      }
    }
  };
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  return rows;
}

ReplicationAggregate aggregate(std::span<const ReplicationRow> rows) {
  ReplicationAggregate agg;
  agg.rows = static_cast<int>(rows.size());
  std::vector<double> ratio, q, r, cov;
  for (const auto& row : rows) {
    if (!row.ok()) {
      ++agg.failed;
      continue;
    }
    ratio.push_back(row.ratio);
    q.push_back(row.q_post);
    r.push_back(row.r_post);
    cov.push_back(row.coverage90);
  }
  if (ratio.empty()) throw ValidationError("no successful replicate to aggregate");
  const auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (const double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  agg.mean_ratio = mean(ratio);
  agg.q05_ratio = quantile(ratio, 0.05);
  agg.q80_ratio = quantile(ratio, 0.80);
  agg.q90_ratio = quantile(ratio, 0.90);
  agg.q95_ratio = quantile(ratio, 0.95);
  agg.mean_q = mean(q);
  agg.mean_r = mean(r);
  agg.median_r = quantile(r, 0.5);
  agg.mean_coverage90 = mean(cov);
  return agg;
}

void save_replication_table(const std::string& path, std::span<const ReplicationRow> rows) {
  const Eigen::Index d = rows.empty() ? 0 : rows.front().k_post.size();
  std::ostringstream out;
  std::vector<std::string> header{"replicate", "scenario", "crit_info", "crit_noninfo", "ratio"};
  for (Eigen::Index i = 1; i <= d; ++i) header.push_back(fmt::format("k_post.{}", i));
  header.insert(header.end(), {"l_post", "q_post", "r_post", "seed", "coverage90", "status"});
  out << fmt::format("{}\n", fmt::join(header, ","));
  for (const auto& row : rows) {
    if (row.k_post.size() != d) throw ValidationError("replication rows disagree on dim(k)");
    out << fmt::format("{},{},{},{},{}", row.replicate, row.scenario, row.crit_info,
                       row.crit_noninfo, row.ratio);
    for (Eigen::Index i = 0; i < d; ++i) out << fmt::format(",{}", row.k_post(i));
    out << fmt::format(",{},{},{},{},{},{}\n", row.l_post, row.q_post, row.r_post, row.seed,
                       row.coverage90, row.status);
  }
  write_text_atomically(path, out.str());
}

std::vector<ReplicationRow> load_replication_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(fmt::format("{}: empty table", path));
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) header.push_back(field);
  }
  const auto find = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  };
  const auto require = [&](const std::string& name) {
    const auto i = find(name);
    if (!i) throw ValidationError(fmt::format("{}: missing column '{}'", path, name));
    return *i;
  };
  const std::size_t c_rep = require("replicate"), c_scn = require("scenario"),
                    c_ci = require("crit_info"), c_cn = require("crit_noninfo"),
                    c_ratio = require("ratio"), c_l = require("l_post"), c_q = require("q_post"),
                    c_r = require("r_post"), c_seed = require("seed");
  const auto c_cov = find("coverage90");
  const auto c_status = find("status");
  std::vector<std::size_t> c_k;
  for (int i = 1; find(fmt::format("k_post.{}", i)); ++i) c_k.push_back(*find(fmt::format("k_post.{}", i)));

  std::vector<ReplicationRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != header.size()) {
      throw ValidationError(fmt::format("{}:{}: {} fields, header has {}", path, line_no, f.size(),
                                        header.size()));
    }
    const auto num = [&](std::size_t c) {
      char* end = nullptr;
      const double v = std::strtod(f[c].c_str(), &end);
      if (f[c].empty() || end != f[c].c_str() + f[c].size()) {
        throw ValidationError(fmt::format("{}:{}: malformed {} '{}'", path, line_no, header[c], f[c]));
      }
      return v;
    };
    ReplicationRow row;
    row.replicate = static_cast<int>(num(c_rep));
    row.scenario = f[c_scn];
    row.crit_info = num(c_ci);
    row.crit_noninfo = num(c_cn);
    row.ratio = num(c_ratio);
    row.k_post.resize(static_cast<Eigen::Index>(c_k.size()));
    for (std::size_t i = 0; i < c_k.size(); ++i) row.k_post(static_cast<Eigen::Index>(i)) = num(c_k[i]);
    row.l_post = num(c_l);
    row.q_post = num(c_q);
    row.r_post = num(c_r);
    try {
      row.seed = std::stoull(f[c_seed]);
    } catch (const std::exception&) {
      throw ValidationError(fmt::format("{}:{}: malformed seed '{}'", path, line_no, f[c_seed]));
    }
    row.coverage90 = c_cov ? num(*c_cov) : std::numeric_limits<double>::quiet_NaN();
    row.status = c_status ? f[*c_status] : "ok";
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const ScenarioSpec& s) {
  return {{"name", s.name},
          {"eta_A", eta_json(s.eta_A)},
          {"sigma", s.sigma},
          {"k_true", {{"alpha", s.k_true.alpha}, {"beta", s.k_true.beta}, {"gamma", s.k_true.gamma}, {"u", s.k_true.u}}},
          {"years_A", s.years_A},
          {"years_B", s.years_B},
          {"replications", s.replications},
          {"mcmc", to_json(s.mcmc)},
          {"hyper", to_json(s.hyper)},
          {"model", to_json(s.model)},
          {"temperature",
           {{"mean", s.temperature.mean},
            {"amplitude", s.temperature.amplitude},
            {"warmest_day_of_year", s.temperature.warmest_day_of_year},
            {"ar_coefficient", s.temperature.ar_coefficient},
            {"innovation_sd", s.temperature.innovation_sd}}},
          {"start", format_date(s.start)},
          {"seed", s.seed},
          {"mu_ridge", s.mu_ridge}};
}

ScenarioSpec scenario_from_json(const json& j) {
  ScenarioSpec s = ScenarioSpec::defaults();
  if (!j.is_object()) throw ValidationError("scenario must be a JSON object");
  try {
    s.name = j.value("name", s.name);
    if (j.contains("eta_A")) s.eta_A = eta_from_json(j.at("eta_A"));
    s.sigma = j.value("sigma", s.sigma);
    if (j.contains("k_true")) {
      const auto& k = j.at("k_true");
      s.k_true.alpha = k.value("alpha", 1.0);
      s.k_true.beta = k.value("beta", 1.0);
      s.k_true.gamma = k.value("gamma", 1.0);
      s.k_true.u = k.value("u", 1.0);
    }
    s.years_A = j.value("years_A", s.years_A);
    s.years_B = j.value("years_B", s.years_B);
    s.replications = j.value("replications", s.replications);
    s.seed = j.value("seed", s.seed);
    if (j.contains("mcmc")) s.mcmc = mcmc_config_from_json(j.at("mcmc"), s.mcmc);
    if (j.contains("hyper")) s.hyper = hyper_prior_from_json(j.at("hyper"));
    if (j.contains("model")) {
      json merged = to_json(s.model);
      merged.update(j.at("model"));
      s.model = model_spec_from_json(merged);
    }
    if (j.contains("temperature")) {
      const auto& t = j.at("temperature");
      s.temperature.mean = t.value("mean", s.temperature.mean);
      s.temperature.amplitude = t.value("amplitude", s.temperature.amplitude);
      s.temperature.warmest_day_of_year = t.value("warmest_day_of_year", s.temperature.warmest_day_of_year);
      s.temperature.ar_coefficient = t.value("ar_coefficient", s.temperature.ar_coefficient);
      s.temperature.innovation_sd = t.value("innovation_sd", s.temperature.innovation_sd);
    }
    if (j.contains("start")) s.start = parse_date(j.at("start").get<std::string>());
    s.mu_ridge = j.value("mu_ridge", s.mu_ridge);
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("scenario: {}", e.what()));
  }
  s.validate();
  return s;
}

}  // namespace eload
