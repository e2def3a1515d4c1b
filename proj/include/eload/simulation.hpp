#pragma once

// Synthetic long/short datasets with known parameters and the replication
// engine comparing informative and non-informative fits on the short one.

#include <Eigen/Dense>

#include <cstdint>
#include <json.hpp>
#include <span>
#include <string>
#include <vector>

#include "eload/calendar.hpp"
#include "eload/inference.hpp"
#include "eload/model.hpp"

namespace eload {

/// Multipliers taking the long dataset's parameters to the short one's.
/// Only the first beta coordinate is scaled.
struct SimilarityFactors {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  double u = 1.0;
};

/// Daily temperature: mean + amplitude cos(2 pi (t - t_warmest) / 365.25)
/// plus an AR(1) anomaly.
struct TemperatureConfig {
  double mean = 12.0;
  double amplitude = 8.0;
  int warmest_day_of_year = 201;  ///< 1-based, July 20 in non-leap years
  double ar_coefficient = 0.8;
  double innovation_sd = 2.0;
};

struct ScenarioSpec {
  std::string name = "ideal";
  Eta eta_A;
  double sigma = 2.0;
  SimilarityFactors k_true;
  int years_A = 4;
  int years_B = 1;
  int replications = 30;
  McmcConfig mcmc;
  HyperPriorConfig hyper;
  ModelSpec model;
  TemperatureConfig temperature;
  Date start = Date{std::chrono::year{1996}, std::chrono::September, std::chrono::day{1}};
  std::uint64_t seed = 1;
  double mu_ridge = 0.0;

  /// Default truth, default model, desk MCMC preset.
  static ScenarioSpec defaults();
  void validate() const;
};

/// sigma = 2, alpha = (27, 7, -3, 1, 5, -1, 4, 0.5, 490, 495),
/// beta = (0.13, 0.15, 0.16, 0.16, 0.16, 0.13), gamma = -3, u = 14.
Eta default_truth();

/// d11 = 4, d12 = 2, d2 = 7, u in [5, 19].
ModelSpec default_model_spec();

/// alpha scaled by k.alpha, beta_1 by k.beta, gamma by k.gamma, u by k.u.
/// Throws ValidationError when the scaled beta leaves the positive l1 ball.
Eta scale_truth(const Eta& eta_A, const SimilarityFactors& k);

/// Consecutive days from `start`: daytype = ISO weekday (Monday 1 ..
/// Sunday 7); offset period 2 between the last Sundays of March and
/// October, 1 otherwise (with two periods; a single period maps to 1).
std::vector<CalendarDay> make_calendar(const Date& start, long n_days, int offset_periods = 2);

/// Days in `years` calendar years starting at `start`.
long days_in_years(const Date& start, int years);

VectorXd synth_temperature(std::span<const Date> dates, const TemperatureConfig& cfg, Rng& rng);

/// y = f(eta) + sigma z on the calendar, z iid N(0, 1).
std::vector<SeriesRecord> simulate(const Eta& eta, const VectorXd& temperatures,
                                   std::span<const CalendarDay> calendar, double sigma,
                                   const ModelSpec& spec, Rng& rng);

/// The three datasets of one replicate plus the truth on the prediction year.
struct ScenarioData {
  std::vector<SeriesRecord> long_set;
  std::vector<SeriesRecord> short_set;
  std::vector<SeriesRecord> prediction_set;  ///< normal temperatures
  VectorXd prediction_truth;                 ///< f(eta_B) on the prediction year
  Eta eta_A;
  Eta eta_B;
};

/// Temperatures of the long and short periods. Fixed per scenario seed, so
/// every replicate sees the same weather and only the noise is redrawn.
VectorXd scenario_temperatures(const ScenarioSpec& scenario);

ScenarioData generate_data(const ScenarioSpec& scenario, const VectorXd& temperatures,
                           Rng& noise_rng);

/// The data of replicate `index`, drawn from that replicate's noise stream.
ScenarioData replicate_data(const ScenarioSpec& scenario, const VectorXd& temperatures, int index);

struct ReplicationRow {
  int replicate = 0;
  std::string scenario;
  double crit_info = 0.0;
  double crit_noninfo = 0.0;
  double ratio = 0.0;
  VectorXd k_post;
  double l_post = 0.0;
  double q_post = 0.0;
  double r_post = 0.0;
  std::uint64_t seed = 0;
  /// Fraction of eta_B coordinates inside the informative fit's central
  /// 90% credible intervals.
  double coverage90 = 0.0;
  std::string status = "ok";

  [[nodiscard]] bool ok() const { return status == "ok"; }
};

/// Seed of replicate `index`: split_seed(scenario.seed, index).
std::uint64_t replicate_seed(const ScenarioSpec& scenario, int index);

ReplicationRow run_replicate(const ScenarioSpec& scenario, const VectorXd& temperatures,
                             int index);

/// Runs every replicate on `jobs` worker threads; rows are returned in
/// replicate order whatever the scheduling. Failures are recorded in the
/// row status.
std::vector<ReplicationRow> run_replications(const ScenarioSpec& scenario, int jobs = 1);

struct ReplicationAggregate {
  int rows = 0;
  int failed = 0;
  double mean_ratio = 0.0;
  double q05_ratio = 0.0;
  double q80_ratio = 0.0;
  double q90_ratio = 0.0;
  double q95_ratio = 0.0;
  double mean_q = 0.0;
  double mean_r = 0.0;
  double median_r = 0.0;
  double mean_coverage90 = 0.0;
};

ReplicationAggregate aggregate(std::span<const ReplicationRow> rows);

void save_replication_table(const std::string& path, std::span<const ReplicationRow> rows);
std::vector<ReplicationRow> load_replication_table(const std::string& path);

nlohmann::json to_json(const ScenarioSpec& scenario);
ScenarioSpec scenario_from_json(const nlohmann::json& j);

}  // namespace eload
