// eload: simulate, fit, transfer, predict, replicate and report from the
// command line. Every command leaves a JSON run manifest next to its outputs.

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eload/error.hpp"
#include "eload/forecast.hpp"
#include "eload/inference.hpp"
#include "eload/serialization.hpp"
#include "eload/simulation.hpp"
#include "eload/transfer.hpp"

#ifndef ELOAD_VERSION
#define ELOAD_VERSION "unknown"
#endif

using namespace eload;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", now);
}

class Manifest {
public:
  Manifest(std::string command, int argc, char** argv)
      : command_(std::move(command)), started_(utc_now()) {
    for (int i = 0; i < argc; ++i) argv_.emplace_back(argv[i]);
  }

  void config(const std::string& key, json value) { config_[key] = std::move(value); }
  void input(const std::string& path) { inputs_.push_back(path); }
  void output(const std::string& path) { outputs_.push_back(path); }
  void seed(std::uint64_t s) { seed_ = s; }

  // Called after the outputs exist; refuses to name a missing file.
  void write(const std::string& path) const {
    for (const auto& out : outputs_) {
      if (!fs::exists(out)) throw IoError(fmt::format("manifest output '{}' was not written", out));
    }
    json j{{"command", command_},
           {"argv", argv_},
           {"config", config_},
           {"seed", seed_ ? json(*seed_) : json(nullptr)},
           {"inputs", inputs_},
           {"outputs", outputs_},
           {"started", started_},
           {"finished", utc_now()},
           {"version", ELOAD_VERSION}};
    write_text_atomically(path, j.dump(2) + "\n");
  }

private:
  std::string command_;
  std::vector<std::string> argv_;
  json config_ = json::object();
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  std::optional<std::uint64_t> seed_;
  std::string started_;
};

std::string manifest_for(const std::string& explicit_path, const std::string& output) {
  return explicit_path.empty() ? output + ".manifest.json" : explicit_path;
}

ScenarioSpec load_scenario(const std::string& path) {
  return path.empty() ? ScenarioSpec::defaults() : scenario_from_json(read_json_file(path));
}

json truth_json(const ScenarioSpec& s, const ScenarioData& d) {
  const VectorXd a = d.eta_A.pack(), b = d.eta_B.pack();
  return json{{"eta_A", std::vector<double>(a.data(), a.data() + a.size())},
              {"eta_B", std::vector<double>(b.data(), b.data() + b.size())},
              {"sigma", s.sigma},
              {"prediction_f", std::vector<double>(d.prediction_truth.data(),
                                                   d.prediction_truth.data() + d.prediction_truth.size())}};
}

struct Common {
  std::string manifest;
};

// simulate ------------------------------------------------------------------

struct SimulateArgs {
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  int replicate = 0;
};

void cmd_simulate(const SimulateArgs& a, const Common& c, Manifest& m) {
  auto s = load_scenario(a.scenario);
  if (a.seed) s.seed = *a.seed;
  if (a.replicate < 0) throw ValidationError("--replicate must be non-negative");
  const VectorXd temps = scenario_temperatures(s);
  const auto data = replicate_data(s, temps, a.replicate);
  ModelSpec spec = s.model;
  spec.origin = s.start;

  fs::create_directories(a.out);
  const auto at = [&](const char* name) { return (fs::path(a.out) / name).string(); };
  save_series(at("A.csv"), data.long_set);
  save_series(at("B.csv"), data.short_set);
  save_series(at("prediction.csv"), data.prediction_set);
  write_text_atomically(at("truth.json"), truth_json(s, data).dump(2) + "\n");
  write_text_atomically(at("model.json"), to_json(spec).dump(2) + "\n");
  for (const char* f : {"A.csv", "B.csv", "prediction.csv", "truth.json", "model.json"}) m.output(at(f));
  if (!a.scenario.empty()) m.input(a.scenario);
  m.config("scenario", to_json(s));
  m.config("replicate", a.replicate);
  m.seed(s.seed);
  fmt::print("wrote {} ({} + {} + {} days)\n", a.out, data.long_set.size(), data.short_set.size(),
             data.prediction_set.size());
  m.write(c.manifest.empty() ? at("manifest.json") : c.manifest);
}

// fit -----------------------------------------------------------------------

struct FitArgs {
  std::string data;
  std::string prior = "noninfo";
  std::string summary;
  std::string mcmc = "desk";
  std::string model;
  std::string hyper;
  std::string origin;
  std::optional<long> iterations;
  std::optional<long> burn_in;
  std::uint64_t seed = 1;
  double mu_ridge = 0.0;
  std::string out;
};

void cmd_fit(const FitArgs& a, const Common& c, Manifest& m) {
  if (a.prior == "info" && a.summary.empty()) {
    throw ValidationError("--prior info requires --summary");
  }
  if (a.prior == "noninfo" && !a.summary.empty()) {
    throw ValidationError("--summary is only used with --prior info");
  }
  McmcConfig cfg = McmcConfig::preset(a.mcmc);
  if (a.iterations) cfg.iterations = *a.iterations;
  if (a.burn_in) cfg.burn_in = *a.burn_in;
  if (a.iterations && !a.burn_in) cfg.burn_in = std::min(cfg.burn_in, cfg.iterations / 10);
  cfg.adapt_window = std::min(cfg.adapt_window, cfg.burn_in);
  cfg.seed = a.seed;
  cfg.validate();

  ModelSpec spec = a.model.empty() ? ModelSpec{} : model_spec_from_json(read_json_file(a.model));
  if (!a.origin.empty()) spec.origin = parse_date(a.origin);

  std::optional<PosteriorSummary> summary;
  if (!a.summary.empty()) {
    summary = load_summary(a.summary);
    if (!spec.origin && summary->origin) spec.origin = summary->origin;
    check_compatible(*summary, spec);
    m.input(a.summary);
  }
  spec.validate();

  const auto records = load_series(a.data);
  const DesignSet design = build_design(records, spec);
  m.input(a.data);
  if (!a.model.empty()) m.input(a.model);
  try {
    spec.check_support(design.T);
  } catch (const ValidationError& e) {
    fmt::print(stderr, "warning: {}\n", e.what());
  }

  HyperPriorConfig hyper;
  if (!a.hyper.empty()) {
    hyper = hyper_prior_from_json(read_json_file(a.hyper));
    m.input(a.hyper);
  }
  const Chain chain = summary ? fit(design, InformativePrior(*summary, hyper, a.mu_ridge), cfg)
                              : fit(design, NonInformativePrior{}, cfg);
  save_chain(a.out, chain);
  m.output(a.out);
  m.output(sidecar_path(a.out));
  m.config("prior", a.prior);
  m.config("mcmc", to_json(cfg));
  m.config("model", to_json(design.spec));
  if (summary) {
    m.config("hyper", to_json(hyper));
    m.config("mu_ridge", a.mu_ridge);
  }
  m.seed(a.seed);
  fmt::print("kept draws: {}\n", chain.draws.size());
  fmt::print("acceptance rate (u): {:.4f}\n", chain.acceptance_rate_u);
  if (chain.fallback_draws > 0) fmt::print("beta fallback draws: {}\n", chain.fallback_draws);
  m.write(manifest_for(c.manifest, a.out));
}

// transfer ------------------------------------------------------------------

struct TransferArgs {
  std::string chain;
  std::string out;
  long min_draws = 1000;
  std::string dataset_id = "A";
};

void cmd_transfer(const TransferArgs& a, const Common& c, Manifest& m) {
  const Chain chain = load_chain(a.chain);
  const auto result = summarize(chain, {a.min_draws, a.dataset_id});
  for (const auto& w : result.warnings) fmt::print(stderr, "warning: {}\n", w);
  save_summary(a.out, result.summary);
  m.input(a.chain);
  m.output(a.out);
  m.config("min_draws", a.min_draws);
  m.config("dataset_id", a.dataset_id);
  fmt::print("summary of {} draws, d = {}\n", result.summary.iterations, result.summary.mu.size());
  m.write(manifest_for(c.manifest, a.out));
}

// predict -------------------------------------------------------------------

struct PredictArgs {
  std::string chain;
  std::string future;
  std::string out;
  bool intervals = false;
  std::uint64_t seed = 1;
};

void cmd_predict(const PredictArgs& a, const Common& c, Manifest& m) {
  const Chain chain = load_chain(a.chain);
  const auto records = load_series(a.future);
  const DesignSet design = build_design(records, chain.spec);
  PredictOptions opt;
  if (a.intervals) opt.draw_seed = a.seed;
  const auto forecast = predict(chain, design, opt);
  save_forecast(a.out, forecast);
  m.input(a.chain);
  m.input(a.future);
  m.output(a.out);
  m.config("intervals", a.intervals);
  if (a.intervals) m.seed(a.seed);
  fmt::print("horizon: {} days\n", forecast.horizon());
  if (design.y.allFinite()) {
    fmt::print("RMSE: {:.4f}\n", rmse(design.y, forecast.point));
    try {
      fmt::print("MAPE: {:.4f}%\n", mape(design.y, forecast.point));
    } catch (const ValidationError&) {
      fmt::print("MAPE: undefined (zero load)\n");
    }
  }
  m.write(manifest_for(c.manifest, a.out));
}

// replicate -----------------------------------------------------------------

struct ReplicateArgs {
  std::string scenario;
  std::string out;
  int jobs = 1;
  std::optional<std::uint64_t> seed;
  std::optional<int> replications;
};

void print_aggregate(const std::string& name, const ReplicationAggregate& g) {
  fmt::print("{}: {} rows ({} failed), mean ratio {:.4f}, quantiles 5% {:.4f} 80% {:.4f} 90% {:.4f} 95% {:.4f}, "
             "mean q {:.4f}, median r {:.4g}, coverage90 {:.3f}\n",
             name, g.rows, g.failed, g.mean_ratio, g.q05_ratio, g.q80_ratio, g.q90_ratio,
             g.q95_ratio, g.mean_q, g.median_r, g.mean_coverage90);
}

void cmd_replicate(const ReplicateArgs& a, const Common& c, Manifest& m) {
  auto s = load_scenario(a.scenario);
  if (a.seed) s.seed = *a.seed;
  if (a.replications) s.replications = *a.replications;
  if (a.jobs < 1) throw ValidationError("--jobs must be at least 1");
  s.validate();
  const auto rows = run_replications(s, a.jobs);
  save_replication_table(a.out, rows);
  if (!a.scenario.empty()) m.input(a.scenario);
  m.output(a.out);
  m.config("scenario", to_json(s));
  m.seed(s.seed);
  int failed = 0;
  for (const auto& r : rows) failed += r.ok() ? 0 : 1;
  if (failed < static_cast<int>(rows.size())) print_aggregate(s.name, aggregate(rows));
  if (failed > 0) fmt::print(stderr, "warning: {} of {} replicates failed\n", failed, rows.size());
  m.write(manifest_for(c.manifest, a.out));
}

// report --------------------------------------------------------------------

struct ReportArgs {
  std::string table;
  std::string out;
};

void cmd_report(const ReportArgs& a, const Common& c, Manifest& m) {
  const auto rows = load_replication_table(a.table);
  std::map<std::string, std::vector<ReplicationRow>> by_scenario;
  for (const auto& r : rows) by_scenario[r.scenario].push_back(r);
  std::string csv = "scenario,rows,failed,mean_ratio,q05,q80,q90,q95,mean_q,mean_r,median_r,coverage90\n";
  for (const auto& [name, group] : by_scenario) {
    const auto g = aggregate(group);
    print_aggregate(name, g);
    csv += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", name, g.rows, g.failed, g.mean_ratio,
                       g.q05_ratio, g.q80_ratio, g.q90_ratio, g.q95_ratio, g.mean_q, g.mean_r,
                       g.median_r, g.mean_coverage90);
  }
  m.input(a.table);
  if (!a.out.empty()) {
    write_text_atomically(a.out, csv);
    m.output(a.out);
    m.write(manifest_for(c.manifest, a.out));
  } else if (!c.manifest.empty()) {
    m.write(c.manifest);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian daily electricity load model with prior transfer"};
  app.set_version_flag("--version", ELOAD_VERSION);
  app.require_subcommand(1);
  Common common;

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Synthetic long, short and prediction datasets");
  simulate->add_option("scenario", sim.scenario, "Scenario JSON (defaults when omitted)")->check(CLI::ExistingFile);
  simulate->add_option("--out", sim.out, "Output directory")->required();
  simulate->add_option("--seed", sim.seed, "Overrides the scenario seed");
  simulate->add_option("--replicate", sim.replicate, "Replicate whose noise stream is used");

  FitArgs fa;
  auto* fitc = app.add_subcommand("fit", "Run the MCMC sampler on a daily series");
  fitc->add_option("data", fa.data, "Series CSV")->required();
  fitc->add_option("--prior", fa.prior)->check(CLI::IsMember({"noninfo", "info"}));
  fitc->add_option("--summary", fa.summary, "Long-dataset summary (informative prior)");
  fitc->add_option("--mcmc", fa.mcmc, "Iteration preset")->check(CLI::IsMember({"desk", "paper"}));
  fitc->add_option("--iterations", fa.iterations, "Total iterations, overriding the preset");
  fitc->add_option("--burn-in", fa.burn_in, "Burn-in, overriding the preset");
  fitc->add_option("--model", fa.model, "Model specification JSON");
  fitc->add_option("--hyper", fa.hyper, "Hyperprior JSON");
  fitc->add_option("--origin", fa.origin, "Phase origin of the Fourier terms (YYYY-MM-DD)");
  fitc->add_option("--mu-ridge", fa.mu_ridge, "Floor on |mu_A| coordinates");
  fitc->add_option("--seed", fa.seed);
  fitc->add_option("--out", fa.out, "Chain CSV")->required();

  TransferArgs ta;
  auto* transfer = app.add_subcommand("transfer", "Summarize a non-informative chain as a prior");
  transfer->add_option("chain", ta.chain)->required();
  transfer->add_option("--out", ta.out)->required();
  transfer->add_option("--min-draws", ta.min_draws);
  transfer->add_option("--dataset-id", ta.dataset_id);

  PredictArgs pa;
  auto* predictc = app.add_subcommand("predict", "Posterior predictive mean on future days");
  predictc->add_option("chain", pa.chain)->required();
  predictc->add_option("future", pa.future, "Series CSV of the horizon")->required();
  predictc->add_option("--out", pa.out)->required();
  predictc->add_flag("--intervals", pa.intervals, "Add 5% and 95% predictive quantiles");
  predictc->add_option("--seed", pa.seed);

  ReplicateArgs ra;
  auto* replicate = app.add_subcommand("replicate", "Replication study of one scenario");
  replicate->add_option("scenario", ra.scenario)->check(CLI::ExistingFile);
  replicate->add_option("--out", ra.out)->required();
  replicate->add_option("--jobs", ra.jobs);
  replicate->add_option("--seed", ra.seed);
  replicate->add_option("--replications", ra.replications);

  ReportArgs rp;
  auto* report = app.add_subcommand("report", "Aggregate a replication table");
  report->add_option("table", rp.table)->required();
  report->add_option("--out", rp.out, "CSV of the aggregates");

  for (auto* sub : {simulate, fitc, transfer, predictc, replicate, report}) {
    sub->add_option("--manifest", common.manifest, "Run manifest path");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    Manifest m(name, argc, argv);
    if (name == "simulate") cmd_simulate(sim, common, m);
    else if (name == "fit") cmd_fit(fa, common, m);
    else if (name == "transfer") cmd_transfer(ta, common, m);
    else if (name == "predict") cmd_predict(pa, common, m);
    else if (name == "replicate") cmd_replicate(ra, common, m);
    else cmd_report(rp, common, m);
  } catch (const ValidationError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const NumericalError& e) {
    fmt::print(stderr, "numerical error: {}\n", e.what());
    return 3;
  } catch (const IoError& e) {
    fmt::print(stderr, "I/O error: {}\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
