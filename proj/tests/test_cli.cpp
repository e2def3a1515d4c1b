#include <doctest.h>

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "eload/serialization.hpp"
#include "eload/simulation.hpp"

namespace fs = std::filesystem;

namespace {

// Every case works in its own directory under the system temp dir.
struct Workdir {
  fs::path root;
  explicit Workdir(const std::string& name) : root(fs::temp_directory_path() / ("eload_cli_" + name)) {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workdir() { fs::remove_all(root); }
  [[nodiscard]] std::string operator/(const std::string& leaf) const { return (root / leaf).string(); }
};

int run(const std::string& args, const std::string& stdout_path = "/dev/null") {
  const std::string cmd = std::string(ELOAD_EXE) + " " + args + " > " + stdout_path + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

long count_lines(const std::string& path) {
  const auto text = slurp(path);
  return static_cast<long>(std::count(text.begin(), text.end(), '\n'));
}

const std::string kShort = " --iterations 1500 --burn-in 500";

}  // namespace

TEST_CASE("simulate writes the three datasets and the truth") {
  Workdir w("simulate");
  REQUIRE(run("simulate --out " + (w / "d") + " --seed 4") == 0);
  for (const char* f : {"A.csv", "B.csv", "prediction.csv", "truth.json", "model.json", "manifest.json"}) {
    CHECK(fs::exists(w / (std::string("d/") + f)));
  }
  CHECK(count_lines(w / "d/A.csv") == 1461 + 1);
  CHECK(count_lines(w / "d/B.csv") == 365 + 1);
  const auto truth = eload::read_json_file(w / "d/truth.json");
  CHECK(truth.at("eta_B").size() == 18);
  CHECK(truth.at("prediction_f").size() == 365);

  REQUIRE(run("simulate --out " + (w / "again") + " --seed 4") == 0);
  REQUIRE(run("simulate --out " + (w / "other") + " --seed 5") == 0);
  for (const char* f : {"A.csv", "B.csv", "prediction.csv", "truth.json", "model.json"}) {
    CHECK(slurp(w / (std::string("d/") + f)) == slurp(w / (std::string("again/") + f)));
  }
  CHECK(slurp(w / "d/A.csv") != slurp(w / "other/A.csv"));
}

TEST_CASE("simulate rejects a scenario whose beta leaves the region") {
  Workdir w("badscenario");
  std::ofstream(w / "s.json") << R"({"k_true": {"beta": 2.0}})";
  CHECK(run("simulate " + (w / "s.json") + " --out " + (w / "d")) == 2);
  CHECK_FALSE(fs::exists(w / "d/manifest.json"));
  std::ofstream(w / "broken.json") << R"({"sigma": )";
  CHECK(run("simulate " + (w / "broken.json") + " --out " + (w / "d")) == 2);
}

TEST_CASE("usage errors exit with 2") {
  Workdir w("usage");
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("fit --out x.csv") == 2);
  CHECK(run("fit data.csv --prior flat --out x.csv") == 2);
  CHECK(run("fit data.csv --prior info --out " + (w / "x.csv")) == 2);
  CHECK(run("fit data.csv --mcmc huge --out x.csv") == 2);
  CHECK(run("--help") == 0);
}

TEST_CASE("missing files exit with 4") {
  Workdir w("missing");
  CHECK(run("fit " + (w / "nope.csv") + " --out " + (w / "x.csv")) == 4);
  CHECK(run("transfer " + (w / "nope.csv") + " --out " + (w / "s.json")) == 4);
}

TEST_CASE("fit refuses improper designs with exit code 3") {
  Workdir w("improper");
  REQUIRE(run("simulate --out " + (w / "d")) == 0);
  const auto lines = [&](const std::string& out, int n) {
    std::ifstream in(w / "d/A.csv");
    std::ofstream o(out);
    std::string line;
    for (int i = 0; i <= n && std::getline(in, line); ++i) o << line << "\n";
  };
  // N = 11 = d_alpha + 1 observations.
  lines(w / "tiny.csv", 11);
  const std::string model = " --model " + (w / "d/model.json");
  CHECK(run("fit " + (w / "tiny.csv") + model + " --out " + (w / "t.csv")) == 3);
  CHECK_FALSE(fs::exists(w / "t.csv"));
  // Forty September days are all warmer than the lower threshold bound, so
  // the heating column vanishes there.
  lines(w / "warm.csv", 40);
  CHECK(run("fit " + (w / "warm.csv") + model + " --out " + (w / "t.csv")) == 3);
}

TEST_CASE("transfer, informative fit and predict round trip") {
  Workdir w("roundtrip");
  REQUIRE(run("simulate --out " + (w / "d") + " --seed 2") == 0);
  const std::string model = " --model " + (w / "d/model.json");
  REQUIRE(run("fit " + (w / "d/A.csv") + model + kShort + " --out " + (w / "a.csv"), w / "fit.log") == 0);
  CHECK(count_lines(w / "a.csv") == 1000 + 1);
  const auto log = slurp(w / "fit.log");
  const auto pos = log.find("acceptance rate (u): ");
  REQUIRE(pos != std::string::npos);
  const double rate = std::stod(log.substr(pos + 21));
  CHECK(rate >= 0.0);
  CHECK(rate <= 1.0);
  CHECK(eload::read_json_file(w / "a.json").at("seed") == 1);

  const std::string a_before = slurp(w / "a.csv");
  REQUIRE(run("transfer " + (w / "a.csv") + " --out " + (w / "s.json") + " --min-draws 500") == 0);
  CHECK(slurp(w / "a.csv") == a_before);
  REQUIRE(run("fit " + (w / "d/B.csv") + " --prior info --summary " + (w / "s.json") + model + kShort +
              " --out " + (w / "b.csv")) == 0);
  CHECK(eload::read_json_file(w / "b.json").at("prior") == "info");
  REQUIRE(run("predict " + (w / "b.csv") + " " + (w / "d/prediction.csv") + " --out " + (w / "f.csv") +
              " --intervals") == 0);
  CHECK(count_lines(w / "f.csv") == 365 + 1);

  const auto manifest = eload::read_json_file(w / "f.csv.manifest.json");
  CHECK(manifest.at("command") == "predict");
  for (const auto& out : manifest.at("outputs")) CHECK(fs::exists(out.get<std::string>()));
  CHECK_FALSE(manifest.at("version").get<std::string>().empty());

  // Same seed, same bytes.
  REQUIRE(run("fit " + (w / "d/B.csv") + " --prior info --summary " + (w / "s.json") + model + kShort +
              " --out " + (w / "b2.csv")) == 0);
  CHECK(slurp(w / "b.csv") == slurp(w / "b2.csv"));
  CHECK(slurp(w / "b.json") == slurp(w / "b2.json"));
  REQUIRE(run("predict " + (w / "b.csv") + " " + (w / "d/prediction.csv") + " --out " + (w / "f2.csv") +
              " --intervals") == 0);
  CHECK(slurp(w / "f.csv") == slurp(w / "f2.csv"));
  REQUIRE(run("fit " + (w / "d/B.csv") + " --prior info --summary " + (w / "s.json") + model + kShort +
              " --seed 9 --out " + (w / "b3.csv")) == 0);
  CHECK(slurp(w / "b.csv") != slurp(w / "b3.csv"));
}

TEST_CASE("report aggregates a replication table") {
  Workdir w("report");
  std::vector<eload::ReplicationRow> rows(6);
  for (int i = 0; i < 6; ++i) {
    auto& r = rows[static_cast<std::size_t>(i)];
    r.replicate = i;
    r.scenario = "ideal";
    r.crit_info = r.crit_noninfo = 2.0;
    r.ratio = 1.0;
    r.k_post = eload::VectorXd::Ones(2);
    r.seed = static_cast<std::uint64_t>(i);
  }
  eload::save_replication_table(w / "t.csv", rows);
  REQUIRE(run("report " + (w / "t.csv") + " --out " + (w / "r.csv"), w / "r.log") == 0);
  CHECK(slurp(w / "r.log").find("mean ratio 1.0000") != std::string::npos);

  for (int i = 0; i < 6; ++i) rows[static_cast<std::size_t>(i)].ratio = 0.3 + 0.17 * ((i * 5) % 6);
  eload::save_replication_table(w / "t.csv", rows);
  REQUIRE(run("report " + (w / "t.csv") + " --out " + (w / "r.csv")) == 0);
  std::ifstream in(w / "r.csv");
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  std::vector<std::string> cells;
  std::stringstream ss(line);
  for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
  REQUIRE(cells.size() == 12);
  const double q05 = std::stod(cells[4]), q80 = std::stod(cells[5]), q90 = std::stod(cells[6]),
               q95 = std::stod(cells[7]);
  CHECK(q05 <= q80);
  CHECK(q80 <= q90);
  CHECK(q90 <= q95);
  CHECK(fs::exists(w / "r.csv.manifest.json"));
}

TEST_CASE("replicate runs a tiny study deterministically") {
  Workdir w("replicate");
  std::ofstream(w / "s.json")
      << R"({"name": "tiny", "replications": 2, "mcmc": {"iterations": 600, "burn_in": 200, "adapt_window": 100}})";
  REQUIRE(run("replicate " + (w / "s.json") + " --out " + (w / "t1.csv") + " --jobs 2") == 0);
  REQUIRE(run("replicate " + (w / "s.json") + " --out " + (w / "t2.csv")) == 0);
  CHECK(slurp(w / "t1.csv") == slurp(w / "t2.csv"));
  CHECK(count_lines(w / "t1.csv") == 3);
  REQUIRE(run("report " + (w / "t1.csv")) == 0);
}
