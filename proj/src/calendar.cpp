#include "eload/calendar.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "eload/error.hpp"

namespace eload {

namespace chr = std::chrono;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    while (!field.empty() && field.front() == ' ') field.erase(field.begin());
    fields.push_back(field);
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

template <typename T>
bool parse_number(const std::string& text, T& out) {
  if (text.empty()) return false;
  if constexpr (std::is_floating_point_v<T>) {
    // strtod accepts forms from_chars in libstdc++ 11 handles identically,
    // but keeps "nan"/"inf" out explicitly.
    char* end = nullptr;
    out = std::strtod(text.c_str(), &end);
    return end == text.c_str() + text.size() && std::isfinite(out);
  } else {
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
  }
}

}  // namespace

Date parse_date(const std::string& text) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-' ||
      !parse_number(text.substr(0, 4), y) || !parse_number(text.substr(5, 2), m) ||
      !parse_number(text.substr(8, 2), d)) {
    throw ValidationError(fmt::format("malformed date '{}' (expected YYYY-MM-DD)", text));
  }
  const Date date{chr::year{y}, chr::month{m}, chr::day{d}};
  if (!date.ok()) throw ValidationError(fmt::format("invalid calendar date '{}'", text));
  return date;
}

std::string format_date(const Date& date) {
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(date.year()),
                     static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
}

long days_between(const Date& from, const Date& to) {
  return (chr::sys_days{to} - chr::sys_days{from}).count();
}

Date add_days(const Date& date, long days) { return Date{chr::sys_days{date} + chr::days{days}}; }

void ModelSpec::validate() const {
  if (fourier_order < 1) throw ValidationError("Fourier order must be >= 1");
  if (offset_periods < 1) throw ValidationError("need at least one offset period");
  if (daytypes < 2) throw ValidationError("need at least two daytypes");
  if (!(u_lo < u_hi)) {
    throw ValidationError(fmt::format("threshold bounds must satisfy u_lo < u_hi ({} vs {})",
                                      u_lo, u_hi));
  }
  if (!(period_days > 0.0)) throw ValidationError("period_days must be positive");
}

void ModelSpec::check_support(const VectorXd& temperatures) const {
  if (temperatures.size() == 0) throw ValidationError("no temperatures");
  const double lo = temperatures.minCoeff();
  const double hi = temperatures.maxCoeff();
  if (!(lo < u_lo && u_hi < hi)) {
    throw ValidationError(fmt::format(
        "threshold bounds [{}, {}] must lie strictly inside the observed temperature range "
        "({}, {})",
        u_lo, u_hi, lo, hi));
  }
}

std::vector<SeriesRecord> parse_series(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(fmt::format("{}: empty file", source));
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
  const auto header = split_csv_line(line);
  const std::vector<std::string> required = {"date",    "load",          "temperature",
                                             "daytype", "offset_period", "excluded"};
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[header[i]] = i;
  for (const auto& name : required) {
    if (!column.contains(name)) {
      throw ValidationError(fmt::format("{}: missing column '{}'", source, name));
    }
  }

  std::vector<SeriesRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    auto fail = [&](const std::string& why) {
      return ValidationError(fmt::format("{}:{}: {}", source, line_no, why));
    };
    if (fields.size() != header.size()) {
      throw fail(fmt::format("expected {} fields, got {}", header.size(), fields.size()));
    }
    SeriesRecord rec;
    try {
      rec.day.date = parse_date(fields[column["date"]]);
    } catch (const ValidationError& e) {
      throw fail(e.what());
    }
    int excluded = 0;
    if (!parse_number(fields[column["excluded"]], excluded) || (excluded != 0 && excluded != 1)) {
      throw fail("excluded must be 0 or 1");
    }
    rec.day.excluded = excluded == 1;
    if (!parse_number(fields[column["daytype"]], rec.day.daytype) || rec.day.daytype < 1) {
      throw fail("daytype must be a positive integer");
    }
    if (!parse_number(fields[column["offset_period"]], rec.day.offset_period) ||
        rec.day.offset_period < 1) {
      throw fail("offset_period must be a positive integer");
    }
    if (!parse_number(fields[column["temperature"]], rec.temperature)) {
      throw fail("temperature must be a finite number");
    }
    const auto& load = fields[column["load"]];
    if (load.empty()) {
      if (!rec.day.excluded) throw fail("empty load on a day that is not excluded");
      rec.load = std::numeric_limits<double>::quiet_NaN();
    } else if (!parse_number(load, rec.load)) {
      throw fail("load must be a finite number");
    }
    if (!records.empty()) {
      const auto& prev = records.back().day.date;
      if (rec.day.date == prev) {
        throw fail(fmt::format("duplicate date {}", format_date(rec.day.date)));
      }
      if (rec.day.date < prev) {
        throw fail(fmt::format("non-monotone dates: {} after {}", format_date(rec.day.date),
                               format_date(prev)));
      }
    }
    records.push_back(rec);
  }
  return records;
}

std::vector<SeriesRecord> load_series(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  return parse_series(in, path);
}

void write_series(std::ostream& out, std::span<const SeriesRecord> records) {
  out << "date,load,temperature,daytype,offset_period,excluded\n";
  for (const auto& r : records) {
    const std::string load = std::isfinite(r.load) ? fmt::format("{}", r.load) : std::string{};
    out << fmt::format("{},{},{},{},{},{}\n", format_date(r.day.date), load, r.temperature,
                       r.day.daytype, r.day.offset_period, r.day.excluded ? 1 : 0);
  }
}

void save_series(const std::string& path, std::span<const SeriesRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path));
  write_series(out, records);
  if (!out) throw IoError(fmt::format("write to '{}' failed", path));
}

DesignSet build_design(std::span<const SeriesRecord> records, const ModelSpec& spec) {
  spec.validate();
  std::vector<SeriesRecord> kept(records.begin(), records.end());
  std::stable_sort(kept.begin(), kept.end(), [](const SeriesRecord& a, const SeriesRecord& b) {
    return a.day.date < b.day.date;
  });
  for (std::size_t i = 1; i < kept.size(); ++i) {
    if (kept[i].day.date == kept[i - 1].day.date) {
      throw ValidationError(fmt::format("duplicate date {}", format_date(kept[i].day.date)));
    }
  }
  std::erase_if(kept, [](const SeriesRecord& r) { return r.day.excluded; });
  if (kept.empty()) throw ValidationError("empty dataset after exclusion");

  const auto n = static_cast<Eigen::Index>(kept.size());
  const int d11 = spec.fourier_order;
  const int d12 = spec.offset_periods;
  const int d2 = spec.daytypes;

  std::vector<int> coverage(static_cast<std::size_t>(d2) + 1, 0);
  for (const auto& r : kept) {
    if (r.day.daytype > d2) {
      throw ValidationError(fmt::format("{}: daytype {} outside 1..{}",
                                        format_date(r.day.date), r.day.daytype, d2));
    }
    if (r.day.offset_period > d12) {
      throw ValidationError(fmt::format("{}: offset period {} outside 1..{}",
                                        format_date(r.day.date), r.day.offset_period, d12));
    }
    if (!std::isfinite(r.load)) {
      throw ValidationError(fmt::format("{}: missing load", format_date(r.day.date)));
    }
    ++coverage[static_cast<std::size_t>(r.day.daytype)];
  }
  for (int j = 1; j <= d2; ++j) {
    if (coverage[static_cast<std::size_t>(j)] == 0) {
      throw ValidationError(fmt::format("daytype {} never observed", j));
    }
  }

  DesignSet design;
  design.spec = spec;
  if (!design.spec.origin) design.spec.origin = kept.front().day.date;
  const Date origin = *design.spec.origin;

  design.y.resize(n);
  design.T.resize(n);
  design.C.resize(n);
  design.A.resize(n, 2 * d11 + d12);
  design.B.setZero(n, d2 - 1);
  design.A.setZero();
  design.dates.reserve(kept.size());
  design.daytypes.reserve(kept.size());

  const double omega = 2.0 * std::numbers::pi / spec.period_days;
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& r = kept[static_cast<std::size_t>(t)];
    design.y(t) = r.load;
    design.T(t) = r.temperature;
    const auto day_index = static_cast<double>(days_between(origin, r.day.date));
    for (int j = 1; j <= d11; ++j) {
      design.A(t, 2 * (j - 1)) = std::cos(omega * j * day_index);
      design.A(t, 2 * (j - 1) + 1) = std::sin(omega * j * day_index);
    }
    design.A(t, 2 * d11 + r.day.offset_period - 1) = 1.0;
    if (r.day.daytype == d2) {
      design.B.row(t).setConstant(-1.0);
      design.C(t) = 1.0;
    } else {
      design.B(t, r.day.daytype - 1) = 1.0;
      design.C(t) = 0.0;
    }
    design.dates.push_back(r.day.date);
    design.daytypes.push_back(r.day.daytype);
  }
  if (spec.cooling_threshold) {
    design.A = add_cooling_regressor(design.A, design.T, *spec.cooling_threshold);
  }
  return design;
}

MatrixXd add_cooling_regressor(const MatrixXd& A, const VectorXd& T, double u_c) {
  if (A.rows() != T.size()) {
    throw ValidationError(
        fmt::format("cooling regressor: A has {} rows, T has {}", A.rows(), T.size()));
  }
  MatrixXd out(A.rows(), A.cols() + 1);
  out.leftCols(A.cols()) = A;
  for (Eigen::Index t = 0; t < T.size(); ++t) {
    out(t, A.cols()) = T(t) >= u_c ? T(t) - u_c : 0.0;
  }
  return out;
}

VectorXd smooth_temperature(const VectorXd& T, double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) {
    throw ValidationError(fmt::format("smoothing coefficient {} outside (0, 1]", lambda));
  }
  if (T.size() == 0) throw ValidationError("cannot smooth an empty series");
  VectorXd s(T.size());
  s(0) = T(0);
  for (Eigen::Index t = 1; t < T.size(); ++t) s(t) = lambda * T(t) + (1.0 - lambda) * s(t - 1);
  return s;
}

VectorXd normal_temperatures(std::span<const SeriesRecord> history,
                             std::span<const Date> target_dates) {
  std::map<std::pair<unsigned, unsigned>, std::pair<double, int>> pools;
  for (const auto& r : history) {
    auto& pool = pools[{static_cast<unsigned>(r.day.date.month()),
                        static_cast<unsigned>(r.day.date.day())}];
    pool.first += r.temperature;
    pool.second += 1;
  }
  VectorXd out(static_cast<Eigen::Index>(target_dates.size()));
  for (std::size_t i = 0; i < target_dates.size(); ++i) {
    const auto& d = target_dates[i];
    std::pair<unsigned, unsigned> key{static_cast<unsigned>(d.month()),
                                      static_cast<unsigned>(d.day())};
    auto it = pools.find(key);
    if (it == pools.end() && key == std::pair<unsigned, unsigned>{2U, 29U}) {
      it = pools.find({2U, 28U});
    }
    if (it == pools.end()) {
      throw ValidationError(
          fmt::format("no temperature history for calendar day {:02d}-{:02d}", key.first,
                      key.second));
    }
    out(static_cast<Eigen::Index>(i)) = it->second.first / it->second.second;
  }
  return out;
}

bool RankReport::any_flagged() const {
  return std::any_of(entries.begin(), entries.end(),
                     [](const RankDiagnostic& e) { return e.flagged; });
}

double RankReport::worst() const {
  double w = std::numeric_limits<double>::infinity();
  for (const auto& e : entries) w = std::min(w, e.smallest_singular_value);
  return w;
}

RankReport rank_check(const DesignSet& design, std::span<const RankGridPoint> grid) {
  RankReport report;
  const auto n = design.size();
  const auto da = design.A.cols();
  MatrixXd astar(n, da + 1);
  for (const auto& point : grid) {
    if (point.beta.size() != design.B.cols()) {
      throw ValidationError("rank grid beta has the wrong dimension");
    }
    const VectorXd shape = design.B * point.beta + design.C;
    astar.leftCols(da) = shape.asDiagonal() * design.A;
    for (Eigen::Index t = 0; t < n; ++t) {
      astar(t, da) = design.T(t) <= point.u ? design.T(t) - point.u : 0.0;
    }
    double smallest = 0.0;
    if (n >= da + 1) {
      Eigen::BDCSVD<MatrixXd> svd(astar);
      smallest = svd.singularValues().minCoeff();
    }
    report.entries.push_back({point, smallest, smallest < report.threshold});
  }
  return report;
}

std::vector<RankGridPoint> default_rank_grid(const ModelSpec& spec, int n_beta, int n_u) {
  std::vector<RankGridPoint> grid;
  const int db = spec.d_beta();
  for (int i = 1; i <= n_beta; ++i) {
    const double scale = static_cast<double>(i) / n_beta;
    const VectorXd beta = VectorXd::Constant(db, scale / spec.daytypes);
    for (int j = 0; j < n_u; ++j) {
      const double u =
          n_u == 1 ? 0.5 * (spec.u_lo + spec.u_hi)
                   : spec.u_lo + (spec.u_hi - spec.u_lo) * static_cast<double>(j) / (n_u - 1);
      grid.push_back({beta, u});
    }
  }
  return grid;
}

}  // namespace eload
