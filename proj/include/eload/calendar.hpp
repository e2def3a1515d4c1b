#pragma once

// Daily series ingestion, calendar partitions and construction of the
// design matrices A, B, C, T for one instant of the day.

#include <Eigen/Dense>

#include <chrono>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace eload {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Date = std::chrono::year_month_day;

/// Parses YYYY-MM-DD; throws ValidationError on anything else.
Date parse_date(const std::string& text);
std::string format_date(const Date& date);
/// Signed number of days from `from` to `to`.
long days_between(const Date& from, const Date& to);
Date add_days(const Date& date, long days);

struct CalendarDay {
  Date date;
  int daytype = 1;        ///< shape partition index, 1..d2
  int offset_period = 1;  ///< level partition index, 1..d12
  bool excluded = false;  ///< removed from estimation (tariff days, holidays)
};

struct SeriesRecord {
  CalendarDay day;
  double load = 0.0;  ///< MW; NaN on excluded days with no observation
  double temperature = 0.0;
};

struct ModelSpec {
  int fourier_order = 4;   ///< d11
  int offset_periods = 2;  ///< d12
  int daytypes = 7;        ///< d2; the last daytype is the reference
  double u_lo = 4.0;
  double u_hi = 22.0;
  std::optional<double> cooling_threshold;
  double period_days = 365.25;
  /// Phase origin of the Fourier terms. Unset: first observation of the
  /// design being built.
  std::optional<Date> origin;

  [[nodiscard]] int d_alpha() const {
    return 2 * fourier_order + offset_periods + (cooling_threshold ? 1 : 0);
  }
  [[nodiscard]] int d_beta() const { return daytypes - 1; }
  /// Dimension of eta = (alpha, beta, gamma, u).
  [[nodiscard]] int d_eta() const { return d_alpha() + d_beta() + 2; }
  /// Dimension of theta = (eta, sigma2).
  [[nodiscard]] int d_theta() const { return d_eta() + 1; }

  void validate() const;
  /// Requires min(T) < u_lo < u_hi < max(T).
  void check_support(const VectorXd& temperatures) const;
};

struct DesignSet {
  VectorXd y;
  MatrixXd A;
  MatrixXd B;
  VectorXd C;
  VectorXd T;
  ModelSpec spec;  ///< origin always resolved
  std::vector<Date> dates;
  std::vector<int> daytypes;

  [[nodiscard]] Eigen::Index size() const { return y.size(); }
};

/// CSV with header `date,load,temperature,daytype,offset_period,excluded`
/// (any column order). Dates must be strictly increasing.
std::vector<SeriesRecord> load_series(const std::string& path);
std::vector<SeriesRecord> parse_series(std::istream& in, const std::string& source = "<stream>");
void save_series(const std::string& path, std::span<const SeriesRecord> records);
void write_series(std::ostream& out, std::span<const SeriesRecord> records);

/// Sorts by date, drops excluded days and builds the condensed design.
DesignSet build_design(std::span<const SeriesRecord> records, const ModelSpec& spec);

/// Appends (T_t - u_c) 1{T_t >= u_c} as a new column.
MatrixXd add_cooling_regressor(const MatrixXd& A, const VectorXd& T, double u_c);

/// S_1 = T_1, S_t = lambda T_t + (1 - lambda) S_{t-1}.
VectorXd smooth_temperature(const VectorXd& T, double lambda = 0.95);

/// Mean historical temperature sharing each target's (month, day); a
/// Feb 29 target with no Feb 29 history uses the Feb 28 pool.
VectorXd normal_temperatures(std::span<const SeriesRecord> history,
                             std::span<const Date> target_dates);

struct RankGridPoint {
  VectorXd beta;
  double u = 0.0;
};

struct RankDiagnostic {
  RankGridPoint point;
  double smallest_singular_value = 0.0;
  bool flagged = false;
};

struct RankReport {
  std::vector<RankDiagnostic> entries;
  double threshold = 1e-8;

  [[nodiscard]] bool any_flagged() const;
  [[nodiscard]] double worst() const;
};

/// Rows [(B_t beta + C_t) A_t, (T_t - u) 1{T_t <= u}] at each grid point;
/// flags smallest singular values below 1e-8.
RankReport rank_check(const DesignSet& design, std::span<const RankGridPoint> grid);

/// n_beta scaled centroids of the simplex face times n_u thresholds evenly
/// spread over [u_lo, u_hi].
std::vector<RankGridPoint> default_rank_grid(const ModelSpec& spec, int n_beta = 5, int n_u = 5);

}  // namespace eload
