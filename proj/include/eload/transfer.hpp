#pragma once

// Moment transfer from a long dataset's non-informative posterior to the
// hierarchical prior of a short dataset.

#include <iosfwd>
#include <string>
#include <vector>

#include "eload/calendar.hpp"
#include "eload/inference.hpp"
#include "eload/posterior_summary.hpp"

namespace eload {

struct SummarizeOptions {
  long min_draws = 1000;
  std::string dataset_id = "A";
};

struct SummaryResult {
  PosteriorSummary summary;
  std::vector<std::string> warnings;
};

/// Empirical mean and (n - 1)-normalized covariance of the eta draws. A
/// covariance that does not factor gets the diagonal jitter of spd_factor,
/// with a warning.
SummaryResult summarize(const Chain& chain, const SummarizeOptions& options = {});

/// `{ "d": .., "mu": [..], "sigma": [[..]], "meta": {..} }`, row-major.
void save_summary(const std::string& path, const PosteriorSummary& summary);
void write_summary(std::ostream& out, const PosteriorSummary& summary);
PosteriorSummary load_summary(const std::string& path);
PosteriorSummary read_summary(std::istream& in, const std::string& source = "<stream>");

/// Throws ValidationError when the summary's dimensions cannot serve as a
/// prior for `spec`.
void check_compatible(const PosteriorSummary& summary, const ModelSpec& spec);

/// Correlation matrix of a covariance.
MatrixXd correlation(const MatrixXd& covariance);

}  // namespace eload
