#pragma once

#include <stdexcept>
#include <string>

namespace eload {

/// Bad input: shapes, schemas, configuration values, files that do not
/// follow the documented formats.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Linear algebra failed (rank deficiency, matrix not SPD) or a sampler
/// reached a state with zero posterior density.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace eload
