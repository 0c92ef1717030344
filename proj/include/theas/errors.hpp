#pragma once

#include <stdexcept>

namespace theas {

/// Invalid or incomplete configuration (bad table, missing field, bad value).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input file could not be read or output could not be written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data was readable but unusable (e.g. a stats dump without simSeconds).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace theas
