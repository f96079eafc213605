#pragma once

#include <stdexcept>

namespace partnet {

// Shapes of operands do not line up.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// API called in an invalid order or with a missing cache.
struct UsageError : std::logic_error {
  using std::logic_error::logic_error;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed or truncated file.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values or a failed decomposition.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Labels or targets that violate their contract.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace partnet
