#pragma once

#include <stdexcept>
#include <string>

namespace wqoe {

/// Problems with user-supplied data: missing files, malformed CSV,
/// degenerate splits, out-of-range values. CLI exit code 2.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Corrupt or incompatible model files.
struct SerializationError : DataError {
  explicit SerializationError(const std::string& msg) : DataError(msg) {}
};

/// Non-finite losses or gradients during training. CLI exit code 3.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace wqoe
