#pragma once

#include <stdexcept>
#include <string>

namespace bailcnn {

/// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Unreadable/unwritable paths and other fatal filesystem failures.
struct IoError : Error {
  using Error::Error;
};

/// Malformed input data: bad schema, bad vocab file, bad checkpoint.
struct DataError : Error {
  using Error::Error;
};

/// Invalid model or experiment configuration (e.g. pooled length < 1).
struct ConfigError : Error {
  using Error::Error;
};

/// Non-finite values during training or evaluation.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace bailcnn
