#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace ragprune {

using Index = Eigen::Index;

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or flags. The CLI maps this to exit code 2.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Malformed, inconsistent or numerically unusable input data (exit code 3).
class DataError : public Error {
public:
  using Error::Error;
};

/// Failure talking to, or reading from, an embedding source (exit code 4).
class EmbedderError : public Error {
public:
  enum class Kind { network, status, dimension, malformed, missing, cache };

  EmbedderError(Kind kind, const std::string& what, Index index = -1)
      : Error(what), kind_(kind), index_(index) {}

  Kind kind() const { return kind_; }
  /// Position of the offending text in the request, or -1.
  Index index() const { return index_; }

private:
  Kind kind_;
  Index index_;
};

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double value);

}  // namespace ragprune
