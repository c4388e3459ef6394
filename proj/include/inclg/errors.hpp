#pragma once

#include <stdexcept>
#include <string>

namespace inclg {

/// Layer wiring or configuration does not match the data flowing through it.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A tensor reached a model boundary with the wrong shape.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable, undecodable or malformed dataset records.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on the first non-finite loss term; `term()` names it.
class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(std::string term, double value);
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

}  // namespace inclg
