#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dyneq {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A documented precondition was violated by the caller.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// A wave function with zero norm, or one that is masked out everywhere.
class DegenerateStateError : public Error {
 public:
  using Error::Error;
};

// 1/|d| evaluated at d = 0 without softening.
class SingularEvaluationError : public Error {
 public:
  using Error::Error;
};

// Guidance velocity requested where the wave function (nearly) vanishes.
class NodeProximityError : public Error {
 public:
  using Error::Error;
};

// A jump probability exceeded one; dt is too large for the lattice.
class ProbabilityOverflowError : public Error {
 public:
  ProbabilityOverflowError(const std::string& what, std::size_t cell)
      : Error(what), cell_(cell) {}
  std::size_t cell() const noexcept { return cell_; }

 private:
  std::size_t cell_;
};

// Invalid configuration. key() names the offending key path.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : Error(key.empty() ? what : key + ": " + what), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace dyneq
