#pragma once

#include <stdexcept>
#include <string>

namespace nvsim {

// Bad arguments: non-finite fields, violated parameter invariants, malformed
// sequences. The CLI maps these to exit code 2.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Configuration/schema problem; what() starts with the offending key path.
class ConfigError : public InvalidInput {
 public:
  ConfigError(const std::string& key_path, const std::string& message)
      : InvalidInput(key_path + ": " + message), key_path_(key_path) {}

  const std::string& key_path() const noexcept { return key_path_; }

 private:
  std::string key_path_;
};

// The generator has more than one stationary distribution (e.g. laser off).
class DegenerateSteadyState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Polarization of a state with no ground-manifold population.
class UndefinedPolarization : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Data cannot support the requested model (rank deficiency, no positive bins).
class FitDomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nvsim
