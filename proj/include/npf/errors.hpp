#pragma once

#include <stdexcept>
#include <string>

namespace npf {

// All importance weights of a normalization were -inf or NaN. Filters treat
// this as a divergence event rather than a crash.
class DegenerateWeightsError : public std::runtime_error {
 public:
  explicit DegenerateWeightsError(const std::string& what)
      : std::runtime_error(what) {}
};

// Covariance factorization failed beyond tolerance.
class NotPsdError : public std::runtime_error {
 public:
  explicit NotPsdError(const std::string& what) : std::runtime_error(what) {}
};

// Requested group reordering is not available for this model.
class NotSwappableError : public std::runtime_error {
 public:
  explicit NotSwappableError(const std::string& what)
      : std::runtime_error(what) {}
};

// Self-normalized estimate with an all-zero weight row.
class ZeroRWeightsError : public std::runtime_error {
 public:
  explicit ZeroRWeightsError(const std::string& what)
      : std::runtime_error(what) {}
};

// Moment-matched Gaussian evaluation requested on a model that cannot
// expose a noise-free transition mean.
class NotAdditiveGaussianError : public std::runtime_error {
 public:
  explicit NotAdditiveGaussianError(const std::string& what)
      : std::runtime_error(what) {}
};

class RewardOutOfRangeError : public std::invalid_argument {
 public:
  explicit RewardOutOfRangeError(const std::string& what)
      : std::invalid_argument(what) {}
};

class LengthMismatchError : public std::invalid_argument {
 public:
  explicit LengthMismatchError(const std::string& what)
      : std::invalid_argument(what) {}
};

// Invalid experiment configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace npf
