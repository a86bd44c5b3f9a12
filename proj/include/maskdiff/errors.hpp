#ifndef MASKDIFF_ERRORS_HPP
#define MASKDIFF_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace maskdiff {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Mismatched sequence lengths / specs, out-of-range tokens or indices.
struct DomainError : Error {
  explicit DomainError(const std::string& what) : Error(what) {}
};

// Distribution failed validation (negative mass, bad normalization, A2).
struct ValidationError : Error {
  explicit ValidationError(const std::string& what) : Error(what) {}
};

// A dense K^d object was requested above the configured state cap.
struct DenseCapError : Error {
  explicit DenseCapError(const std::string& what) : Error(what) {}
};

// Score conditioning state has zero forward probability.  Kept distinct
// from DomainError so callers can tell a reachable-support bug from a
// plain argument mistake.
struct ZeroProbabilityError : Error {
  explicit ZeroProbabilityError(const std::string& what) : Error(what) {}
};

// KL divergence requested between distributions whose supports do not nest.
struct AbsoluteContinuityError : Error {
  explicit AbsoluteContinuityError(const std::string& what) : Error(what) {}
};

// Uniformization stay-probability went negative: the caller-supplied
// dominating rate was violated at some (state, time).
struct BetaViolationError : Error {
  explicit BetaViolationError(const std::string& what) : Error(what) {}
};

// Invalid experiment configuration or schedule.
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace maskdiff

#endif  // MASKDIFF_ERRORS_HPP
