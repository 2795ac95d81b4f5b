#pragma once

#include <stdexcept>
#include <string>

namespace subdyn {

// Base of every error raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operands live on different ground sets or vectors have the wrong length.
struct DimensionError : Error {
  using Error::Error;
};

// A caller broke a documented precondition.
struct ContractError : Error {
  using Error::Error;
};

// Exhaustive routine asked to run beyond its size limit.
struct CapacityError : Error {
  using Error::Error;
};

// Mathematically empty or ill-posed input (e.g. empty feasible family).
struct DomainError : Error {
  using Error::Error;
};

// An internal invariant was observed to fail at run time.
struct InvariantViolation : Error {
  using Error::Error;
};

// |f(S)| exceeded the declared bound M.
struct BoundViolation : InvariantViolation {
  using InvariantViolation::InvariantViolation;
};

struct ConfigError : Error {
  using Error::Error;
};

struct AlgorithmError : Error {
  using Error::Error;
};

struct TopologyError : Error {
  using Error::Error;
};

// Problem stream ran dry before the requested horizon.
struct TruncationError : Error {
  using Error::Error;
};

}  // namespace subdyn
