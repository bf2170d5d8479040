#pragma once

#include <stdexcept>
#include <string>

namespace pcmmap {

// Base class for all errors raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input document (JSON/CSV syntax, missing fields, bad types).
struct ParseError : Error {
  using Error::Error;
};

// Structural property of a circuit violated (cycle, unnormalized sum,
// smoothness/decomposability violation, dangling variable). The message
// names the offending node id.
struct ValidationError : Error {
  using Error::Error;
};

struct UnknownVariable : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

// Linear-mode evaluation produced a non-finite value.
struct NumericOverflow : Error {
  using Error::Error;
};

// Invalid construction request (bad generator sizes, n = 0, bad layer dims).
struct InvalidSpec : Error {
  using Error::Error;
};

// Circuit value v' is zero at the requested point; the loss -ln v' is
// undefined (the evidence has probability 0 under the circuit).
struct NonpositiveCircuitValue : Error {
  using Error::Error;
};

struct OverlappingAssignments : Error {
  using Error::Error;
};

struct InvalidPartition : Error {
  using Error::Error;
};

// Brute force requested with more query variables than the enumeration guard.
struct QueryTooLarge : Error {
  using Error::Error;
};

struct ZeroEvidenceProbability : Error {
  using Error::Error;
};

// Problem generation produced an empty evidence set in MMAP mode.
struct DegeneratePartition : Error {
  using Error::Error;
};

struct MethodSetMismatch : Error {
  using Error::Error;
};

struct DivisionByZero : Error {
  using Error::Error;
};

// A top-down descent assigned two different values to one variable.
// Impossible in a smooth, decomposable circuit; kept as a consistency check.
struct ConflictingLeafAssignment : Error {
  using Error::Error;
};

struct ShapeMismatch : Error {
  using Error::Error;
};

// Backward called with a cache that does not match the model.
struct StaleCache : Error {
  using Error::Error;
};

}  // namespace pcmmap
