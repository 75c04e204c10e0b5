#pragma once

#include <stdexcept>
#include <string>

namespace anatomia {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or missing on-disk metadata.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Two objects that must agree (shapes, labels, parameter trees) do not.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// A domain-type invariant was violated (non-finite values, bad spacing, ...).
class InvariantError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Not enough items to satisfy a request (splits, aggregation, reports).
class SizeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Spatial extents incompatible with a network or checkpoint.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// All consistency weights vanished, so the weighted mean is undefined.
class DegenerateWeightError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace anatomia
