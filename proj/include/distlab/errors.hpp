#pragma once

#include <stdexcept>
#include <string>

namespace distlab {

// Base for everything this library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operand shapes do not fit the operation; message names both shapes.
struct ShapeError : Error {
  using Error::Error;
};

// Sequence shorter than a convolution kernel width.
struct SequenceError : Error {
  using Error::Error;
};

// Out-of-range values (label index >= num_classes and friends).
struct ValueError : Error {
  using Error::Error;
};

// API misuse: backward on a non-scalar, backward on a spent tape,
// optimizer step with missing gradients.
struct ContractError : Error {
  using Error::Error;
};

// Malformed input file; message carries file/line location.
struct ParseError : Error {
  using Error::Error;
};

// Inconsistent or invalid configuration.
struct ConfigError : Error {
  using Error::Error;
};

// Invalid model spec combination.
struct SpecError : Error {
  using Error::Error;
};

// Result groups with mismatched seed counts.
struct AggregationError : Error {
  using Error::Error;
};

// Training produced a non-finite loss.
struct DivergenceError : Error {
  using Error::Error;
};

}  // namespace distlab
