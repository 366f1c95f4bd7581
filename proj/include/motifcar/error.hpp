#pragma once

#include <stdexcept>
#include <string>

namespace motifcar {

/// Bad argument or configuration supplied by the caller.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or missing input data (dataset files, serialized artifacts).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN/Inf in a loss, failed gradient check, or similar numerical fault.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The counterfactual producer could not build a graph from a donor pair.
class ProducerError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

/// A test-split graph reached a training-only stage.
class LeakageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace motifcar
