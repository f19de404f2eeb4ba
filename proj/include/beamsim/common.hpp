#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace beamsim {

/// Softmax scores over all beam pairs: nonnegative, sums to 1 within 1e-9.
using ScoreVector = std::vector<double>;

/// Bad configuration or CLI misuse. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad or inconsistent data encountered at run time. Exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vehicle placement failed after bounded retries.
class SceneInfeasibleError : public DataError {
 public:
  using DataError::DataError;
};

/// No propagation path exists between base station and receiver.
class LinkOutageError : public DataError {
 public:
  using DataError::DataError;
};

/// Base station and receiver fall into the same voxel cell.
class MarkerCollisionError : public DataError {
 public:
  using DataError::DataError;
};

/// No subset size fits inside the beam coherence window.
class ContactTimeError : public DataError {
 public:
  using DataError::DataError;
};

/// A network forward pass produced a non-finite value.
class NumericError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace beamsim
