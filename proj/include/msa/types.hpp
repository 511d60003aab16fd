#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace msa {

// Desk-scale ceiling on state, noise and control dimensions. Small
// fixed-capacity Eigen types keep per-path evaluations off the heap.
inline constexpr int kMaxDim = 4;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim,
                          kMaxDim>;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension mismatch between a function's output and the problem's shape.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf, failed ODE integration, or other numerical breakdown.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Least-squares design matrix without full column rank.
class RegressionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Invalid user configuration or precondition violation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Arrays generated from different ensembles or controls were mixed.
class ProvenanceError : public Error {
 public:
  using Error::Error;
};

}  // namespace msa
