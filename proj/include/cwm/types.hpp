#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace cwm {

using Eigen::ArrayXd;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

/// Base class for runtime failures of the numerical kernels (exit code 3).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotTimelike : NumericalError {
  using NumericalError::NumericalError;
};
struct DegenerateFrame : NumericalError {
  using NumericalError::NumericalError;
};
struct StabilityViolation : NumericalError {
  using NumericalError::NumericalError;
};
struct NoConvergence : NumericalError {
  using NumericalError::NumericalError;
};
struct TailTooLarge : NumericalError {
  using NumericalError::NumericalError;
};
struct ConeOutsideBox : NumericalError {
  using NumericalError::NumericalError;
};
struct GridMismatch : NumericalError {
  using NumericalError::NumericalError;
};
struct ShapeMismatch : NumericalError {
  using NumericalError::NumericalError;
};
struct SupportTooLarge : NumericalError {
  using NumericalError::NumericalError;
};
struct NotOrthogonal : NumericalError {
  using NumericalError::NumericalError;
};
struct SingularField : NumericalError {
  using NumericalError::NumericalError;
};

/// Configuration failures (exit code 2).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IOError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cwm
