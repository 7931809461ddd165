#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <stdexcept>
#include <string>

namespace romforge {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using SpMat = Eigen::SparseMatrix<double>;

// Bad or inconsistent configuration / CLI usage.  CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A nonlinear solve ran out of iterations.  CLI maps this to exit code 3.
struct ConvergenceError : std::runtime_error {
  double last_residual_norm;
  ConvergenceError(const std::string& what, double last_norm)
      : std::runtime_error(what), last_residual_norm(last_norm) {}
};

// Element inversion (det F <= 0) or non-finite values in an assembly.
struct DegenerateStateError : std::runtime_error {
  explicit DegenerateStateError(const std::string& what) : std::runtime_error(what) {}
};

// File I/O, malformed headers, dimension mismatches.  CLI maps this to exit code 4.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace romforge
