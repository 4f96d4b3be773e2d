#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace dfgm {

/// Dense double-precision storage. Matrices are row-major so each row of a
/// matrix-vector product is a contiguous reduction.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Thrown when two operands have incompatible dimensions.
class DimensionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a problem file cannot be parsed. Carries the 1-based line
/// number of the offending token.
class ParseError : public std::runtime_error {
public:
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

private:
  int line_;
};

/// Thrown when a symmetric factorization fails (matrix not positive definite).
class FactorizationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a non-finite value shows up mid-iteration. Carries the
/// iteration counter at which the blow-up was detected.
class DivergenceError : public std::runtime_error {
public:
  DivergenceError(int iteration, const std::string& what)
      : std::runtime_error("divergence at iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

private:
  int iteration_;
};

}  // namespace dfgm
