#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace tfgw {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when an input violates a documented precondition.
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a dataset or checkpoint file cannot be read.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace tfgw
