#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <stdexcept>
#include <string>
#include <vector>

namespace credal {

/// Dense row-major float64 matrix. Rows are nodes throughout the library.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Weighted CSR operator on nodes (normalized adjacency and friends).
using SparseOperator = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

using IndexList = std::vector<int>;

/// Malformed or inconsistent user input (config, dataset files). Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// NaN/Inf produced where a finite value is required.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace credal
