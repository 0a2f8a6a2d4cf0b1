// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace maxcav {

using Index = Eigen::Index;
using Complex = std::complex<double>;

using VectorXc = Eigen::VectorXcd;
using MatrixXc = Eigen::MatrixXcd;

// Compressed sparse row storage throughout: row offsets, sorted column
// indices, complex values.
using SparseMatrixXc = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;
using SparseMatrixXd = Eigen::SparseMatrix<double, Eigen::RowMajor>;

} // namespace maxcav
