// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "maxcav/types.hpp"

namespace maxcav {

struct SolveReport {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
  std::string method;
};

/// Systems at or below this size are handled by a dense factorization; the
/// coarse mixed systems are small by design, fine levels go through Krylov.
inline constexpr Index kDenseSolveThreshold = 3000;

/// y = A x, or A^H x when `conjugate_transpose` is set.
VectorXc matvec(const SparseMatrixXc& a, const VectorXc& x,
                bool conjugate_transpose = false);

using LinearOperator = std::function<VectorXc(const VectorXc&)>;

/// MINRES for Hermitian (possibly indefinite) systems with an optional
/// positive diagonal (Jacobi) preconditioner applied as a symmetric scaling.
/// Never throws on stagnation: the best iterate comes back with
/// converged=false. `residual_history` collects per-iteration residual
/// estimates when supplied.
std::pair<VectorXc, SolveReport> krylov_solve(
    const SparseMatrixXc& a, const VectorXc& b, double tol, int max_iter,
    const Eigen::VectorXd* jacobi = nullptr,
    std::vector<double>* residual_history = nullptr);

/// Operator form of krylov_solve for matrix-free Hermitian systems.
std::pair<VectorXc, SolveReport> minres(
    const LinearOperator& op, const VectorXc& b, double tol, int max_iter,
    const Eigen::VectorXd* jacobi = nullptr,
    std::vector<double>* residual_history = nullptr);

/// Conjugate gradients for Hermitian positive definite operators.
std::pair<VectorXc, SolveReport> cg_solve(const LinearOperator& op,
                                          const VectorXc& b, double tol,
                                          int max_iter,
                                          const Eigen::VectorXd* jacobi =
                                              nullptr);

/// LU with partial pivoting; throws on a pivot that is singular to working
/// precision.
VectorXc dense_factor_solve(const MatrixXc& a, const VectorXc& b);

/// Solver for the saddle system [[K, B^H], [B, 0]] [u; p] = [f; g] with K
/// Hermitian positive definite and B of full row rank. The Schur complement
/// B K^-1 B^H is solved by CG; inner K-solves use a dense factorization
/// below the size threshold and preconditioned CG above it. Factorizations
/// are built once so repeated right-hand sides are cheap.
class SaddleSolver {
 public:
  SaddleSolver(const SparseMatrixXc& k, const SparseMatrixXc& b, double tol,
               int max_iter = 10000);
  ~SaddleSolver();
  SaddleSolver(SaddleSolver&&) noexcept;
  SaddleSolver& operator=(SaddleSolver&&) noexcept;

  std::tuple<VectorXc, VectorXc, SolveReport> solve(const VectorXc& f,
                                                    const VectorXc& g) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// One-shot convenience wrapper around SaddleSolver.
std::tuple<VectorXc, VectorXc, SolveReport> saddle_solve(
    const SparseMatrixXc& k, const SparseMatrixXc& b, const VectorXc& f,
    const VectorXc& g, double tol, int max_iter = 10000);

} // namespace maxcav
