// SPDX-License-Identifier: Apache-2.0
#include "maxcav/sparse_linalg.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/LU>

namespace maxcav {

VectorXc matvec(const SparseMatrixXc& a, const VectorXc& x,
                bool conjugate_transpose) {
  if ((conjugate_transpose ? a.rows() : a.cols()) != x.size())
    throw std::invalid_argument("matvec: dimension mismatch");
  if (conjugate_transpose) return a.adjoint() * x;
  return a * x;
}

namespace {

// Paige-Saunders MINRES on a Hermitian operator. The optional Jacobi
// preconditioner enters as an explicit symmetric scaling
// D^-1/2 A D^-1/2 (D^-1/2 x) = D^-1/2 b, which keeps the core iteration
// preconditioner-free.
std::pair<VectorXc, SolveReport> minres_core(
    const LinearOperator& op, const VectorXc& b, double tol, int max_iter,
    std::vector<double>* residual_history) {
  const Index n = b.size();
  SolveReport rep;
  rep.method = "minres";
  VectorXc x = VectorXc::Zero(n);

  const double beta1 = b.norm();
  if (beta1 == 0.0) {
    rep.converged = true;
    return {x, rep};
  }

  VectorXc r1 = b, r2 = b, y = b;
  double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0, phibar = beta1;
  double cs = -1.0, sn = 0.0;
  VectorXc w = VectorXc::Zero(n), w2 = VectorXc::Zero(n);

  for (int itn = 1; itn <= max_iter; ++itn) {
    const VectorXc v = y / beta;
    y = op(v);
    if (itn >= 2) y -= (beta / oldb) * r1;
    const double alfa = std::real(v.dot(y));
    y -= (alfa / beta) * r2;
    r1 = r2;
    r2 = y;
    oldb = beta;
    beta = y.norm();

    const double oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    double gamma = std::hypot(gbar, beta);
    gamma = std::max(gamma, 1e-300);
    cs = gbar / gamma;
    sn = beta / gamma;
    const double phi = cs * phibar;
    phibar = sn * phibar;

    const VectorXc w1 = w2;
    w2 = w;
    w = (v - oldeps * w1 - delta * w2) / gamma;
    x += phi * w;

    rep.iterations = itn;
    rep.relative_residual = phibar / beta1;
    if (residual_history) residual_history->push_back(rep.relative_residual);
    if (rep.relative_residual <= tol) {
      rep.converged = true;
      break;
    }
    if (beta <= 1e-300) { // Krylov space exhausted; x solves exactly
      rep.converged = rep.relative_residual <= tol;
      break;
    }
  }
  return {x, rep};
}

} // namespace

std::pair<VectorXc, SolveReport> minres(const LinearOperator& op,
                                        const VectorXc& b, double tol,
                                        int max_iter,
                                        const Eigen::VectorXd* jacobi,
                                        std::vector<double>* residual_history) {
  if (!jacobi) return minres_core(op, b, tol, max_iter, residual_history);
  Eigen::VectorXd inv_sqrt = jacobi->cwiseAbs();
  const double floor = inv_sqrt.maxCoeff() * 1e-14 + 1e-300;
  inv_sqrt = (inv_sqrt.array() < floor).select(floor, inv_sqrt);
  inv_sqrt = inv_sqrt.cwiseSqrt().cwiseInverse();
  const LinearOperator scaled = [&](const VectorXc& v) -> VectorXc {
    return inv_sqrt.asDiagonal() *
           op((inv_sqrt.asDiagonal() * v).eval()).eval();
  };
  auto [xs, rep] = minres_core(scaled, inv_sqrt.asDiagonal() * b, tol,
                               max_iter, residual_history);
  VectorXc x = inv_sqrt.asDiagonal() * xs;
  // Report the unpreconditioned residual; convergence is judged on it.
  const double bn = b.norm();
  rep.relative_residual = bn > 0 ? (b - op(x)).norm() / bn : 0.0;
  rep.converged = rep.relative_residual <= tol;
  return {x, rep};
}

std::pair<VectorXc, SolveReport> krylov_solve(
    const SparseMatrixXc& a, const VectorXc& b, double tol, int max_iter,
    const Eigen::VectorXd* jacobi, std::vector<double>* residual_history) {
  if (a.rows() != a.cols() || a.rows() != b.size())
    throw std::invalid_argument("krylov_solve: dimension mismatch");
  const LinearOperator op = [&a](const VectorXc& v) -> VectorXc {
    return a * v;
  };
  return minres(op, b, tol, max_iter, jacobi, residual_history);
}

std::pair<VectorXc, SolveReport> cg_solve(const LinearOperator& op,
                                          const VectorXc& b, double tol,
                                          int max_iter,
                                          const Eigen::VectorXd* jacobi) {
  SolveReport rep;
  rep.method = "cg";
  const Index n = b.size();
  VectorXc x = VectorXc::Zero(n);
  const double bn = b.norm();
  if (bn == 0.0) {
    rep.converged = true;
    return {x, rep};
  }
  Eigen::VectorXd dinv;
  if (jacobi) {
    dinv = jacobi->cwiseAbs();
    const double floor = dinv.maxCoeff() * 1e-14 + 1e-300;
    dinv = (dinv.array() < floor).select(floor, dinv).cwiseInverse();
  }
  VectorXc r = b;
  VectorXc z = jacobi ? VectorXc(dinv.asDiagonal() * r) : r;
  VectorXc p = z;
  double rz = std::real(r.dot(z));
  for (int it = 1; it <= max_iter; ++it) {
    const VectorXc ap = op(p);
    const double pap = std::real(p.dot(ap));
    if (!(pap > 0)) break; // loss of positive definiteness
    const double alpha = rz / pap;
    x += alpha * p;
    r -= alpha * ap;
    rep.iterations = it;
    rep.relative_residual = r.norm() / bn;
    if (rep.relative_residual <= tol) {
      rep.converged = true;
      break;
    }
    z = jacobi ? VectorXc(dinv.asDiagonal() * r) : r;
    const double rz_new = std::real(r.dot(z));
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  return {x, rep};
}

VectorXc dense_factor_solve(const MatrixXc& a, const VectorXc& b) {
  if (a.rows() != a.cols() || a.rows() != b.size())
    throw std::invalid_argument("dense_factor_solve: dimension mismatch");
  Eigen::PartialPivLU<MatrixXc> lu(a);
  const auto diag = lu.matrixLU().diagonal().cwiseAbs();
  if (diag.size() > 0) {
    const double dmax = diag.maxCoeff();
    if (dmax == 0.0 || diag.minCoeff() <= dmax * double(a.rows()) * 1e-16)
      throw std::runtime_error(
          "dense_factor_solve: pivot singular to working precision");
  }
  return lu.solve(b);
}

struct SaddleSolver::Impl {
  SparseMatrixXc k;
  SparseMatrixXc b;
  double tol;
  int max_iter;
  bool dense = false;
  Eigen::LLT<MatrixXc> k_llt;
  MatrixXc schur_dense; // B K^-1 B^H, precomputed in dense mode
  Eigen::VectorXd k_jacobi;

  VectorXc k_solve(const VectorXc& rhs, double inner_tol) const {
    if (dense) return k_llt.solve(rhs);
    const LinearOperator op = [this](const VectorXc& v) -> VectorXc {
      return k * v;
    };
    auto [x, rep] = cg_solve(op, rhs, inner_tol, max_iter, &k_jacobi);
    return x;
  }
};

SaddleSolver::SaddleSolver(const SparseMatrixXc& k, const SparseMatrixXc& b,
                           double tol, int max_iter)
    : impl_(std::make_unique<Impl>()) {
  if (k.rows() != k.cols() || b.cols() != k.rows())
    throw std::invalid_argument("saddle_solve: block shape mismatch");
  impl_->k = k;
  impl_->b = b;
  impl_->tol = tol;
  impl_->max_iter = max_iter;
  impl_->dense = k.rows() + b.rows() <= kDenseSolveThreshold;
  if (impl_->dense) {
    impl_->k_llt.compute(MatrixXc(k));
    if (impl_->k_llt.info() != Eigen::Success)
      throw std::runtime_error(
          "saddle_solve: leading block is not positive definite");
    const MatrixXc kinv_bh = impl_->k_llt.solve(MatrixXc(b.adjoint()));
    impl_->schur_dense = b * kinv_bh;
  } else {
    impl_->k_jacobi = k.diagonal().real();
  }
}

SaddleSolver::~SaddleSolver() = default;
SaddleSolver::SaddleSolver(SaddleSolver&&) noexcept = default;
SaddleSolver& SaddleSolver::operator=(SaddleSolver&&) noexcept = default;

std::tuple<VectorXc, VectorXc, SolveReport> SaddleSolver::solve(
    const VectorXc& f, const VectorXc& g) const {
  const auto& im = *impl_;
  if (f.size() != im.k.rows() || g.size() != im.b.rows())
    throw std::invalid_argument("saddle_solve: right-hand side size");
  SolveReport rep;
  rep.method = im.dense ? "schur-cg/dense" : "schur-cg/cg";
  const double inner_tol = std::min(im.tol * 1e-2, 1e-12);

  const VectorXc kinv_f = im.k_solve(f, inner_tol);
  const VectorXc rhs_p = im.b * kinv_f - g;

  const LinearOperator schur = [&im, inner_tol](const VectorXc& q) -> VectorXc {
    if (im.dense) return im.schur_dense * q;
    return im.b * im.k_solve(im.b.adjoint() * q, inner_tol);
  };
  auto [p, rep_p] = cg_solve(schur, rhs_p, im.tol * 1e-1, im.max_iter);
  rep.iterations = rep_p.iterations;

  const VectorXc u = im.k_solve(f - im.b.adjoint() * p, inner_tol);

  const double scale = std::max(1e-300, std::hypot(f.norm(), g.norm()));
  const double res1 = (im.k * u + im.b.adjoint() * p - f).norm();
  const double res2 = (im.b * u - g).norm();
  rep.relative_residual = std::hypot(res1, res2) / scale;
  rep.converged = rep.relative_residual <= im.tol;
  return {u, p, rep};
}

std::tuple<VectorXc, VectorXc, SolveReport> saddle_solve(
    const SparseMatrixXc& k, const SparseMatrixXc& b, const VectorXc& f,
    const VectorXc& g, double tol, int max_iter) {
  return SaddleSolver(k, b, tol, max_iter).solve(f, g);
}

} // namespace maxcav
