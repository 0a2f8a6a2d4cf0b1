// SPDX-License-Identifier: Apache-2.0
#include "maxcav/coarse_eigensolver.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace maxcav {

std::pair<int, int> SpectrumResult::cluster_of(int k) const {
  for (const auto& [start, size] : clusters)
    if (k >= start && k < start + size) return {start, size};
  throw std::out_of_range("cluster_of: pair index outside computed spectrum");
}

std::vector<std::pair<int, int>> cluster_spectrum(
    const std::vector<double>& lambdas, double gap_tol) {
  std::vector<std::pair<int, int>> clusters;
  const int n = int(lambdas.size());
  int start = 0;
  for (int i = 1; i <= n; ++i) {
    bool close = false;
    if (i < n) {
      const double gap = std::abs(lambdas[size_t(i)] - lambdas[size_t(i - 1)]);
      const double scale = std::max(
          {std::abs(lambdas[size_t(i)]), std::abs(lambdas[size_t(i - 1)]),
           1e-300});
      close = gap / scale < gap_tol;
    }
    if (!close) {
      clusters.emplace_back(start, i - start);
      start = i;
    }
  }
  return clusters;
}

SpectrumResult solve_coarse_eigen(const AssembledOperators& ops,
                                  const CoarseSolveOptions& opts) {
  if (opts.sigma >= 0.0)
    throw std::invalid_argument(
        "solve_coarse_eigen: the spectral shift must be negative so the "
        "shifted block stays positive definite");
  if (opts.num_pairs < 1)
    throw std::invalid_argument("solve_coarse_eigen: num_pairs must be >= 1");
  const Index n = ops.n_edge;
  const int k = opts.num_pairs;
  const int m = int(std::min<Index>(n, k + opts.subspace_extra));
  if (m < k)
    throw std::invalid_argument(
        "solve_coarse_eigen: more pairs requested than edge DOFs");

  const SparseMatrixXc shifted = ops.S - Complex(opts.sigma) * ops.M;
  SaddleSolver saddle(shifted, ops.B, opts.saddle_tol);
  const VectorXc g0 = VectorXc::Zero(ops.n_vertex);

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXc v(n, m);
  auto randomize_column = [&](Index j) {
    for (Index i = 0; i < n; ++i) v(i, j) = Complex(normal(rng), normal(rng));
  };
  for (Index j = 0; j < m; ++j) randomize_column(j);

  MatrixXc ritz;
  Eigen::VectorXd theta;
  std::vector<double> residuals(size_t(k), 1.0);
  bool done = false;
  int restarts = 0;

  for (int outer = 0; outer < opts.max_outer && !done; ++outer) {
    // One shift-inverted power step per column, through the saddle system
    // so iterates stay discretely divergence-free.
    MatrixXc y(n, m);
    for (Index j = 0; j < m; ++j) {
      auto [u, p, rep] = saddle.solve(ops.M * v.col(j), g0);
      const double norm = u.norm();
      if (!(norm > 0) || !u.allFinite()) {
        randomize_column(j);
        y.col(j) = v.col(j);
        continue;
      }
      y.col(j) = u / norm;
    }

    // Rayleigh-Ritz on the (S, M) pencil inside the iterated subspace.
    const MatrixXc hs = y.adjoint() * (ops.S * y).eval();
    const MatrixXc hm = y.adjoint() * (ops.M * y).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXc> es(
        0.5 * (hs + hs.adjoint()), 0.5 * (hm + hm.adjoint()));
    if (es.info() != Eigen::Success) {
      if (++restarts > 5)
        throw std::runtime_error(
            "solve_coarse_eigen: subspace collapsed repeatedly");
      for (Index j = 0; j < m; ++j) randomize_column(j);
      continue;
    }
    theta = es.eigenvalues();
    ritz = y * es.eigenvectors(); // M-orthonormal columns
    v = ritz;

    done = true;
    for (int j = 0; j < k; ++j) {
      const VectorXc x = ritz.col(j);
      const VectorXc mx = ops.M * x;
      residuals[size_t(j)] = (ops.S * x - theta(j) * mx).norm() / mx.norm();
      const double div = (ops.B * x).norm() / x.norm();
      if (residuals[size_t(j)] > opts.tol || div > opts.tol) done = false;
    }
  }
  if (!done)
    throw std::runtime_error(
        "solve_coarse_eigen: not converged after max outer iterations "
        "(worst residual " +
        std::to_string(*std::max_element(residuals.begin(), residuals.end())) +
        ")");

  // Zero detection relative to the first clearly nonzero Ritz value.
  const double theta_max =
      theta.head(k).cwiseAbs().maxCoeff() + 1e-300;
  double theta_ref = theta_max;
  for (int j = 0; j < k; ++j)
    if (std::abs(theta(j)) > 1e-6 * theta_max) {
      theta_ref = std::abs(theta(j));
      break;
    }
  const double zero_threshold = 1e-8 * theta_ref;

  SpectrumResult result;
  result.zero_threshold = zero_threshold;
  for (int j = 0; j < k; ++j) {
    EigenPairEstimate pair;
    pair.lambda = theta(j);
    VectorXc x = ritz.col(j);

    auto [u_aux, p_aux, rep] = saddle.solve(ops.M * x, g0);
    pair.multiplier = (pair.lambda - opts.sigma) * p_aux;

    const double s_norm2 = std::real(x.dot(ops.S * x));
    const double m_norm2 = std::real(x.dot(ops.M * x));
    const bool zero_mode = std::abs(pair.lambda) <= zero_threshold;
    const double scale =
        zero_mode ? std::sqrt(m_norm2) : std::sqrt(std::max(s_norm2, 1e-300));
    x /= scale;
    pair.multiplier /= scale;
    pair.vector = x;
    const VectorXc mx = ops.M * x;
    pair.residual = (ops.S * x - pair.lambda * mx).norm() / mx.norm();
    pair.level = 0;
    if (zero_mode) result.zero_modes.push_back(j);
    result.pairs.push_back(std::move(pair));
  }

  std::vector<double> lambdas(static_cast<size_t>(k));
  for (int j = 0; j < k; ++j)
    lambdas[size_t(j)] = result.pairs[size_t(j)].lambda;
  result.clusters = cluster_spectrum(lambdas, opts.gap_tol);
  return result;
}

} // namespace maxcav
