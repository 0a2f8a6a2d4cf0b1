// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "maxcav/assembly.hpp"
#include "maxcav/sparse_linalg.hpp"
#include "maxcav/types.hpp"

namespace maxcav {

struct EigenPairEstimate {
  double lambda = 0.0;
  VectorXc vector;     // edge coefficients
  VectorXc multiplier; // vertex coefficients, kept on the coarse level
  double residual = 0.0; // ||S u - lambda M u|| / ||M u||, vector 2-norms
  int level = 0;
};

struct SpectrumResult {
  std::vector<EigenPairEstimate> pairs;        // ascending by lambda
  std::vector<std::pair<int, int>> clusters;   // contiguous (start, size)
  std::vector<int> zero_modes;                 // indices with |lambda| below
  double zero_threshold = 0.0;

  /// Cluster containing pair `k`, as (start, size).
  std::pair<int, int> cluster_of(int k) const;
};

struct CoarseSolveOptions {
  int num_pairs = 6;
  double sigma = -1.0; // negative spectral shift; keeps the block HPD
  double tol = 1e-10;
  double gap_tol = 1e-2;
  int max_outer = 400;
  int subspace_extra = 4; // subspace dimension num_pairs + 4
  std::uint64_t seed = 20250801;
  double saddle_tol = 1e-12;
};

/// Smallest eigenvalues of the constrained pencil (S, M) on ker(B), i.e. the
/// mixed saddle-point eigenproblem, by shift-inverted subspace iteration with
/// Rayleigh-Ritz on the (S, M) pencil. Physical zero modes are returned, not
/// filtered; vectors are a-normalized (M-normalized on the kernel).
SpectrumResult solve_coarse_eigen(const AssembledOperators& ops,
                                  const CoarseSolveOptions& opts);

/// Greedy clustering of a sorted spectrum: adjacent values join a cluster
/// when their relative gap is below gap_tol.
std::vector<std::pair<int, int>> cluster_spectrum(
    const std::vector<double>& lambdas, double gap_tol);

} // namespace maxcav
