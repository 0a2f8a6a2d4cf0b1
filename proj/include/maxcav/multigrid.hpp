// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <vector>

#include "maxcav/assembly.hpp"
#include "maxcav/coarse_eigensolver.hpp"
#include "maxcav/materials.hpp"
#include "maxcav/mesh.hpp"
#include "maxcav/sparse_linalg.hpp"

namespace maxcav {

/// Solver for the vertex stiffness L = G^H M G together with the projector
/// onto the discretely divergence-free subspace (along gradients). Built
/// once per level and shared by every shifted solve on that level.
class GradientProjector {
 public:
  static std::shared_ptr<const GradientProjector> build(
      const AssembledOperators& ops);

  VectorXc solve_vertex(const VectorXc& rhs) const; // L x = rhs
  VectorXc project(const VectorXc& v) const;         // onto ker(G^H M)
  VectorXc project_adjoint(const VectorXc& v) const; // kills range(M G)
  const SparseMatrixXc& gradient() const { return g_; }

 private:
  SparseMatrixXc g_;  // incidence, complex copy
  SparseMatrixXc mg_; // M G
  SparseMatrixXc l_;  // G^H M G
  Eigen::VectorXd l_jacobi_;
  struct Ic;
  std::shared_ptr<const Ic> ic_; // incomplete Cholesky, when it builds
};

struct LevelContext {
  std::shared_ptr<const Mesh> mesh;
  EdgeTopology topo;
  AssembledOperators ops;
  std::shared_ptr<const GradientProjector> projector;
};

LevelContext make_level(std::shared_ptr<const Mesh> mesh,
                        const MaterialMap& materials);

struct Hierarchy {
  std::vector<LevelContext> levels; // levels[0] is the coarse mesh
  double a_shift = 1.0;             // gamma/beta augmenting the a-norm
};

enum class SchemeKind { RayleighQuotient, FixedShift };

/// Rayleigh-quotient iteration updates the shift from the previous level at
/// every step; the fixed-shift variant freezes it at level i0 so the late
/// systems stay safely nonsingular.
struct SchemeConfig {
  SchemeKind scheme = SchemeKind::FixedShift;
  int i0 = 0;
  int target_pair = 0;  // 0-based index into the coarse spectrum
  int cluster_size = 0; // 0: take the coarse cluster as found
  double level_tol = 1e-10;
  int max_iterations = 5000;
};

struct LevelTrace {
  int member = 0; // index within the target cluster
  int level = 0;
  Index dof = 0;
  double lambda = 0.0;
  double shift = 0.0;
  double eig_residual = 0.0; // ||S u - lambda M u|| / ||M u||
  double div_residual = 0.0; // ||B u|| / ||u||
  SolveReport solve;
  double seconds = 0.0;
};

struct SchemeResult {
  std::vector<EigenPairEstimate> pairs; // one per cluster member, ascending
  std::vector<LevelTrace> trace;
  std::vector<MatrixXc> level_vectors; // iterate per level, members as columns
  int cluster_start = 0; // coarse spectrum offset of the target cluster
  int cluster_size = 0;
};

/// real((u^H S u) / (u^H M u)); asserts the imaginary parts are at rounding
/// level for the Hermitian forms.
double rayleigh_quotient(const AssembledOperators& ops, const VectorXc& u);

/// Shifted level systems (S - shift M) x = b with a factorization or Krylov
/// strategy fixed at construction, so repeated right-hand sides reuse it.
/// For positive shifts above the dense threshold the solve runs in the
/// divergence-free complement with the gradient part recovered exactly.
class ShiftedSystem {
 public:
  ShiftedSystem(const LevelContext& level, double shift, double tol,
                int max_iter);
  std::pair<VectorXc, SolveReport> solve(const VectorXc& b) const;

 private:
  const LevelContext* level_;
  double shift_, tol_;
  int max_iter_;
  bool dense_ = false;
  Eigen::PartialPivLU<MatrixXc> lu_;
  SparseMatrixXc a_;
  Eigen::VectorXd jacobi_;
};

struct ShiftedSolveResult {
  VectorXc u;   // ||u||_a = 1
  VectorXc u_A; // auxiliary ||.||_A-normalized variant
  double lambda = 0.0;
  SolveReport report;
};

/// One multigrid step: prolong the previous iterate, solve
/// (S - shift M) u' = M u_prev on the fine level, and a-normalize.
ShiftedSolveResult shifted_solve(const LevelContext& fine,
                                 const LevelContext& coarse, double shift,
                                 const VectorXc& rhs_coarse, double a_shift,
                                 double tol, int max_iter);

/// Runs the configured scheme over the hierarchy for every member of the
/// target cluster; members are re-orthonormalized in the M inner product
/// after each level so multiple iterations cannot collapse onto one vector.
SchemeResult run_scheme(const Hierarchy& hierarchy, const SchemeConfig& cfg,
                        const SpectrumResult& coarse);

struct LevelEigenResult {
  Eigen::VectorXd lambdas; // ascending Ritz values of the block
  MatrixXc vectors;
  int iterations = 0;
  double max_residual = 0.0;
};

/// Fixed-shift block inverse iteration at a single level, run to the
/// requested eigenpair residual. Serves as the per-level reference for the
/// scheme columns of the report tables; the block width should cover the
/// target cluster.
LevelEigenResult inverse_iteration(const LevelContext& level,
                                   const MatrixXc& start,
                                   double lambda_estimate, double tol = 1e-10,
                                   int max_steps = 60,
                                   double solve_tol = 1e-11,
                                   int solve_max_iter = 20000);

} // namespace maxcav
