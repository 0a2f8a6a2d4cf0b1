// SPDX-License-Identifier: Apache-2.0
#include "maxcav/multigrid.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/LU>

namespace maxcav {

namespace {

double seconds_since(
    const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::pair<VectorXc, int> pcg(const LinearOperator& op,
                             const LinearOperator& prec, const VectorXc& b,
                             double tol, int max_iter) {
  VectorXc x = VectorXc::Zero(b.size());
  const double bn = b.norm();
  if (bn == 0.0) return {x, 0};
  VectorXc r = b;
  VectorXc z = prec(r);
  VectorXc p = z;
  double rz = std::real(r.dot(z));
  int it = 0;
  for (; it < max_iter; ++it) {
    const VectorXc ap = op(p);
    const double pap = std::real(p.dot(ap));
    if (!(pap > 0)) break;
    const double alpha = rz / pap;
    x += alpha * p;
    r -= alpha * ap;
    if (r.norm() <= tol * bn) {
      ++it;
      break;
    }
    z = prec(r);
    const double rz_new = std::real(r.dot(z));
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  return {x, it};
}

} // namespace

struct GradientProjector::Ic {
  Eigen::IncompleteCholesky<Complex, Eigen::Lower,
                            Eigen::AMDOrdering<int>>
      factor;
  bool ok = false;
};

std::shared_ptr<const GradientProjector> GradientProjector::build(
    const AssembledOperators& ops) {
  auto proj = std::make_shared<GradientProjector>();
  proj->g_ = ops.G.cast<Complex>();
  if (ops.n_vertex == 0) return proj;
  proj->mg_ = (ops.M * proj->g_).pruned();
  proj->l_ = (proj->g_.adjoint() * proj->mg_).pruned();
  proj->l_jacobi_ = proj->l_.diagonal().real();
  auto ic = std::make_shared<Ic>();
  Eigen::SparseMatrix<Complex> lcol(proj->l_);
  ic->factor.compute(lcol);
  ic->ok = ic->factor.info() == Eigen::Success;
  proj->ic_ = std::move(ic);
  return proj;
}

VectorXc GradientProjector::solve_vertex(const VectorXc& rhs) const {
  if (rhs.size() == 0) return rhs;
  const LinearOperator op = [this](const VectorXc& v) -> VectorXc {
    return l_ * v;
  };
  if (ic_ && ic_->ok) {
    const LinearOperator prec = [this](const VectorXc& v) -> VectorXc {
      return ic_->factor.solve(v);
    };
    return pcg(op, prec, rhs, 1e-13, 2000).first;
  }
  auto [x, rep] = cg_solve(op, rhs, 1e-13, 5000, &l_jacobi_);
  return x;
}

VectorXc GradientProjector::project(const VectorXc& v) const {
  if (l_.rows() == 0) return v;
  return v - g_ * solve_vertex(mg_.adjoint() * v);
}

VectorXc GradientProjector::project_adjoint(const VectorXc& v) const {
  if (l_.rows() == 0) return v;
  return v - mg_ * solve_vertex(g_.adjoint() * v);
}

LevelContext make_level(std::shared_ptr<const Mesh> mesh,
                        const MaterialMap& materials) {
  LevelContext level;
  level.mesh = std::move(mesh);
  level.topo = build_topology(*level.mesh);
  level.ops = assemble_operators(*level.mesh, level.topo, materials);
  level.projector = GradientProjector::build(level.ops);
  return level;
}

double rayleigh_quotient(const AssembledOperators& ops, const VectorXc& u) {
  if (u.size() != ops.n_edge || u.norm() == 0.0)
    throw std::invalid_argument("rayleigh_quotient: zero or mis-sized vector");
  const Complex num = u.dot(ops.S * u);
  const Complex den = u.dot(ops.M * u);
  if (std::abs(num.imag()) > 1e-10 * std::abs(num) + 1e-300 ||
      std::abs(den.imag()) > 1e-10 * std::abs(den))
    throw std::runtime_error("rayleigh_quotient: forms are not Hermitian");
  return num.real() / den.real();
}

ShiftedSystem::ShiftedSystem(const LevelContext& level, double shift,
                             double tol, int max_iter)
    : level_(&level), shift_(shift), tol_(tol), max_iter_(max_iter) {
  a_ = level.ops.S - Complex(shift) * level.ops.M;
  dense_ = level.ops.n_edge <= kDenseSolveThreshold;
  if (dense_)
    lu_.compute(MatrixXc(a_));
  else
    jacobi_ = a_.diagonal().real();
}

std::pair<VectorXc, SolveReport> ShiftedSystem::solve(
    const VectorXc& b) const {
  SolveReport rep;
  const double bn = b.norm();
  if (dense_) {
    VectorXc x = lu_.solve(b);
    rep.method = "dense-lu";
    rep.relative_residual = bn > 0 ? (a_ * x - b).norm() / bn : 0.0;
    rep.converged = true;
    return {x, rep};
  }

  const LinearOperator apply_a = [this](const VectorXc& v) -> VectorXc {
    return a_ * v;
  };
  if (shift_ <= 0.0 || !level_->projector ||
      level_->ops.n_vertex == 0) {
    auto [x, r] = minres(apply_a, b, tol_, max_iter_, &jacobi_);
    r.method = "minres-jacobi";
    return {x, r};
  }

  // Split off the gradient part, which the shifted operator maps by
  // -shift * M, then iterate in the divergence-free complement where the
  // operator is definite or nearly so.
  const GradientProjector& proj = *level_->projector;
  const VectorXc y =
      (-1.0 / shift_) * proj.solve_vertex(proj.gradient().adjoint() * b);
  const VectorXc b_tilde = proj.project_adjoint(b);
  const LinearOperator op = [&](const VectorXc& v) -> VectorXc {
    return proj.project_adjoint(a_ * proj.project(v));
  };
  const double btn = b_tilde.norm();
  const double krylov_tol =
      btn > 0 ? std::max(1e-15, tol_ * bn / btn) : tol_;
  auto [w, r] = minres(op, b_tilde, krylov_tol, max_iter_, &jacobi_);
  VectorXc x = proj.project(w) + proj.gradient() * y;
  rep = r;
  rep.method = "minres-deflated";
  rep.relative_residual = bn > 0 ? (a_ * x - b).norm() / bn : 0.0;
  rep.converged = rep.relative_residual <= tol_;
  if (!rep.converged) {
    // Polish on the full system from the current iterate.
    auto [d, r2] = minres(apply_a, VectorXc(b - a_ * x), tol_ * bn /
                              std::max(1e-300, (b - a_ * x).norm()),
                          max_iter_, &jacobi_);
    x += d;
    rep.iterations += r2.iterations;
    rep.relative_residual = bn > 0 ? (a_ * x - b).norm() / bn : 0.0;
    rep.converged = rep.relative_residual <= tol_;
  }
  return {x, rep};
}

ShiftedSolveResult shifted_solve(const LevelContext& fine,
                                 const LevelContext& coarse, double shift,
                                 const VectorXc& rhs_coarse, double a_shift,
                                 double tol, int max_iter) {
  const VectorXc prolonged = interpolate_to_fine(
      rhs_coarse, *coarse.mesh, coarse.topo, *fine.mesh, fine.topo);
  const VectorXc b = fine.ops.M * prolonged;
  ShiftedSystem system(fine, shift, tol, max_iter);
  auto [x, rep] = system.solve(b);

  // The solution carries a gradient component (the shifted equation maps
  // gradients by -shift*M, damping the inherited one only by 1/shift).
  // That component is orthogonal to every resonant mode in both forms, so
  // it is removed before normalization.
  if (fine.projector && fine.ops.n_vertex > 0)
    x = fine.projector->project(x);

  const double a2 = std::real(x.dot(fine.ops.S * x));
  const double m2 = std::real(x.dot(fine.ops.M * x));
  if (!(a2 > 1e-13 * std::max(1.0, std::abs(shift)) * m2))
    throw std::runtime_error(
        "shifted_solve: iterate collapsed into the gradient kernel");

  ShiftedSolveResult result;
  result.u = x / std::sqrt(a2);
  result.u_A = x / std::sqrt(a2 + a_shift * m2);
  result.lambda = a2 / m2;
  result.report = rep;
  return result;
}

SchemeResult run_scheme(const Hierarchy& hierarchy, const SchemeConfig& cfg,
                        const SpectrumResult& coarse) {
  if (hierarchy.levels.empty())
    throw std::invalid_argument("run_scheme: empty hierarchy");
  if (cfg.i0 < 0)
    throw std::invalid_argument("run_scheme: i0 must be >= 0");
  const int l = int(hierarchy.levels.size()) - 1;

  auto [start, size] = coarse.cluster_of(cfg.target_pair);
  const int q = cfg.cluster_size > 0 ? cfg.cluster_size : size;
  if (start + q > int(coarse.pairs.size()))
    throw std::invalid_argument(
        "run_scheme: target cluster extends past the computed coarse "
        "spectrum; raise the coarse pair count");
  for (int j = 0; j < q; ++j)
    if (std::abs(coarse.pairs[size_t(start + j)].lambda) <=
        coarse.zero_threshold)
      throw std::invalid_argument(
          "run_scheme: target eigenvalue is a zero mode; the schemes "
          "require a nonzero coarse target");

  const auto& levels = hierarchy.levels;
  std::vector<VectorXc> u(static_cast<size_t>(q));
  std::vector<std::vector<double>> lambda(static_cast<size_t>(q));
  for (int j = 0; j < q; ++j) {
    u[size_t(j)] = coarse.pairs[size_t(start + j)].vector;
    lambda[size_t(j)].push_back(coarse.pairs[size_t(start + j)].lambda);
  }

  SchemeResult result;
  result.cluster_start = start;
  result.cluster_size = q;
  auto snapshot = [&](Index n_edge) {
    MatrixXc block(n_edge, q);
    for (int j = 0; j < q; ++j) block.col(j) = u[size_t(j)];
    result.level_vectors.push_back(std::move(block));
  };
  snapshot(levels[0].ops.n_edge);
  for (int i = 1; i <= l; ++i) {
    const LevelContext& fine = levels[size_t(i)];
    const LevelContext& prev = levels[size_t(i - 1)];
    std::vector<VectorXc> next(static_cast<size_t>(q));
    std::vector<SolveReport> reports(static_cast<size_t>(q));
    std::vector<double> shifts(static_cast<size_t>(q)), times(static_cast<size_t>(q));
    for (int j = 0; j < q; ++j) {
      const auto& lam = lambda[size_t(j)];
      const bool frozen =
          cfg.scheme == SchemeKind::FixedShift && i > cfg.i0;
      const double shift = frozen ? lam[size_t(cfg.i0)] : lam.back();
      const auto t0 = std::chrono::steady_clock::now();
      ShiftedSolveResult step;
      try {
        step = shifted_solve(fine, prev, shift, u[size_t(j)],
                             hierarchy.a_shift, cfg.level_tol,
                             cfg.max_iterations);
      } catch (const std::exception& e) {
        throw std::runtime_error("run_scheme: level " + std::to_string(i) +
                                 " member " + std::to_string(j) + ": " +
                                 e.what());
      }
      times[size_t(j)] = seconds_since(t0);
      next[size_t(j)] = step.u;
      reports[size_t(j)] = step.report;
      shifts[size_t(j)] = shift;
    }

    // Gram-Schmidt in the M inner product keeps the cluster members from
    // collapsing onto one vector; a-normalization follows.
    for (int j = 0; j < q; ++j) {
      VectorXc& v = next[size_t(j)];
      for (int m = 0; m < j; ++m) {
        const VectorXc& w = next[size_t(m)];
        const Complex coef =
            w.dot(fine.ops.M * v) / w.dot(fine.ops.M * w);
        v -= coef * w;
      }
      const double a2 = std::real(v.dot(fine.ops.S * v));
      if (!(a2 > 0))
        throw std::runtime_error(
            "run_scheme: cluster member degenerated after "
            "re-orthonormalization");
      v /= std::sqrt(a2);
    }

    for (int j = 0; j < q; ++j) {
      u[size_t(j)] = next[size_t(j)];
      const double lam = rayleigh_quotient(fine.ops, u[size_t(j)]);
      lambda[size_t(j)].push_back(lam);
      LevelTrace trace;
      trace.member = j;
      trace.level = i;
      trace.dof = fine.ops.n_edge;
      trace.lambda = lam;
      trace.shift = shifts[size_t(j)];
      const VectorXc mu = fine.ops.M * u[size_t(j)];
      trace.eig_residual =
          (fine.ops.S * u[size_t(j)] - lam * mu).norm() / mu.norm();
      trace.div_residual =
          (fine.ops.B * u[size_t(j)]).norm() / u[size_t(j)].norm();
      trace.solve = reports[size_t(j)];
      trace.seconds = times[size_t(j)];
      result.trace.push_back(std::move(trace));
    }
    snapshot(fine.ops.n_edge);
  }

  for (int j = 0; j < q; ++j) {
    EigenPairEstimate pair;
    pair.level = l;
    pair.lambda = lambda[size_t(j)].back();
    pair.vector = u[size_t(j)];
    const auto& ops = levels[size_t(l)].ops;
    const VectorXc mu = ops.M * pair.vector;
    pair.residual = (ops.S * pair.vector - pair.lambda * mu).norm() / mu.norm();
    result.pairs.push_back(std::move(pair));
  }
  std::sort(result.pairs.begin(), result.pairs.end(),
            [](const EigenPairEstimate& a, const EigenPairEstimate& b) {
              return a.lambda < b.lambda;
            });
  return result;
}

LevelEigenResult inverse_iteration(const LevelContext& level,
                                   const MatrixXc& start,
                                   double lambda_estimate, double tol,
                                   int max_steps, double solve_tol,
                                   int solve_max_iter) {
  const Index n = level.ops.n_edge;
  const Index q = start.cols();
  if (start.rows() != n || q < 1)
    throw std::invalid_argument("inverse_iteration: bad start block");
  const double sigma =
      lambda_estimate - 1e-3 * std::max(std::abs(lambda_estimate), 1.0);
  ShiftedSystem system(level, sigma, solve_tol, solve_max_iter);

  MatrixXc v = start;
  LevelEigenResult result;
  result.lambdas.resize(q);
  for (int step = 1; step <= max_steps; ++step) {
    for (Index j = 0; j < q; ++j) {
      auto [w, rep] = system.solve(level.ops.M * v.col(j));
      v.col(j) = w / w.norm();
    }
    const MatrixXc hs = v.adjoint() * (level.ops.S * v).eval();
    const MatrixXc hm = v.adjoint() * (level.ops.M * v).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXc> es(
        0.5 * (hs + hs.adjoint()), 0.5 * (hm + hm.adjoint()));
    if (es.info() != Eigen::Success)
      throw std::runtime_error("inverse_iteration: block collapsed");
    v = (v * es.eigenvectors()).eval();
    result.lambdas = es.eigenvalues();
    result.iterations = step;
    result.max_residual = 0.0;
    for (Index j = 0; j < q; ++j) {
      const VectorXc mv = level.ops.M * v.col(j);
      const double r =
          (level.ops.S * v.col(j) - result.lambdas(j) * mv).norm() /
          mv.norm();
      result.max_residual = std::max(result.max_residual, r);
    }
    if (result.max_residual <= tol) break;
  }
  result.vectors = v;
  return result;
}

} // namespace maxcav
