// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance runs for the benchmark cavities. Each criterion
// prints one pass/fail line; the exit code is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "maxcav/experiment.hpp"

using namespace maxcav;
using nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;
int failures = 0;

std::string fmt(const char* spec, ...) {
  char buf[512];
  va_list args;
  va_start(args, spec);
  std::vsnprintf(buf, sizeof buf, spec, args);
  va_end(args);
  return buf;
}

void criterion(int id, const std::string& label, bool pass,
               const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", id,
              label.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

json vacuum_region(int region) {
  return json{{"region", region},
              {"mu", {{{1, 0}, {0, 0}, {0, 0}},
                      {{0, 0}, {1, 0}, {0, 0}},
                      {{0, 0}, {0, 0}, {1, 0}}}},
              {"eps", {{{1, 0}, {0, 0}, {0, 0}},
                       {{0, 0}, {1, 0}, {0, 0}},
                       {{0, 0}, {0, 0}, {1, 0}}}}};
}

double row_lambda(const ConvergenceReport& rep, int target, int level,
                  bool direct = false) {
  for (const auto& r : rep.rows)
    if (r.target == target && r.level == level)
      return direct ? r.lambda_direct : r.lambda;
  return std::numeric_limits<double>::quiet_NaN();
}

int max_level(const ConvergenceReport& rep) {
  int l = 0;
  for (const auto& r : rep.rows) l = std::max(l, r.level);
  return l;
}

// ---------------------------------------------------------------------------

void cube_benchmark() {
  const json doc{
      {"name", "acceptance_cube"},
      {"domain", {{"kind", "unit_cube"}, {"resolution", 4}}},
      {"materials", {{"regions", {vacuum_region(0)}}}},
      {"refinement", {{"uniform_levels", 2}}},
      {"scheme",
       {{"type", "fixed_shift"}, {"i0", 0}, {"targets", {1, 4, 6}},
        {"coarse_pairs", 12}}},
      {"seed", 20250801}};
  const ExperimentConfig cfg = parse_config(doc);

  const auto t0 = std::chrono::steady_clock::now();
  RunOptions opts;
  opts.oracle = true;
  const ConvergenceReport rep = run_experiment(cfg, opts);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  if (rep.failed) {
    criterion(1, "cube benchmark", false, "run failed: " + rep.failure);
    criterion(2, "scheme vs direct agreement", false, "run failed");
    return;
  }

  const int l = max_level(rep);
  const double exact[3] = {2 * kPi * kPi, 3 * kPi * kPi, 5 * kPi * kPi};
  const int targets[3] = {1, 4, 6};
  bool pass1 = seconds <= 300.0;
  std::string detail1;
  for (int t = 0; t < 3; ++t) {
    const double final_lambda = row_lambda(rep, targets[t], l);
    const double err = std::abs(final_lambda - exact[t]) / exact[t];
    const double e_prev =
        std::abs(row_lambda(rep, targets[t], l - 1) - exact[t]);
    const double e_last = std::abs(final_lambda - exact[t]);
    double dof_prev = 0, dof_last = 0;
    for (const auto& r : rep.rows)
      if (r.target == targets[t]) {
        if (r.level == l - 1) dof_prev = double(r.dof);
        if (r.level == l) dof_last = double(r.dof);
      }
    const double rate =
        compute_rates({e_prev, e_last}, {dof_prev, dof_last}, 3)[0];
    const bool ok = err <= 5e-3 && rate >= 1.6 && rate <= 2.4;
    pass1 = pass1 && ok;
    detail1 += fmt("l%d=%.4f err %.1e R %.2f; ", targets[t], final_lambda,
                   err, rate);
  }
  detail1 += fmt("%.0fs", seconds);
  criterion(1, "cube benchmark errors <= 5e-3, rates in [1.6,2.4]", pass1,
            detail1);

  bool pass2 = true;
  double worst = 0.0;
  for (const auto& r : rep.rows) {
    if (std::isnan(r.lambda_direct)) {
      pass2 = false;
      continue;
    }
    const double gap =
        std::abs(r.lambda - r.lambda_direct) / std::abs(r.lambda_direct);
    worst = std::max(worst, gap);
    pass2 = pass2 && gap <= 1e-3;
  }
  criterion(2, "scheme agrees with per-level direct eigenvalues to 1e-3",
            pass2, fmt("worst relative gap %.2e", worst));
}

void cavity_zero_mode() {
  try {
    auto mesh = std::make_shared<Mesh>(
        generate_mesh({DomainKind::CubeCavity, {}}, 2));
    const LevelContext level = make_level(mesh, MaterialMap::vacuum(3));
    CoarseSolveOptions opts;
    opts.num_pairs = 5;
    opts.sigma = -1.0;
    const SpectrumResult spec = solve_coarse_eigen(level.ops, opts);
    int n_zero = 0;
    for (const auto& p : spec.pairs)
      if (std::abs(p.lambda) <= 1e-8) ++n_zero;
    const bool pass = n_zero == 1 && spec.pairs[1].lambda >= 1.0;
    criterion(3, "cavity with disconnected boundary has one zero mode", pass,
              fmt("lambda1 %.2e, lambda2 %.4f", spec.pairs[0].lambda,
                  spec.pairs[1].lambda));
  } catch (const std::exception& e) {
    criterion(3, "cavity with disconnected boundary has one zero mode", false,
              e.what());
  }
}

void cube_spurious_free() {
  try {
    auto mesh = std::make_shared<Mesh>(
        generate_mesh({DomainKind::UnitCube, {}}, 4));
    const LevelContext level = make_level(mesh, MaterialMap::vacuum(3));
    CoarseSolveOptions opts;
    opts.num_pairs = 12;
    opts.sigma = -1.0;
    const SpectrumResult spec = solve_coarse_eigen(level.ops, opts);
    bool window_clear = spec.zero_modes.empty();
    for (const auto& p : spec.pairs)
      if (p.lambda > 1e-8 && p.lambda < 0.75 * 2 * kPi * kPi)
        window_clear = false;
    const bool sizes = spec.clusters.size() >= 2 &&
                       spec.clusters[0].second == 3 &&
                       spec.clusters[1].second == 2;
    double mean1 = 0, mean2 = 0;
    for (int j = 0; j < 3; ++j) mean1 += spec.pairs[size_t(j)].lambda / 3;
    for (int j = 3; j < 5; ++j) mean2 += spec.pairs[size_t(j)].lambda / 2;
    const bool means =
        std::abs(mean1 - 2 * kPi * kPi) <= 0.05 * 2 * kPi * kPi &&
        std::abs(mean2 - 3 * kPi * kPi) <= 0.05 * 3 * kPi * kPi;
    criterion(4, "coarse cube spectrum is spurious-free with clusters 3+2",
              window_clear && sizes && means,
              fmt("cluster means %.4f, %.4f", mean1, mean2));
  } catch (const std::exception& e) {
    criterion(4, "coarse cube spectrum is spurious-free with clusters 3+2",
              false, e.what());
  }
}

void complex_materials() {
  const json doc{
      {"name", "acceptance_complex_mu"},
      {"domain", {{"kind", "thick_l"}, {"resolution", 2}}},
      {"materials",
       {{"regions",
         {{{"region", 0},
           {"mu", {{{2, 0}, {1, -2}, {0, -1}},
                   {{1, 2}, {4, 0}, {0, 1}},
                   {{0, 1}, {0, -1}, {5, 0}}}},
           {"eps", {{{1, 0}, {0, 0}, {0, 0}},
                    {{0, 0}, {1, 0}, {0, 0}},
                    {{0, 0}, {0, 0}, {1, 0}}}}}}}}},
      {"refinement", {{"uniform_levels", 2}}},
      {"scheme",
       {{"type", "fixed_shift"}, {"i0", 1}, {"targets", {1}},
        {"coarse_pairs", 6}}},
      {"seed", 20250801}};
  const ConvergenceReport rep = run_experiment(parse_config(doc));
  if (rep.failed) {
    criterion(5, "complex Hermitian permeability", false, rep.failure);
    return;
  }
  // rayleigh_quotient enforces |imag| <= 1e-10 relative on both forms and
  // throws otherwise, so a finished run certifies real eigenvalues.
  bool positive = true;
  for (const auto& r : rep.rows) positive = positive && r.lambda > 0;
  const double lambda1 = row_lambda(rep, 1, max_level(rep));
  const double err = std::abs(lambda1 - 2.9138) / 2.9138;
  criterion(5, "complex Hermitian permeability, lambda1 within 5% of 2.9138",
            positive && err <= 0.05,
            fmt("lambda1 %.4f, rel err %.2e", lambda1, err));
}

void slab_discontinuous_eps() {
  json region1 = vacuum_region(1);
  region1["eps"] = {{{2, 0}, {0, 0}, {0, 0}},
                    {{0, 0}, {2, 0}, {0, 0}},
                    {{0, 0}, {0, 0}, {2, 0}}};
  const json doc{
      {"name", "acceptance_slab"},
      {"domain",
       {{"kind", "slab"},
        {"resolution", 6},
        {"parameters", {{"thickness", 0.1}}}}},
      {"materials", {{"regions", {vacuum_region(0), region1}}}},
      {"refinement", {{"uniform_levels", 2}}},
      {"scheme",
       {{"type", "fixed_shift"}, {"i0", 0}, {"targets", {1, 2}},
        {"coarse_pairs", 6}}},
      {"seed", 20250801}};
  const ConvergenceReport rep = run_experiment(parse_config(doc));
  if (rep.failed) {
    criterion(6, "half-loaded slab", false, rep.failure);
    return;
  }
  const int l = max_level(rep);
  const double l1 = row_lambda(rep, 1, l), l2 = row_lambda(rep, 2, l);
  const double e1 = std::abs(l1 - 12.5174) / 12.5174;
  const double e2 = std::abs(l2 - 29.6480) / 29.6480;
  criterion(6, "slab with discontinuous eps within 0.5% of references",
            e1 <= 5e-3 && e2 <= 5e-3,
            fmt("lambda1 %.5f (err %.1e), lambda2 %.4f (err %.1e)", l1, e1,
                l2, e2));
}

void thick_l_targets() {
  const json uniform_doc{
      {"name", "acceptance_thick_l"},
      {"domain", {{"kind", "thick_l"}, {"resolution", 2}}},
      {"materials", {{"regions", {vacuum_region(0)}}}},
      {"refinement", {{"uniform_levels", 2}}},
      {"scheme",
       {{"type", "fixed_shift"}, {"i0", 1}, {"targets", {1, 2, 3}},
        {"coarse_pairs", 8}}},
      {"seed", 20250801}};
  const ConvergenceReport uni = run_experiment(parse_config(uniform_doc));
  if (uni.failed) {
    criterion(7, "thick-L targets", false, uni.failure);
    return;
  }
  const int lu = max_level(uni);
  const double l3 = row_lambda(uni, 3, lu);
  const double e3 = std::abs(l3 - 13.4036) / 13.4036;

  // Grading toward the reentrant edge must beat uniform refinement on the
  // singular targets at comparable cost.
  const json local_doc{
      {"name", "acceptance_thick_l_local"},
      {"domain", {{"kind", "thick_l"}, {"resolution", 2}}},
      {"materials", {{"regions", {vacuum_region(0)}}}},
      {"refinement",
       {{"uniform_levels", 1}, {"local_passes", 2}, {"local_ratio", 0.3}}},
      {"scheme",
       {{"type", "fixed_shift"}, {"i0", 1}, {"targets", {1, 2}},
        {"coarse_pairs", 8}}},
      {"seed", 20250801}};
  const ConvergenceReport loc = run_experiment(parse_config(local_doc));
  if (loc.failed) {
    criterion(7, "thick-L targets", false, loc.failure);
    return;
  }
  const int ll = max_level(loc);
  Index dof_uni = 0, dof_loc = 0;
  for (const auto& r : uni.rows)
    if (r.level == lu) dof_uni = r.dof;
  for (const auto& r : loc.rows)
    if (r.level == ll) dof_loc = r.dof;

  const double refs[2] = {9.6397, 11.3452};
  bool improves = dof_loc <= dof_uni;
  std::string detail = fmt("lambda3 %.4f (err %.1e); dof %lld vs %lld; ", l3,
                           e3, (long long)dof_loc, (long long)dof_uni);
  for (int t = 1; t <= 2; ++t) {
    const double eu = std::abs(row_lambda(uni, t, lu) - refs[t - 1]);
    const double el = std::abs(row_lambda(loc, t, ll) - refs[t - 1]);
    improves = improves && el < eu;
    detail += fmt("l%d err %.4f->%.4f; ", t, eu, el);
  }
  criterion(7, "thick-L: smooth target within 1%, graded meshes improve",
            e3 <= 1e-2 && improves, detail);
}

// ---------------------------------------------------------------------------
// Property suite.

std::mt19937_64 rng(99);

VectorXc random_vector(Index n) {
  std::normal_distribution<double> normal;
  VectorXc v(n);
  for (Index i = 0; i < n; ++i) v(i) = Complex(normal(rng), normal(rng));
  return v;
}

bool exact_sequence_everywhere(std::string& detail) {
  struct Case {
    DomainKind kind;
    int res;
    MaterialMap mats;
  };
  MaterialMap coupled = MaterialMap::vacuum(3);
  coupled.regions[0].mu << 2.0, Complex(1, -2), Complex(0, -1),
      Complex(1, 2), 4.0, Complex(0, 1), Complex(0, 1), Complex(0, -1), 5.0;
  const std::vector<Case> cases = {
      {DomainKind::UnitCube, 2, MaterialMap::vacuum(3)},
      {DomainKind::UnitCube, 2, coupled},
      {DomainKind::Slab, 2, MaterialMap::piecewise_eps(3, 1.0, 2.0)},
      {DomainKind::ThickL, 2, MaterialMap::vacuum(3)},
      {DomainKind::CubeCavity, 2, MaterialMap::vacuum(3)},
      {DomainKind::UnitSquare2D, 4, MaterialMap::vacuum(2)},
  };
  double worst = 0.0;
  for (const auto& tc : cases) {
    const Mesh mesh = generate_mesh({tc.kind, {}}, tc.res);
    const EdgeTopology topo = build_topology(mesh);
    const AssembledOperators ops = assemble_operators(mesh, topo, tc.mats);
    const MatrixXc s(ops.S), m(ops.M), b(ops.B);
    const MatrixXc g = ops.G.cast<Complex>();
    if (g.cols() == 0) continue;
    const double s_scale = std::max(1e-300, s.cwiseAbs().maxCoeff());
    worst = std::max(worst, (s * g).cwiseAbs().maxCoeff() / s_scale);
    const double m_scale = m.cwiseAbs().maxCoeff();
    worst = std::max(
        worst, (b - g.transpose() * m).cwiseAbs().maxCoeff() / m_scale);
  }
  detail = fmt("worst relative defect %.2e", worst);
  return worst <= 1e-12;
}

bool rayleigh_identity(std::string& detail) {
  const Mesh mesh = generate_mesh({DomainKind::UnitCube, {}}, 2);
  const EdgeTopology topo = build_topology(mesh);
  const AssembledOperators ops =
      assemble_operators(mesh, topo, MaterialMap::vacuum(3));
  const MatrixXc s(ops.S), m(ops.M);
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXc> es(s, m);
  if (es.info() != Eigen::Success) {
    detail = "dense eigensolve failed";
    return false;
  }
  Index k = 0;
  while (es.eigenvalues()(k) < 1e-6) ++k;
  const double lambda = es.eigenvalues()(k);
  const VectorXc u = Complex(0.8, -0.6) * es.eigenvectors().col(k);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const VectorXc v = random_vector(ops.n_edge);
    const double r = std::real(v.dot(s * v)) / std::real(v.dot(m * v));
    const VectorXc d = v - u;
    const double m_v = std::real(v.dot(m * v));
    const double lhs = r - lambda;
    const double rhs = std::real(d.dot(s * d)) / m_v -
                       lambda * std::real(d.dot(m * d)) / m_v;
    worst = std::max(
        worst, std::abs(lhs - rhs) / (std::abs(lhs) + std::abs(rhs) + 1.0));
  }
  detail = fmt("worst identity residual %.2e", worst);
  return worst <= 1e-10;
}

bool scheme_equivalence(std::string& detail) {
  Hierarchy h;
  h.a_shift = 1.0;
  auto mesh = std::make_shared<Mesh>(
      generate_mesh({DomainKind::UnitSquare2D, {}}, 4));
  h.levels.push_back(make_level(mesh, MaterialMap::vacuum(2)));
  for (int i = 0; i < 2; ++i)
    h.levels.push_back(make_level(
        std::make_shared<Mesh>(refine_uniform(*h.levels.back().mesh)),
        MaterialMap::vacuum(2)));
  CoarseSolveOptions copts;
  copts.num_pairs = 4;
  copts.sigma = -1.0;
  const SpectrumResult spec = solve_coarse_eigen(h.levels[0].ops, copts);
  SchemeConfig rq;
  rq.scheme = SchemeKind::RayleighQuotient;
  rq.target_pair = 0;
  SchemeConfig fs = rq;
  fs.scheme = SchemeKind::FixedShift;
  fs.i0 = 99;
  const SchemeResult a = run_scheme(h, rq, spec);
  const SchemeResult b = run_scheme(h, fs, spec);
  double worst = 0.0;
  for (size_t i = 0; i < a.trace.size(); ++i)
    worst = std::max(worst, std::abs(a.trace[i].lambda - b.trace[i].lambda) /
                                std::abs(a.trace[i].lambda));
  detail = fmt("max relative lambda gap %.2e", worst);
  return worst <= 1e-14;
}

bool coarse_dense_equivalence(std::string& detail) {
  const Mesh mesh = generate_mesh({DomainKind::UnitCube, {}}, 3);
  const EdgeTopology topo = build_topology(mesh);
  const AssembledOperators ops =
      assemble_operators(mesh, topo, MaterialMap::vacuum(3));
  if (ops.n_edge > 300) {
    detail = "mesh too large for the dense oracle";
    return false;
  }
  const MatrixXc b(ops.B);
  Eigen::JacobiSVD<MatrixXc> svd(b, Eigen::ComputeFullV);
  Index rank = 0;
  for (Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > svd.singularValues()(0) * 1e-12) ++rank;
  const MatrixXc z = svd.matrixV().rightCols(ops.n_edge - rank);
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXc> es(
      MatrixXc(z.adjoint() * ops.S * z), MatrixXc(z.adjoint() * ops.M * z));
  CoarseSolveOptions opts;
  opts.num_pairs = 8;
  opts.sigma = -1.0;
  const SpectrumResult spec = solve_coarse_eigen(ops, opts);
  double worst = 0.0;
  for (int j = 0; j < opts.num_pairs; ++j)
    worst = std::max(
        worst, std::abs(spec.pairs[size_t(j)].lambda - es.eigenvalues()(j)) /
                   std::max(1e-300, std::abs(es.eigenvalues()(j))));
  detail = fmt("max relative gap %.2e over %d pairs", worst, opts.num_pairs);
  return worst <= 1e-8;
}

bool square_spectrum_rate(std::string& detail) {
  const json doc{
      {"name", "acceptance_square"},
      {"domain", {{"kind", "unit_square_2d"}, {"resolution", 4}}},
      {"refinement", {{"uniform_levels", 3}}},
      {"scheme",
       {{"type", "fixed_shift"}, {"i0", 0}, {"targets", {1, 3}},
        {"coarse_pairs", 6}}},
      {"seed", 20250801}};
  const ConvergenceReport rep = run_experiment(parse_config(doc));
  if (rep.failed) {
    detail = rep.failure;
    return false;
  }
  // Spectrum check on a finer standalone mesh where the discretization
  // error no longer masks the separable pattern.
  const double expected[6] = {kPi * kPi,     kPi * kPi,     2 * kPi * kPi,
                              4 * kPi * kPi, 4 * kPi * kPi, 5 * kPi * kPi};
  bool spectrum_ok = true;
  {
    auto mesh = std::make_shared<Mesh>(
        generate_mesh({DomainKind::UnitSquare2D, {}}, 8));
    const LevelContext level = make_level(mesh, MaterialMap::vacuum(2));
    CoarseSolveOptions copts;
    copts.num_pairs = 6;
    copts.sigma = -1.0;
    const SpectrumResult spec = solve_coarse_eigen(level.ops, copts);
    for (int j = 0; j < 6; ++j)
      spectrum_ok = spectrum_ok &&
                    std::abs(spec.pairs[size_t(j)].lambda - expected[j]) <=
                        0.05 * expected[j];
  }
  const int l = max_level(rep);
  bool rates_ok = true;
  std::string rate_str;
  for (int target : {1, 3}) {
    const double exact = target == 1 ? kPi * kPi : 2 * kPi * kPi;
    const double e_prev = std::abs(row_lambda(rep, target, l - 1) - exact);
    const double e_last = std::abs(row_lambda(rep, target, l) - exact);
    double dof_prev = 0, dof_last = 0;
    for (const auto& r : rep.rows)
      if (r.target == target) {
        if (r.level == l - 1) dof_prev = double(r.dof);
        if (r.level == l) dof_last = double(r.dof);
      }
    const double rate =
        compute_rates({e_prev, e_last}, {dof_prev, dof_last}, 2)[0];
    rates_ok = rates_ok && rate >= 1.6 && rate <= 2.4;
    rate_str += fmt("R%d=%.2f ", target, rate);
  }
  detail =
      fmt("spectrum within 6%%, rates vs Dof^(-1/2): %s", rate_str.c_str());
  return spectrum_ok && rates_ok;
}

void property_suite() {
  std::string d1, d2, d3, d4, d5;
  const bool p1 = exact_sequence_everywhere(d1);
  const bool p2 = rayleigh_identity(d2);
  const bool p3 = scheme_equivalence(d3);
  const bool p4 = coarse_dense_equivalence(d4);
  const bool p5 = square_spectrum_rate(d5);
  criterion(8, "property suite", p1 && p2 && p3 && p4 && p5,
            fmt("exact sequence: %s | identity: %s | schemes: %s | dense "
                "oracle: %s | 2D: %s",
                d1.c_str(), d2.c_str(), d3.c_str(), d4.c_str(), d5.c_str()));
}

} // namespace

int main() {
  cube_benchmark();
  cavity_zero_mode();
  cube_spurious_free();
  complex_materials();
  slab_discontinuous_eps();
  thick_l_targets();
  property_suite();
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
