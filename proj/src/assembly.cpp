// SPDX-License-Identifier: Apache-2.0
#include "maxcav/assembly.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace maxcav {

namespace {

struct CellGeometry {
  double volume = 0.0;
  Eigen::MatrixXd grads; // (dim+1) x dim rows of grad(lambda_a)
  Eigen::MatrixXd a_inv; // barycentric map [1;x] -> lambda

  Eigen::VectorXd barycentric(const Eigen::VectorXd& x) const {
    Eigen::VectorXd rhs(x.size() + 1);
    rhs(0) = 1.0;
    rhs.tail(x.size()) = x;
    return a_inv * rhs;
  }
};

CellGeometry cell_geometry(const Mesh& mesh, Index c) {
  const int dim = mesh.dim;
  Eigen::MatrixXd a(dim + 1, dim + 1);
  for (int j = 0; j < dim + 1; ++j) {
    a(0, j) = 1.0;
    a.col(j).tail(dim) = mesh.vertices.row(mesh.cells(c, j)).transpose();
  }
  CellGeometry geo;
  const double det = a.determinant();
  const double ref = dim == 2 ? 2.0 : 6.0;
  geo.volume = std::abs(det) / ref;
  if (!(geo.volume > 0.0))
    throw std::runtime_error("assemble_operators: degenerate cell " +
                             std::to_string(c));
  geo.a_inv = a.inverse();
  geo.grads = geo.a_inv.rightCols(dim);
  return geo;
}

// curl of the Whitney function of local edge (a,b): 2 grad(la) x grad(lb),
// scalar-valued in 2D.
Eigen::MatrixXd edge_curls(const CellGeometry& geo, int dim) {
  const auto& ledges = local_edges(dim);
  Eigen::MatrixXd curls(dim == 2 ? 1 : 3, Index(ledges.size()));
  for (size_t le = 0; le < ledges.size(); ++le) {
    const auto ga = geo.grads.row(ledges[le].first);
    const auto gb = geo.grads.row(ledges[le].second);
    if (dim == 2) {
      curls(0, Index(le)) = 2.0 * (ga(0) * gb(1) - ga(1) * gb(0));
    } else {
      curls.col(Index(le)) =
          2.0 * Eigen::Vector3d(ga(1) * gb(2) - ga(2) * gb(1),
                                ga(2) * gb(0) - ga(0) * gb(2),
                                ga(0) * gb(1) - ga(1) * gb(0));
    }
  }
  return curls;
}

// Whitney edge functions at one barycentric point, one column per local edge.
Eigen::MatrixXd edge_values(const CellGeometry& geo, int dim,
                            const Eigen::VectorXd& bary) {
  const auto& ledges = local_edges(dim);
  Eigen::MatrixXd w(dim, Index(ledges.size()));
  for (size_t le = 0; le < ledges.size(); ++le) {
    const int a = ledges[le].first, b = ledges[le].second;
    w.col(Index(le)) = bary(a) * geo.grads.row(b).transpose() -
                       bary(b) * geo.grads.row(a).transpose();
  }
  return w;
}

MatrixXc hermitian_part(const MatrixXc& a) {
  return 0.5 * (a + a.adjoint());
}

} // namespace

QuadratureRule QuadratureRule::simplex(int dim, int degree) {
  QuadratureRule rule;
  const double ref = dim == 2 ? 0.5 : 1.0 / 6.0;
  if (degree <= 1) {
    rule.points = Eigen::MatrixXd::Constant(1, dim + 1, 1.0 / (dim + 1));
    rule.weights = Eigen::VectorXd::Constant(1, ref);
    return rule;
  }
  if (degree > 2)
    throw std::invalid_argument("quadrature degree > 2 not provided");
  if (dim == 2) {
    // Midpoints of edges, exact through degree 2.
    rule.points.resize(3, 3);
    rule.points << 0.5, 0.5, 0.0, 0.5, 0.0, 0.5, 0.0, 0.5, 0.5;
    rule.weights = Eigen::VectorXd::Constant(3, ref / 3.0);
    return rule;
  }
  const double a = 0.5854101966249685;
  const double b = 0.1381966011250105;
  rule.points.resize(4, 4);
  rule.points << a, b, b, b, b, a, b, b, b, b, a, b, b, b, b, a;
  rule.weights = Eigen::VectorXd::Constant(4, ref / 4.0);
  return rule;
}

AssembledOperators assemble_operators(const Mesh& mesh,
                                      const EdgeTopology& topo,
                                      const MaterialMap& materials) {
  const int dim = mesh.dim;
  const auto& ledges = local_edges(dim);
  const int nle = int(ledges.size());
  const Index nfe = topo.free_edge_count();
  const Index nfv = topo.free_vertex_count();
  const QuadratureRule quad = QuadratureRule::simplex(dim, 2);
  const double ref = dim == 2 ? 0.5 : 1.0 / 6.0;

  std::map<int, std::pair<MatrixXc, MatrixXc>> tensors; // region -> (mu^-1, eps)
  for (const auto& [region, mat] : materials.regions)
    tensors[region] = {hermitian_part(mat.mu.inverse()),
                       hermitian_part(mat.eps)};

  std::vector<Eigen::Triplet<Complex>> ts, tm, tb;
  ts.reserve(size_t(mesh.cell_count()) * size_t(nle * nle));
  tm.reserve(size_t(mesh.cell_count()) * size_t(nle * nle));
  tb.reserve(size_t(mesh.cell_count()) * size_t((dim + 1) * nle));

  for (Index c = 0; c < mesh.cell_count(); ++c) {
    auto it = tensors.find(mesh.region_id(c));
    if (it == tensors.end())
      throw std::invalid_argument("assemble_operators: region " +
                                  std::to_string(mesh.region_id(c)) +
                                  " missing from materials");
    const auto& [mu_inv, eps] = it->second;
    const CellGeometry geo = cell_geometry(mesh, c);
    const double jac = geo.volume / ref;

    // curl-curl: integrand constant, one-point quadrature is exact.
    const MatrixXc curls = edge_curls(geo, dim).cast<Complex>();
    const MatrixXc s_loc = geo.volume * (curls.transpose() * mu_inv * curls);

    // mass and gradient coupling: integrands of degree two.
    const MatrixXc grads = geo.grads.cast<Complex>();
    MatrixXc m_loc = MatrixXc::Zero(nle, nle);
    MatrixXc b_loc = MatrixXc::Zero(dim + 1, nle);
    for (Index q = 0; q < quad.weights.size(); ++q) {
      const MatrixXc w =
          edge_values(geo, dim, quad.points.row(q).transpose())
              .cast<Complex>();
      const MatrixXc eps_w = eps * w;
      const double wq = quad.weights(q) * jac;
      m_loc += wq * (w.transpose() * eps_w);
      b_loc += wq * (grads * eps_w);
    }

    for (int i = 0; i < nle; ++i) {
      const Index ei = topo.cell_edges(c, i);
      const Index fi = topo.edge_free_index(ei);
      if (fi < 0) continue;
      const double si = topo.cell_edge_signs(c, i);
      for (int j = 0; j < nle; ++j) {
        const Index fj = topo.edge_free_index(topo.cell_edges(c, j));
        if (fj < 0) continue;
        const double sj = topo.cell_edge_signs(c, j);
        ts.emplace_back(int(fi), int(fj), si * sj * s_loc(i, j));
        tm.emplace_back(int(fi), int(fj), si * sj * m_loc(i, j));
      }
      for (int p = 0; p < dim + 1; ++p) {
        const Index fp = topo.vertex_free_index(mesh.cells(c, p));
        if (fp < 0) continue;
        tb.emplace_back(int(fp), int(fi), si * b_loc(p, i));
      }
    }
  }

  AssembledOperators ops;
  ops.n_edge = nfe;
  ops.n_vertex = nfv;
  ops.S.resize(nfe, nfe);
  ops.M.resize(nfe, nfe);
  ops.B.resize(nfv, nfe);
  ops.S.setFromTriplets(ts.begin(), ts.end());
  ops.M.setFromTriplets(tm.begin(), tm.end());
  ops.B.setFromTriplets(tb.begin(), tb.end());
  ops.G = discrete_gradient(topo);
  ops.S.makeCompressed();
  ops.M.makeCompressed();
  ops.B.makeCompressed();
  return ops;
}

SparseMatrixXd discrete_gradient(const EdgeTopology& topo) {
  std::vector<Eigen::Triplet<double>> tg;
  tg.reserve(size_t(topo.free_edge_count()) * 2);
  for (Index f = 0; f < topo.free_edge_count(); ++f) {
    const Index e = topo.free_edges(f);
    const Index tail = topo.vertex_free_index(topo.edges(e, 0));
    const Index head = topo.vertex_free_index(topo.edges(e, 1));
    if (tail >= 0) tg.emplace_back(int(f), int(tail), -1.0);
    if (head >= 0) tg.emplace_back(int(f), int(head), 1.0);
  }
  SparseMatrixXd g(topo.free_edge_count(), topo.free_vertex_count());
  g.setFromTriplets(tg.begin(), tg.end());
  g.makeCompressed();
  return g;
}

VectorXc interpolate_to_fine(const VectorXc& coarse_coeffs, const Mesh& coarse,
                             const EdgeTopology& coarse_topo, const Mesh& fine,
                             const EdgeTopology& fine_topo) {
  if (coarse_coeffs.size() != coarse_topo.free_edge_count())
    throw std::invalid_argument("interpolate_to_fine: coefficient size");
  if (!fine.parent || fine.parent_cell.size() != fine.cell_count() ||
      fine.parent->cell_count() != coarse.cell_count())
    throw std::invalid_argument(
        "interpolate_to_fine: fine mesh is not a refinement of coarse");
  const int dim = coarse.dim;

  // Full edge coefficients; boundary edges carry the essential value 0.
  VectorXc full = VectorXc::Zero(coarse_topo.edge_count());
  for (Index f = 0; f < coarse_topo.free_edge_count(); ++f)
    full(coarse_topo.free_edges(f)) = coarse_coeffs(f);

  std::vector<CellGeometry> geo_cache(size_t(coarse.cell_count()));
  std::vector<bool> cached(size_t(coarse.cell_count()), false);

  auto eval_coarse = [&](Index pc, const Eigen::VectorXd& x) -> VectorXc {
    if (!cached[size_t(pc)]) {
      geo_cache[size_t(pc)] = cell_geometry(coarse, pc);
      cached[size_t(pc)] = true;
    }
    const CellGeometry& geo = geo_cache[size_t(pc)];
    const Eigen::VectorXd bary = geo.barycentric(x);
    if (bary.minCoeff() < -1e-9 || bary.maxCoeff() > 1.0 + 1e-9)
      throw std::invalid_argument(
          "interpolate_to_fine: fine cell lies outside its claimed parent; "
          "meshes are not nested");
    const Eigen::MatrixXd w = edge_values(geo, dim, bary);
    VectorXc value = VectorXc::Zero(dim);
    const auto& ledges = local_edges(dim);
    for (size_t le = 0; le < ledges.size(); ++le) {
      const double sign = coarse_topo.cell_edge_signs(pc, Index(le));
      value += (sign * full(coarse_topo.cell_edges(pc, Index(le)))) *
               w.col(Index(le)).cast<Complex>();
    }
    return value;
  };

  VectorXc out = VectorXc::Zero(fine_topo.free_edge_count());
  for (Index f = 0; f < fine_topo.free_edge_count(); ++f) {
    const Index e = fine_topo.free_edges(f);
    const Index fc = fine_topo.edge_cell(e);
    const Index pc = fine.parent_cell(fc);
    const Eigen::VectorXd xa =
        fine.vertices.row(fine_topo.edges(e, 0)).transpose();
    const Eigen::VectorXd xb =
        fine.vertices.row(fine_topo.edges(e, 1)).transpose();
    // Trapezoid rule along the edge, exact for the affine coarse field.
    const VectorXc mean = 0.5 * (eval_coarse(pc, xa) + eval_coarse(pc, xb));
    out(f) = (xb - xa).cast<Complex>().cwiseProduct(mean).sum();
  }
  return out;
}

void write_triplets(const SparseMatrixXc& a, std::ostream& out) {
  out << a.rows() << ' ' << a.cols() << ' ' << a.nonZeros() << '\n';
  char buf[128];
  for (Index r = 0; r < a.outerSize(); ++r)
    for (SparseMatrixXc::InnerIterator it(a, r); it; ++it) {
      std::snprintf(buf, sizeof buf, "%lld %lld %.17g %.17g",
                    (long long)it.row(), (long long)it.col(),
                    it.value().real(), it.value().imag());
      out << buf << '\n';
    }
}

SparseMatrixXc read_triplets(std::istream& in) {
  Index rows = 0, cols = 0, nnz = 0;
  if (!(in >> rows >> cols >> nnz))
    throw std::runtime_error("triplet parse error: bad header");
  std::vector<Eigen::Triplet<Complex>> ts;
  ts.reserve(size_t(nnz));
  for (Index k = 0; k < nnz; ++k) {
    Index i = 0, j = 0;
    double re = 0, im = 0;
    if (!(in >> i >> j >> re >> im))
      throw std::runtime_error("triplet parse error at entry " +
                               std::to_string(k));
    ts.emplace_back(int(i), int(j), Complex(re, im));
  }
  SparseMatrixXc a(rows, cols);
  a.setFromTriplets(ts.begin(), ts.end());
  a.makeCompressed();
  return a;
}

} // namespace maxcav
