// SPDX-License-Identifier: Apache-2.0
#include "maxcav/mesh.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace maxcav {

namespace {

using Key64 = std::uint64_t;

// Packed keys for vertex tuples; valid while vertex counts stay below 2^21.
constexpr Index kMaxPackedVertex = Index(1) << 21;

Key64 edge_key(Index a, Index b) {
  if (a > b) std::swap(a, b);
  return (Key64(a) << 21) | Key64(b);
}

Key64 face_key(Index a, Index b, Index c) {
  std::array<Index, 3> f{a, b, c};
  std::sort(f.begin(), f.end());
  return (Key64(f[0]) << 42) | (Key64(f[1]) << 21) | Key64(f[2]);
}

void require_packable(Index nv) {
  if (nv >= kMaxPackedVertex)
    throw std::runtime_error("mesh too large for packed entity keys");
}

double simplex_volume(const Eigen::MatrixXd& verts,
                      const Eigen::MatrixXi& cells, int dim, Index c) {
  if (dim == 2) {
    Eigen::Vector2d e1 = verts.row(cells(c, 1)) - verts.row(cells(c, 0));
    Eigen::Vector2d e2 = verts.row(cells(c, 2)) - verts.row(cells(c, 0));
    return std::abs(e1.x() * e2.y() - e1.y() * e2.x()) / 2.0;
  }
  Eigen::Vector3d e1 = verts.row(cells(c, 1)) - verts.row(cells(c, 0));
  Eigen::Vector3d e2 = verts.row(cells(c, 2)) - verts.row(cells(c, 0));
  Eigen::Vector3d e3 = verts.row(cells(c, 3)) - verts.row(cells(c, 0));
  return std::abs(e1.cross(e2).dot(e3)) / 6.0;
}

// Faces are the (dim-1)-subsimplices: triangle edges in 2D, tet faces in 3D.
std::vector<std::array<int, 3>> local_faces(int dim) {
  if (dim == 2) return {{0, 1, -1}, {0, 2, -1}, {1, 2, -1}};
  return {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}};
}

Eigen::MatrixXi derive_boundary_faces(const Eigen::MatrixXi& cells, int dim,
                                      Index nv) {
  require_packable(nv);
  const auto faces = local_faces(dim);
  std::unordered_map<Key64, int> count;
  count.reserve(cells.rows() * faces.size());
  for (Index c = 0; c < cells.rows(); ++c)
    for (const auto& f : faces) {
      Key64 k = dim == 2 ? edge_key(cells(c, f[0]), cells(c, f[1]))
                         : face_key(cells(c, f[0]), cells(c, f[1]),
                                    cells(c, f[2]));
      ++count[k];
    }
  std::vector<std::array<Index, 3>> bnd;
  for (auto [k, n] : count) {
    if (n != 1) continue;
    if (dim == 2)
      bnd.push_back({Index(k >> 21), Index(k & (kMaxPackedVertex - 1)), -1});
    else
      bnd.push_back({Index(k >> 42), Index((k >> 21) & (kMaxPackedVertex - 1)),
                     Index(k & (kMaxPackedVertex - 1))});
  }
  std::sort(bnd.begin(), bnd.end());
  Eigen::MatrixXi out(Index(bnd.size()), dim);
  for (Index i = 0; i < out.rows(); ++i)
    for (int j = 0; j < dim; ++j) out(i, j) = int(bnd[size_t(i)][size_t(j)]);
  return out;
}

struct GridSpec {
  int dim = 3;
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d step = Eigen::Vector3d::Ones();
  Eigen::Vector3i count = Eigen::Vector3i::Ones(); // cells per axis
};

// Kuhn split of a structured grid, reflected per axis by index parity: a box
// is mirrored in x iff i is odd, in y iff j is odd, in z iff k is odd. Face
// neighbors differ in exactly the mirrored axis and the mirror maps the
// shared-face diagonal onto itself, so the mesh is conforming, while the
// reflections keep the triangulation close to cubic symmetry. Cells are
// stored in diagonal path order with bisection tag 0.
Mesh structured_mesh(const GridSpec& g,
                     const std::function<bool(const Eigen::Vector3d&)>& keep,
                     const std::function<int(const Eigen::Vector3d&)>& region) {
  const int dim = g.dim;
  const Eigen::Vector3i n = g.count;
  const Index nvx = n.x() + 1, nvy = n.y() + 1,
              nvz = dim == 3 ? n.z() + 1 : 1;
  auto vid = [&](Index i, Index j, Index k) {
    return i + nvx * (j + nvy * k);
  };

  static const int perms3[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                   {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  static const int perms2[2][2] = {{0, 1}, {1, 0}};

  std::vector<std::array<int, 4>> cells;
  std::vector<int> regions;
  const Index nz_cells = dim == 3 ? n.z() : 1;
  for (Index k = 0; k < nz_cells; ++k)
    for (Index j = 0; j < n.y(); ++j)
      for (Index i = 0; i < n.x(); ++i) {
        Eigen::Vector3d center =
            g.origin + g.step.cwiseProduct(
                           Eigen::Vector3d(i + 0.5, j + 0.5,
                                           dim == 3 ? k + 0.5 : 0.0));
        if (dim == 2) center.z() = 0.0;
        if (!keep(center)) continue;
        const int reg = region(center);
        if (dim == 2) {
          for (const auto& p : perms2) {
            Eigen::Vector3i b(0, 0, 0);
            std::array<int, 4> tri{int(vid(i, j, 0)), 0, 0, -1};
            b[p[0]] += 1;
            tri[1] = int(vid(i + b.x(), j + b.y(), 0));
            tri[2] = int(vid(i + 1, j + 1, 0));
            cells.push_back(tri);
            regions.push_back(reg);
          }
        } else {
          const Eigen::Vector3i mirror(int(i & 1), int(j & 1), int(k & 1));
          auto corner = [&](Eigen::Vector3i b) {
            for (int a = 0; a < 3; ++a)
              if (mirror[a]) b[a] = 1 - b[a];
            return vid(i + b.x(), j + b.y(), k + b.z());
          };
          for (const auto& p : perms3) {
            Eigen::Vector3i b(0, 0, 0);
            std::array<int, 4> tet;
            tet[0] = int(corner(b));
            b[p[0]] = 1;
            tet[1] = int(corner(b));
            b[p[1]] = 1;
            tet[2] = int(corner(b));
            tet[3] = int(corner(Eigen::Vector3i(1, 1, 1)));
            cells.push_back(tet);
            regions.push_back(reg);
          }
        }
      }

  // Compact away vertices that no kept cell references.
  const Index nv_full = nvx * nvy * nvz;
  std::vector<Index> remap(size_t(nv_full), -1);
  Index nv = 0;
  for (const auto& cell : cells)
    for (int a = 0; a < dim + 1; ++a)
      if (remap[size_t(cell[size_t(a)])] < 0) remap[size_t(cell[size_t(a)])] = nv++;

  Mesh mesh;
  mesh.dim = dim;
  mesh.vertices.resize(nv, dim);
  for (Index k = 0; k < nvz; ++k)
    for (Index j = 0; j < nvy; ++j)
      for (Index i = 0; i < nvx; ++i) {
        const Index r = remap[size_t(vid(i, j, k))];
        if (r < 0) continue;
        mesh.vertices(r, 0) = g.origin.x() + g.step.x() * double(i);
        mesh.vertices(r, 1) = g.origin.y() + g.step.y() * double(j);
        if (dim == 3) mesh.vertices(r, 2) = g.origin.z() + g.step.z() * double(k);
      }
  mesh.cells.resize(Index(cells.size()), dim + 1);
  mesh.region_id.resize(Index(cells.size()));
  mesh.cell_tag = Eigen::VectorXi::Zero(Index(cells.size()));
  for (Index c = 0; c < mesh.cells.rows(); ++c) {
    for (int a = 0; a < dim + 1; ++a)
      mesh.cells(c, a) = int(remap[size_t(cells[size_t(c)][size_t(a)])]);
    mesh.region_id(c) = regions[size_t(c)];
  }
  mesh.boundary_faces = derive_boundary_faces(mesh.cells, dim, nv);
  return mesh;
}

int midpoint_vertex(std::unordered_map<Key64, int>& split,
                    std::vector<Eigen::Vector3d>& verts, int a, int b) {
  const Key64 key = edge_key(a, b);
  auto it = split.find(key);
  if (it != split.end()) return it->second;
  const int m = int(verts.size());
  verts.push_back(0.5 * (verts[size_t(a)] + verts[size_t(b)]));
  split.emplace(key, m);
  return m;
}

bool has_tags(const Mesh& mesh);
Mesh bisect_refine(const Mesh& mesh,
                   const std::function<int(Index)>& owed_bisections);

} // namespace

DomainKind domain_kind_from_string(const std::string& name) {
  if (name == "unit_cube") return DomainKind::UnitCube;
  if (name == "thick_l") return DomainKind::ThickL;
  if (name == "slab") return DomainKind::Slab;
  if (name == "cube_cavity") return DomainKind::CubeCavity;
  if (name == "unit_square_2d") return DomainKind::UnitSquare2D;
  throw std::invalid_argument("unknown domain kind: " + name);
}

std::string to_string(DomainKind kind) {
  switch (kind) {
    case DomainKind::UnitCube: return "unit_cube";
    case DomainKind::ThickL: return "thick_l";
    case DomainKind::Slab: return "slab";
    case DomainKind::CubeCavity: return "cube_cavity";
    case DomainKind::UnitSquare2D: return "unit_square_2d";
  }
  throw std::invalid_argument("unknown domain kind");
}

double Mesh::cell_volume(Index c) const {
  return simplex_volume(vertices, cells, dim, c);
}

double Mesh::cell_diameter(Index c) const {
  double d = 0.0;
  for (const auto& [a, b] : local_edges(dim))
    d = std::max(d, (vertices.row(cells(c, a)) - vertices.row(cells(c, b)))
                        .norm());
  return d;
}

double Mesh::total_volume() const {
  double v = 0.0;
  for (Index c = 0; c < cell_count(); ++c) v += cell_volume(c);
  return v;
}

double LineSegment::distance(const Eigen::Vector3d& x) const {
  const double dn = direction.squaredNorm();
  double t = dn > 0 ? direction.dot(x - point) / dn : 0.0;
  t = std::clamp(t, t0, t1);
  return (x - (point + t * direction)).norm();
}

LineSegment LineSegment::thick_l_reentrant_edge() {
  LineSegment seg;
  seg.point = Eigen::Vector3d::Zero();
  seg.direction = Eigen::Vector3d::UnitZ();
  seg.t0 = 0.0;
  seg.t1 = 1.0;
  return seg;
}

Mesh generate_mesh(const DomainSpec& spec, int resolution) {
  if (resolution < 1)
    throw std::invalid_argument("generate_mesh: resolution must be >= 1");
  const int n = resolution;
  GridSpec g;
  auto all = [](const Eigen::Vector3d&) { return true; };
  auto zero = [](const Eigen::Vector3d&) { return 0; };
  switch (spec.kind) {
    case DomainKind::UnitCube: {
      g.origin = Eigen::Vector3d(-0.5, -0.5, -0.5);
      g.step = Eigen::Vector3d::Constant(1.0 / n);
      g.count = Eigen::Vector3i(n, n, n);
      return structured_mesh(g, all, zero);
    }
    case DomainKind::UnitSquare2D: {
      g.dim = 2;
      g.origin = Eigen::Vector3d(0, 0, 0);
      g.step = Eigen::Vector3d(1.0 / n, 1.0 / n, 1.0);
      g.count = Eigen::Vector3i(n, n, 1);
      return structured_mesh(g, all, zero);
    }
    case DomainKind::Slab: {
      if (n % 2 != 0)
        throw std::invalid_argument(
            "generate_mesh: slab resolution must be even so the material "
            "interface x3=0 lies on a grid plane");
      double th = 0.1;
      if (auto it = spec.parameters.find("thickness");
          it != spec.parameters.end())
        th = it->second;
      if (th <= 0) throw std::invalid_argument("slab thickness must be > 0");
      const int ny = std::max(1, int(std::lround(th * n)));
      g.origin = Eigen::Vector3d(-0.5, 0.0, -0.5);
      g.step = Eigen::Vector3d(1.0 / n, th / ny, 1.0 / n);
      g.count = Eigen::Vector3i(n, ny, n);
      return structured_mesh(g, all, [](const Eigen::Vector3d& c) {
        return c.z() > 0 ? 1 : 0;
      });
    }
    case DomainKind::ThickL: {
      g.origin = Eigen::Vector3d(-1.0, -1.0, 0.0);
      g.step = Eigen::Vector3d::Constant(1.0 / n);
      g.count = Eigen::Vector3i(2 * n, 2 * n, n);
      return structured_mesh(
          g, [](const Eigen::Vector3d& c) { return c.x() > 0 || c.y() > 0; },
          zero);
    }
    case DomainKind::CubeCavity: {
      if (n % 2 != 0)
        throw std::invalid_argument(
            "generate_mesh: cube cavity resolution must be even so the "
            "cavity walls lie on grid planes");
      g.origin = Eigen::Vector3d(-1.0, -1.0, -1.0);
      g.step = Eigen::Vector3d::Constant(1.0 / n);
      g.count = Eigen::Vector3i(2 * n, 2 * n, 2 * n);
      return structured_mesh(
          g,
          [](const Eigen::Vector3d& c) {
            return std::abs(c.x()) > 0.5 || std::abs(c.y()) > 0.5 ||
                   std::abs(c.z()) > 0.5;
          },
          zero);
    }
  }
  throw std::invalid_argument("generate_mesh: unknown domain kind");
}

Mesh refine_uniform(const Mesh& mesh) {
  require_packable(mesh.vertex_count() * 8);
  const int dim = mesh.dim;
  // Tagged tetrahedral meshes refine by three uniform bisection rounds,
  // which splits every cell into 8 nested children and, on the reflected
  // structured meshes, reproduces the twice-as-fine generated mesh exactly,
  // keeping one self-similar family across all levels.
  if (dim == 3 && has_tags(mesh))
    return bisect_refine(mesh, [](Index) { return 3; });
  std::vector<Eigen::Vector3d> verts(size_t(mesh.vertex_count()),
                                     Eigen::Vector3d::Zero());
  for (Index v = 0; v < mesh.vertex_count(); ++v)
    verts[size_t(v)].head(dim) = mesh.vertices.row(v).transpose();
  std::unordered_map<Key64, int> mid;
  mid.reserve(size_t(mesh.cell_count()) * 4);

  const Index n_child = dim == 2 ? 4 : 8;
  Eigen::MatrixXi cells(mesh.cell_count() * n_child, dim + 1);
  Eigen::VectorXi region(cells.rows()), parent(cells.rows());
  Index out = 0;
  auto push = [&](std::initializer_list<int> vs, Index p) {
    int a = 0;
    for (int v : vs) cells(out, a++) = v;
    region(out) = mesh.region_id(p);
    parent(out) = int(p);
    ++out;
  };

  for (Index c = 0; c < mesh.cell_count(); ++c) {
    if (dim == 2) {
      const int a = mesh.cells(c, 0), b = mesh.cells(c, 1),
                d = mesh.cells(c, 2);
      const int mab = midpoint_vertex(mid, verts, a, b);
      const int mad = midpoint_vertex(mid, verts, a, d);
      const int mbd = midpoint_vertex(mid, verts, b, d);
      push({a, mab, mad}, c);
      push({mab, b, mbd}, c);
      push({mad, mbd, d}, c);
      push({mab, mbd, mad}, c);
    } else {
      const int v0 = mesh.cells(c, 0), v1 = mesh.cells(c, 1),
                v2 = mesh.cells(c, 2), v3 = mesh.cells(c, 3);
      const int m01 = midpoint_vertex(mid, verts, v0, v1);
      const int m02 = midpoint_vertex(mid, verts, v0, v2);
      const int m03 = midpoint_vertex(mid, verts, v0, v3);
      const int m12 = midpoint_vertex(mid, verts, v1, v2);
      const int m13 = midpoint_vertex(mid, verts, v1, v3);
      const int m23 = midpoint_vertex(mid, verts, v2, v3);
      push({v0, m01, m02, m03}, c);
      push({v1, m01, m12, m13}, c);
      push({v2, m02, m12, m23}, c);
      push({v3, m03, m13, m23}, c);
      // The interior octahedron is cut along its shortest diagonal.
      const std::array<std::pair<int, int>, 3> diag{
          std::pair{m01, m23}, {m02, m13}, {m03, m12}};
      int best = 0;
      double best_len = (verts[size_t(m01)] - verts[size_t(m23)]).norm();
      for (int d = 1; d < 3; ++d) {
        const double len =
            (verts[size_t(diag[size_t(d)].first)] -
             verts[size_t(diag[size_t(d)].second)]).norm();
        if (len < best_len * (1.0 - 1e-12)) {
          best = d;
          best_len = len;
        }
      }
      const auto [da, db] = diag[size_t(best)];
      const auto [c1, c2] = diag[size_t((best + 1) % 3)];
      const auto [d1, d2] = diag[size_t((best + 2) % 3)];
      push({da, db, c1, d1}, c);
      push({da, db, d1, c2}, c);
      push({da, db, c2, d2}, c);
      push({da, db, d2, c1}, c);
    }
  }

  Mesh fine;
  fine.dim = dim;
  fine.vertices.resize(Index(verts.size()), dim);
  for (Index v = 0; v < fine.vertices.rows(); ++v)
    fine.vertices.row(v) = verts[size_t(v)].head(dim).transpose();
  fine.cells = std::move(cells);
  fine.region_id = std::move(region);
  fine.cell_tag = Eigen::VectorXi::Constant(fine.cells.rows(), -1);
  fine.parent = std::make_shared<Mesh>(mesh);
  fine.parent_cell = std::move(parent);
  fine.boundary_faces =
      derive_boundary_faces(fine.cells, dim, fine.vertices.rows());
  return fine;
}

namespace {

struct TaggedCell {
  std::array<int, 4> v;
  int type;    // bisection generation class, cycles mod 3
  int region;
  int root;    // cell index in the input mesh
  int pending; // bisections still owed to halve the diameter
};

// Bisection of a tagged tetrahedron at its refinement edge (v0, v3).
std::pair<TaggedCell, TaggedCell> bisect(const TaggedCell& t, int m) {
  TaggedCell a = t, b = t;
  const int nt = (t.type + 1) % 3;
  a.v = {t.v[0], m, t.v[1], t.v[2]};
  a.type = nt;
  if (t.type == 0)
    b.v = {t.v[3], m, t.v[2], t.v[1]};
  else
    b.v = {t.v[3], m, t.v[1], t.v[2]};
  b.type = nt;
  if (t.pending > 0) {
    a.pending = t.pending - 1;
    b.pending = t.pending - 1;
  }
  return {a, b};
}

bool has_tags(const Mesh& mesh) {
  return mesh.cell_tag.size() == mesh.cell_count() &&
         !(mesh.cell_tag.array() < 0).any();
}

// Worklist bisection: every cell owing bisections is split at its tagged
// refinement edge; cells that pick up a hanging midpoint on any edge are
// split as well until the mesh is conforming again.
Mesh bisect_refine(const Mesh& mesh,
                   const std::function<int(Index)>& owed_bisections) {
  require_packable(mesh.vertex_count() * 16);
  std::vector<Eigen::Vector3d> verts(size_t(mesh.vertex_count()));
  for (Index v = 0; v < mesh.vertex_count(); ++v)
    verts[size_t(v)] = mesh.vertices.row(v).transpose();

  std::vector<TaggedCell> cells;
  cells.reserve(size_t(mesh.cell_count()) * 4);
  for (Index c = 0; c < mesh.cell_count(); ++c) {
    TaggedCell t;
    for (int a = 0; a < 4; ++a) t.v[size_t(a)] = mesh.cells(c, a);
    t.type = mesh.cell_tag(c);
    t.region = mesh.region_id(c);
    t.root = int(c);
    t.pending = owed_bisections(c);
    cells.push_back(t);
  }

  std::unordered_map<Key64, int> split;
  auto has_split_edge = [&](const TaggedCell& t) {
    for (const auto& [a, b] : local_edges(3))
      if (split.count(edge_key(t.v[size_t(a)], t.v[size_t(b)]))) return true;
    return false;
  };

  const int max_rounds = 200;
  int round = 0;
  for (; round < max_rounds; ++round) {
    bool any = false;
    std::vector<TaggedCell> next;
    next.reserve(cells.size() + cells.size() / 4);
    for (const auto& t : cells) {
      if (t.pending == 0 && !has_split_edge(t)) {
        next.push_back(t);
        continue;
      }
      const int m = midpoint_vertex(split, verts, t.v[0], t.v[3]);
      auto [a, b] = bisect(t, m);
      next.push_back(a);
      next.push_back(b);
      any = true;
    }
    cells.swap(next);
    if (!any) break;
  }
  if (round == max_rounds)
    throw std::runtime_error(
        "bisection refinement: conforming closure failed to terminate");

  Mesh fine;
  fine.dim = 3;
  fine.vertices.resize(Index(verts.size()), 3);
  for (Index v = 0; v < fine.vertices.rows(); ++v)
    fine.vertices.row(v) = verts[size_t(v)].transpose();
  fine.cells.resize(Index(cells.size()), 4);
  fine.region_id.resize(fine.cells.rows());
  fine.cell_tag.resize(fine.cells.rows());
  fine.parent_cell.resize(fine.cells.rows());
  for (Index c = 0; c < fine.cells.rows(); ++c) {
    const auto& t = cells[size_t(c)];
    for (int a = 0; a < 4; ++a) fine.cells(c, a) = t.v[size_t(a)];
    fine.region_id(c) = t.region;
    fine.cell_tag(c) = t.type;
    fine.parent_cell(c) = t.root;
  }
  fine.parent = std::make_shared<Mesh>(mesh);
  fine.boundary_faces =
      derive_boundary_faces(fine.cells, 3, fine.vertices.rows());
  return fine;
}

} // namespace

Mesh refine_toward_edge(const Mesh& mesh, const LineSegment& axis_line,
                        double ratio) {
  if (mesh.dim != 3)
    throw std::invalid_argument("refine_toward_edge: 3D meshes only");
  if (!(ratio > 0.0 && ratio < 1.0))
    throw std::invalid_argument("refine_toward_edge: ratio must be in (0,1)");
  if (!has_tags(mesh))
    throw std::invalid_argument(
        "refine_toward_edge: mesh lacks bisection tags (generate_mesh, "
        "refine_uniform, and refine_toward_edge outputs carry them; meshes "
        "read from files do not)");
  return bisect_refine(mesh, [&](Index c) {
    double dist = std::numeric_limits<double>::max();
    for (int a = 0; a < 4; ++a) {
      Eigen::Vector3d x = mesh.vertices.row(mesh.cells(c, a)).transpose();
      dist = std::min(dist, axis_line.distance(x));
    }
    return dist <= ratio ? 3 : 0; // 3 bisections halve the diameter
  });
}

const std::vector<std::pair<int, int>>& local_edges(int dim) {
  static const std::vector<std::pair<int, int>> tri{{0, 1}, {0, 2}, {1, 2}};
  static const std::vector<std::pair<int, int>> tet{{0, 1}, {0, 2}, {0, 3},
                                                    {1, 2}, {1, 3}, {2, 3}};
  return dim == 2 ? tri : tet;
}

EdgeTopology build_topology(const Mesh& mesh) {
  require_packable(mesh.vertex_count());
  const int dim = mesh.dim;
  const auto& ledges = local_edges(dim);
  const int nle = int(ledges.size());

  std::vector<Key64> keys;
  keys.reserve(size_t(mesh.cell_count()) * size_t(nle));
  for (Index c = 0; c < mesh.cell_count(); ++c)
    for (const auto& [a, b] : ledges)
      keys.push_back(edge_key(mesh.cells(c, a), mesh.cells(c, b)));
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  EdgeTopology topo;
  const Index ne = Index(keys.size());
  topo.edges.resize(ne, 2);
  std::unordered_map<Key64, Index> index;
  index.reserve(keys.size());
  for (Index e = 0; e < ne; ++e) {
    topo.edges(e, 0) = int(keys[size_t(e)] >> 21);
    topo.edges(e, 1) = int(keys[size_t(e)] & (kMaxPackedVertex - 1));
    index.emplace(keys[size_t(e)], e);
  }

  topo.cell_edges.resize(mesh.cell_count(), nle);
  topo.cell_edge_signs.resize(mesh.cell_count(), nle);
  topo.edge_cell = Eigen::VectorXi::Constant(ne, -1);
  for (Index c = 0; c < mesh.cell_count(); ++c)
    for (int le = 0; le < nle; ++le) {
      const int va = mesh.cells(c, ledges[size_t(le)].first);
      const int vb = mesh.cells(c, ledges[size_t(le)].second);
      const Index e = index.at(edge_key(va, vb));
      topo.cell_edges(c, le) = int(e);
      topo.cell_edge_signs(c, le) = va < vb ? 1 : -1;
      if (topo.edge_cell(e) < 0) topo.edge_cell(e) = int(c);
    }

  topo.boundary_edge.assign(size_t(ne), false);
  topo.boundary_vertex.assign(size_t(mesh.vertex_count()), false);
  for (Index f = 0; f < mesh.boundary_face_count(); ++f) {
    for (int a = 0; a < dim; ++a)
      topo.boundary_vertex[size_t(mesh.boundary_faces(f, a))] = true;
    if (dim == 2) {
      topo.boundary_edge[size_t(index.at(
          edge_key(mesh.boundary_faces(f, 0), mesh.boundary_faces(f, 1))))] =
          true;
    } else {
      for (int a = 0; a < 3; ++a)
        for (int b = a + 1; b < 3; ++b)
          topo.boundary_edge[size_t(index.at(edge_key(
              mesh.boundary_faces(f, a), mesh.boundary_faces(f, b))))] = true;
    }
  }

  topo.edge_free_index = Eigen::VectorXi::Constant(ne, -1);
  topo.vertex_free_index =
      Eigen::VectorXi::Constant(mesh.vertex_count(), -1);
  std::vector<int> fe, fv;
  for (Index e = 0; e < ne; ++e)
    if (!topo.boundary_edge[size_t(e)]) {
      topo.edge_free_index(e) = int(fe.size());
      fe.push_back(int(e));
    }
  for (Index v = 0; v < mesh.vertex_count(); ++v)
    if (!topo.boundary_vertex[size_t(v)]) {
      topo.vertex_free_index(v) = int(fv.size());
      fv.push_back(int(v));
    }
  topo.free_edges = Eigen::Map<Eigen::VectorXi>(fe.data(), Index(fe.size()));
  topo.free_vertices =
      Eigen::Map<Eigen::VectorXi>(fv.data(), Index(fv.size()));
  return topo;
}

void write_mesh(const Mesh& mesh, std::ostream& out) {
  char buf[64];
  out << mesh.dim << ' ' << mesh.vertex_count() << ' ' << mesh.cell_count()
      << ' ' << mesh.boundary_face_count() << '\n';
  for (Index v = 0; v < mesh.vertex_count(); ++v) {
    for (int a = 0; a < mesh.dim; ++a) {
      std::snprintf(buf, sizeof buf, "%.17g", mesh.vertices(v, a));
      out << (a ? " " : "") << buf;
    }
    out << '\n';
  }
  for (Index c = 0; c < mesh.cell_count(); ++c) {
    for (int a = 0; a < mesh.dim + 1; ++a) out << mesh.cells(c, a) << ' ';
    out << mesh.region_id(c) << '\n';
  }
  for (Index f = 0; f < mesh.boundary_face_count(); ++f) {
    for (int a = 0; a < mesh.dim; ++a)
      out << (a ? " " : "") << mesh.boundary_faces(f, a);
    out << '\n';
  }
}

void write_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_mesh(mesh, out);
}

namespace {
[[noreturn]] void parse_fail(Index line, const std::string& what) {
  throw std::runtime_error("mesh parse error at line " +
                           std::to_string(line) + ": " + what);
}
} // namespace

Mesh read_mesh(std::istream& in) {
  Index line = 1;
  std::string row;
  if (!std::getline(in, row)) parse_fail(line, "missing header");
  std::istringstream hdr(row);
  Index nv = 0, nc = 0, nbf = 0;
  int dim = 0;
  if (!(hdr >> dim >> nv >> nc >> nbf))
    parse_fail(line, "header must read: dim nv nc nbf");
  if (dim != 2 && dim != 3) parse_fail(line, "dimension must be 2 or 3");

  Mesh mesh;
  mesh.dim = dim;
  mesh.vertices.resize(nv, dim);
  for (Index v = 0; v < nv; ++v) {
    ++line;
    if (!std::getline(in, row)) parse_fail(line, "missing vertex section");
    std::istringstream ls(row);
    for (int a = 0; a < dim; ++a)
      if (!(ls >> mesh.vertices(v, a))) parse_fail(line, "bad vertex line");
  }
  mesh.cells.resize(nc, dim + 1);
  mesh.region_id.resize(nc);
  for (Index c = 0; c < nc; ++c) {
    ++line;
    if (!std::getline(in, row)) parse_fail(line, "missing cell section");
    std::istringstream ls(row);
    for (int a = 0; a < dim + 1; ++a)
      if (!(ls >> mesh.cells(c, a))) parse_fail(line, "bad cell line");
    if (!(ls >> mesh.region_id(c))) parse_fail(line, "cell line lacks region");
    for (int a = 0; a < dim + 1; ++a)
      if (mesh.cells(c, a) < 0 || mesh.cells(c, a) >= nv)
        parse_fail(line, "cell vertex index out of range");
  }
  mesh.boundary_faces.resize(nbf, dim);
  for (Index f = 0; f < nbf; ++f) {
    ++line;
    if (!std::getline(in, row))
      parse_fail(line, "missing boundary face section");
    std::istringstream ls(row);
    for (int a = 0; a < dim; ++a)
      if (!(ls >> mesh.boundary_faces(f, a)))
        parse_fail(line, "bad boundary face line");
  }
  mesh.cell_tag = Eigen::VectorXi::Constant(nc, -1);
  return mesh;
}

Mesh read_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mesh file: " + path);
  return read_mesh(in);
}

ConformityReport check_conformity(const Mesh& mesh) {
  ConformityReport rep;
  auto fail = [&](const std::string& s) {
    rep.conforming = false;
    if (rep.detail.empty()) rep.detail = s;
  };

  for (Index c = 0; c < mesh.cell_count(); ++c) {
    const double vol = mesh.cell_volume(c);
    const double d = mesh.cell_diameter(c);
    if (!(vol > 1e-14 * std::pow(d, mesh.dim))) {
      fail("degenerate cell " + std::to_string(c));
      return rep;
    }
  }

  // Interior faces must be shared by exactly two cells.
  const auto faces = local_faces(mesh.dim);
  std::unordered_map<Key64, int> count;
  for (Index c = 0; c < mesh.cell_count(); ++c)
    for (const auto& f : faces) {
      Key64 k = mesh.dim == 2
                    ? edge_key(mesh.cells(c, f[0]), mesh.cells(c, f[1]))
                    : face_key(mesh.cells(c, f[0]), mesh.cells(c, f[1]),
                               mesh.cells(c, f[2]));
      ++count[k];
    }
  Index n_bnd = 0;
  for (auto [k, n] : count) {
    if (n > 2) fail("face shared by more than two cells");
    if (n == 1) ++n_bnd;
  }
  if (n_bnd != mesh.boundary_face_count())
    fail("stored boundary faces disagree with once-counted faces");

  // Hanging vertex scan: no vertex may sit at the midpoint of a cell edge.
  std::unordered_map<Key64, char> occupied;
  occupied.reserve(size_t(mesh.vertex_count()) * 2);
  const double scale = std::pow(2.0, 40);
  auto coord_key = [&](const Eigen::Vector3d& x) {
    Key64 h = 1469598103934665603ull;
    for (int a = 0; a < 3; ++a) {
      const auto q = std::int64_t(std::llround(x[a] * scale));
      h = (h ^ Key64(q)) * 1099511628211ull;
    }
    return h;
  };
  for (Index v = 0; v < mesh.vertex_count(); ++v) {
    Eigen::Vector3d x = Eigen::Vector3d::Zero();
    x.head(mesh.dim) = mesh.vertices.row(v).transpose();
    occupied[coord_key(x)] = 1;
  }
  for (Index c = 0; c < mesh.cell_count(); ++c)
    for (const auto& [a, b] : local_edges(mesh.dim)) {
      Eigen::Vector3d xa = Eigen::Vector3d::Zero(),
                      xb = Eigen::Vector3d::Zero();
      xa.head(mesh.dim) = mesh.vertices.row(mesh.cells(c, a)).transpose();
      xb.head(mesh.dim) = mesh.vertices.row(mesh.cells(c, b)).transpose();
      if (occupied.count(coord_key(0.5 * (xa + xb)))) {
        fail("hanging vertex at midpoint of an edge of cell " +
             std::to_string(c));
        return rep;
      }
    }

  // Boundary must be a closed surface: every boundary (dim-2)-entity shared
  // by exactly two boundary faces.
  std::unordered_map<Key64, int> sub;
  for (Index f = 0; f < mesh.boundary_face_count(); ++f) {
    if (mesh.dim == 2) {
      ++sub[Key64(mesh.boundary_faces(f, 0))];
      ++sub[Key64(mesh.boundary_faces(f, 1))];
    } else {
      for (int a = 0; a < 3; ++a)
        for (int b = a + 1; b < 3; ++b)
          ++sub[edge_key(mesh.boundary_faces(f, a),
                         mesh.boundary_faces(f, b))];
    }
  }
  for (auto [k, n] : sub)
    if (n != 2) {
      fail("boundary surface not closed");
      break;
    }
  return rep;
}

int boundary_component_count(const Mesh& mesh) {
  const Index nbf = mesh.boundary_face_count();
  std::vector<Index> uf(static_cast<size_t>(nbf));
  std::iota(uf.begin(), uf.end(), Index(0));
  std::function<Index(Index)> find = [&](Index a) {
    while (uf[size_t(a)] != a) a = uf[size_t(a)] = uf[size_t(uf[size_t(a)])];
    return a;
  };
  std::unordered_map<Key64, Index> first_face;
  for (Index f = 0; f < nbf; ++f) {
    auto link = [&](Key64 k) {
      auto [it, fresh] = first_face.emplace(k, f);
      if (!fresh) uf[size_t(find(f))] = find(it->second);
    };
    if (mesh.dim == 2) {
      link(Key64(mesh.boundary_faces(f, 0)));
      link(Key64(mesh.boundary_faces(f, 1)));
    } else {
      for (int a = 0; a < 3; ++a)
        for (int b = a + 1; b < 3; ++b)
          link(edge_key(mesh.boundary_faces(f, a), mesh.boundary_faces(f, b)));
    }
  }
  std::vector<Index> roots;
  for (Index f = 0; f < nbf; ++f) {
    const Index r = find(f);
    if (std::find(roots.begin(), roots.end(), r) == roots.end())
      roots.push_back(r);
  }
  return int(roots.size());
}

} // namespace maxcav
