// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "maxcav/mesh.hpp"

using namespace maxcav;

namespace {

const char* kSingleTet =
    "3 4 1 4\n"
    "0 0 0\n"
    "1 0 0\n"
    "0 1 0\n"
    "0 0 1\n"
    "0 1 2 3 0\n"
    "0 1 2\n"
    "0 1 3\n"
    "0 2 3\n"
    "1 2 3\n";

// Independent boundary scan: faces seen exactly once across all cells.
std::set<std::pair<int, int>> boundary_edges_by_face_scan(const Mesh& mesh) {
  std::map<std::vector<int>, int> count;
  const int dim = mesh.dim;
  for (Index c = 0; c < mesh.cell_count(); ++c) {
    std::vector<std::vector<int>> faces;
    if (dim == 2)
      faces = {{mesh.cells(c, 0), mesh.cells(c, 1)},
               {mesh.cells(c, 0), mesh.cells(c, 2)},
               {mesh.cells(c, 1), mesh.cells(c, 2)}};
    else
      faces = {{mesh.cells(c, 0), mesh.cells(c, 1), mesh.cells(c, 2)},
               {mesh.cells(c, 0), mesh.cells(c, 1), mesh.cells(c, 3)},
               {mesh.cells(c, 0), mesh.cells(c, 2), mesh.cells(c, 3)},
               {mesh.cells(c, 1), mesh.cells(c, 2), mesh.cells(c, 3)}};
    for (auto& f : faces) {
      std::sort(f.begin(), f.end());
      ++count[f];
    }
  }
  std::set<std::pair<int, int>> edges;
  for (const auto& [face, n] : count) {
    if (n != 1) continue;
    for (size_t a = 0; a < face.size(); ++a)
      for (size_t b = a + 1; b < face.size(); ++b)
        edges.emplace(face[a], face[b]);
  }
  return edges;
}

// Independent component count: BFS over boundary faces linked by shared
// (dim-2)-entities.
int components_by_bfs(const Mesh& mesh) {
  const Index nbf = mesh.boundary_face_count();
  std::map<std::vector<int>, std::vector<int>> by_sub;
  for (Index f = 0; f < nbf; ++f) {
    std::vector<int> verts(static_cast<size_t>(mesh.dim));
    for (int a = 0; a < mesh.dim; ++a)
      verts[size_t(a)] = mesh.boundary_faces(f, a);
    if (mesh.dim == 2) {
      by_sub[{verts[0]}].push_back(int(f));
      by_sub[{verts[1]}].push_back(int(f));
    } else {
      for (int a = 0; a < 3; ++a)
        for (int b = a + 1; b < 3; ++b) {
          std::vector<int> e{verts[size_t(a)], verts[size_t(b)]};
          std::sort(e.begin(), e.end());
          by_sub[e].push_back(int(f));
        }
    }
  }
  std::vector<std::vector<int>> adj(static_cast<size_t>(nbf));
  for (const auto& [sub, faces] : by_sub)
    for (size_t i = 0; i < faces.size(); ++i)
      for (size_t j = i + 1; j < faces.size(); ++j) {
        adj[size_t(faces[i])].push_back(faces[j]);
        adj[size_t(faces[j])].push_back(faces[i]);
      }
  std::vector<bool> seen(static_cast<size_t>(nbf), false);
  int comps = 0;
  for (Index f = 0; f < nbf; ++f) {
    if (seen[size_t(f)]) continue;
    ++comps;
    std::vector<int> stack{int(f)};
    seen[size_t(f)] = true;
    while (!stack.empty()) {
      const int cur = stack.back();
      stack.pop_back();
      for (int nb : adj[size_t(cur)])
        if (!seen[size_t(nb)]) {
          seen[size_t(nb)] = true;
          stack.push_back(nb);
        }
    }
  }
  return comps;
}

} // namespace

TEST_CASE("structured meshes match the expected counts") {
  const Mesh cube = generate_mesh({DomainKind::UnitCube, {}}, 2);
  CHECK(cube.vertex_count() == 27);
  CHECK(cube.cell_count() == 48);
  CHECK(cube.total_volume() == doctest::Approx(1.0).epsilon(1e-12));

  const Mesh square = generate_mesh({DomainKind::UnitSquare2D, {}}, 2);
  CHECK(square.vertex_count() == 9);
  CHECK(square.cell_count() == 8);
  CHECK(square.total_volume() == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(generate_mesh({DomainKind::UnitCube, {}}, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(generate_mesh({DomainKind::Slab, {}}, 3),
                  std::invalid_argument);
  CHECK_THROWS_AS(generate_mesh({DomainKind::CubeCavity, {}}, 3),
                  std::invalid_argument);
}

TEST_CASE("cavity cells avoid the hole and its boundary has two components") {
  const Mesh cav = generate_mesh({DomainKind::CubeCavity, {}}, 4);
  bool any_inside = false;
  for (Index c = 0; c < cav.cell_count(); ++c) {
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    for (int a = 0; a < 4; ++a)
      center += cav.vertices.row(cav.cells(c, a)).transpose() / 4.0;
    any_inside = any_inside || (std::abs(center.x()) < 0.5 &&
                                std::abs(center.y()) < 0.5 &&
                                std::abs(center.z()) < 0.5);
  }
  CHECK(!any_inside);
  CHECK(cav.total_volume() == doctest::Approx(7.0).epsilon(1e-12));
  CHECK(components_by_bfs(cav) == 2);
  CHECK(boundary_component_count(cav) == 2);
  CHECK(boundary_component_count(generate_mesh({DomainKind::UnitCube, {}},
                                               2)) == 1);
}

TEST_CASE("uniform refinement nests and preserves volume") {
  const Mesh coarse = generate_mesh({DomainKind::UnitCube, {}}, 2);
  const Mesh fine = refine_uniform(coarse);
  CHECK(fine.cell_count() == 8 * coarse.cell_count());
  CHECK(fine.total_volume() ==
        doctest::Approx(coarse.total_volume()).epsilon(1e-12));
  CHECK(check_conformity(fine).conforming);

  // Children of each parent tile it.
  std::vector<double> child_volume(static_cast<size_t>(coarse.cell_count()),
                                   0.0);
  for (Index c = 0; c < fine.cell_count(); ++c)
    child_volume[size_t(fine.parent_cell(c))] += fine.cell_volume(c);
  for (Index p = 0; p < coarse.cell_count(); ++p)
    CHECK(child_volume[size_t(p)] ==
          doctest::Approx(coarse.cell_volume(p)).epsilon(1e-12));

  // Every fine vertex is a parent vertex or a parent edge midpoint.
  std::set<std::array<long long, 3>> allowed;
  auto key = [](const Eigen::Vector3d& x) {
    return std::array<long long, 3>{std::llround(x.x() * (1 << 30)),
                                    std::llround(x.y() * (1 << 30)),
                                    std::llround(x.z() * (1 << 30))};
  };
  for (Index v = 0; v < coarse.vertex_count(); ++v)
    allowed.insert(key(coarse.vertices.row(v).transpose()));
  for (Index c = 0; c < coarse.cell_count(); ++c)
    for (const auto& [a, b] : local_edges(3))
      allowed.insert(key(0.5 * (coarse.vertices.row(coarse.cells(c, a)) +
                                coarse.vertices.row(coarse.cells(c, b)))
                               .transpose()));
  for (Index v = 0; v < fine.vertex_count(); ++v)
    CHECK(allowed.count(key(fine.vertices.row(v).transpose())) == 1);

  const Mesh sq = generate_mesh({DomainKind::UnitSquare2D, {}}, 2);
  const Mesh sq_fine = refine_uniform(sq);
  CHECK(sq_fine.cell_count() == 32);
  CHECK(sq_fine.total_volume() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(check_conformity(sq_fine).conforming);
}

TEST_CASE("local refinement halves diameters near the reentrant edge") {
  const Mesh coarse = generate_mesh({DomainKind::ThickL, {}}, 2);
  const LineSegment edge = LineSegment::thick_l_reentrant_edge();

  double coarse_touching = 0.0;
  for (Index c = 0; c < coarse.cell_count(); ++c) {
    double dist = 1e300;
    for (int a = 0; a < 4; ++a)
      dist = std::min(dist, edge.distance(coarse.vertices
                                              .row(coarse.cells(c, a))
                                              .transpose()));
    if (dist < 1e-12)
      coarse_touching = std::max(coarse_touching, coarse.cell_diameter(c));
  }

  Mesh local = refine_toward_edge(coarse, edge, 0.5);
  CHECK(check_conformity(local).conforming);
  local = refine_toward_edge(local, edge, 0.25);
  CHECK(check_conformity(local).conforming);
  CHECK(local.total_volume() ==
        doctest::Approx(coarse.total_volume()).epsilon(1e-12));

  double local_touching = 0.0;
  for (Index c = 0; c < local.cell_count(); ++c) {
    double dist = 1e300;
    for (int a = 0; a < 4; ++a)
      dist = std::min(dist, edge.distance(local.vertices
                                              .row(local.cells(c, a))
                                              .transpose()));
    if (dist < 1e-12)
      local_touching = std::max(local_touching, local.cell_diameter(c));
  }
  CHECK(local_touching <= coarse_touching / 4.0 + 1e-12);

  // Same near-edge resolution costs fewer DOFs than uniform refinement.
  const Mesh uniform2 = refine_uniform(refine_uniform(coarse));
  const Index n_local = build_topology(local).free_edge_count();
  const Index n_uniform = build_topology(uniform2).free_edge_count();
  CHECK(n_local < n_uniform);

  // Meshes read from files carry no bisection tags.
  std::stringstream io;
  write_mesh(coarse, io);
  const Mesh untagged = read_mesh(io);
  CHECK_THROWS_AS(refine_toward_edge(untagged, edge, 0.5),
                  std::invalid_argument);
}

TEST_CASE("topology: boundary entities and free DOF maps") {
  std::istringstream in(kSingleTet);
  const Mesh tet = read_mesh(in);
  CHECK(tet.cell_volume(0) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  const EdgeTopology topo = build_topology(tet);
  CHECK(topo.edge_count() == 6);
  CHECK(topo.free_edge_count() == 0);
  CHECK(topo.free_vertex_count() == 0);

  const Mesh cube = generate_mesh({DomainKind::UnitCube, {}}, 2);
  const EdgeTopology ct = build_topology(cube);
  const auto scan = boundary_edges_by_face_scan(cube);
  Index boundary_edges = 0;
  for (Index e = 0; e < ct.edge_count(); ++e) {
    const bool expect = scan.count({ct.edges(e, 0), ct.edges(e, 1)}) > 0;
    CHECK(ct.boundary_edge[size_t(e)] == expect);
    if (expect) ++boundary_edges;
  }
  CHECK(ct.free_edge_count() == ct.edge_count() - boundary_edges);

  std::vector<int> touched(static_cast<size_t>(ct.edge_count()), 0);
  for (Index c = 0; c < cube.cell_count(); ++c)
    for (int le = 0; le < 6; ++le) ++touched[size_t(ct.cell_edges(c, le))];
  for (int t : touched) CHECK(t >= 1);
}

TEST_CASE("orientation: swapping two cell vertices flips only that edge") {
  Mesh mesh = generate_mesh({DomainKind::UnitCube, {}}, 1);
  const EdgeTopology before = build_topology(mesh);
  Mesh flipped = mesh;
  std::swap(flipped.cells(0, 0), flipped.cells(0, 1));
  const EdgeTopology after = build_topology(flipped);

  auto sign_map = [](const EdgeTopology& t, Index c) {
    std::map<std::pair<int, int>, int> signs;
    for (int le = 0; le < 6; ++le) {
      const Index e = t.cell_edges(c, le);
      signs[{t.edges(e, 0), t.edges(e, 1)}] = t.cell_edge_signs(c, le);
    }
    return signs;
  };
  const auto a = sign_map(before, 0);
  const auto b = sign_map(after, 0);
  const std::pair<int, int> swapped{
      std::min(mesh.cells(0, 0), mesh.cells(0, 1)),
      std::max(mesh.cells(0, 0), mesh.cells(0, 1))};
  for (const auto& [e, sign] : a) {
    REQUIRE(b.count(e) == 1);
    if (e == swapped)
      CHECK(b.at(e) == -sign);
    else
      CHECK(b.at(e) == sign);
  }
  for (Index c = 1; c < mesh.cell_count(); ++c)
    CHECK(sign_map(before, c) == sign_map(after, c));
}

TEST_CASE("mesh io round-trips bit exactly and reports truncation") {
  const Mesh mesh = generate_mesh({DomainKind::ThickL, {}}, 2);
  std::ostringstream out;
  write_mesh(mesh, out);
  std::istringstream in(out.str());
  const Mesh back = read_mesh(in);
  REQUIRE(back.vertex_count() == mesh.vertex_count());
  REQUIRE(back.cell_count() == mesh.cell_count());
  CHECK((back.vertices.array() == mesh.vertices.array()).all());
  CHECK((back.cells.array() == mesh.cells.array()).all());
  CHECK((back.boundary_faces.array() == mesh.boundary_faces.array()).all());
  std::ostringstream out2;
  write_mesh(back, out2);
  CHECK(out.str() == out2.str());

  std::string text = out.str();
  const std::string cut = text.substr(0, text.find('\n') + 30);
  std::istringstream bad(cut);
  CHECK_THROWS_WITH_AS(read_mesh(bad), doctest::Contains("vertex"),
                       std::runtime_error);
  std::istringstream empty("");
  CHECK_THROWS_WITH_AS(read_mesh(empty), doctest::Contains("header"),
                       std::runtime_error);
}

TEST_CASE("generated meshes satisfy conformity and boundary invariants") {
  for (auto kind : {DomainKind::UnitCube, DomainKind::ThickL,
                    DomainKind::Slab, DomainKind::CubeCavity,
                    DomainKind::UnitSquare2D}) {
    const Mesh mesh = generate_mesh({kind, {}}, 2);
    const ConformityReport rep = check_conformity(mesh);
    INFO(to_string(kind), ": ", rep.detail);
    CHECK(rep.conforming);
    for (Index c = 0; c < mesh.cell_count(); ++c)
      CHECK(mesh.cell_volume(c) > 0.0);
    const int expect = kind == DomainKind::CubeCavity ? 2 : 1;
    CHECK(boundary_component_count(mesh) == expect);
  }
}
