// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "maxcav/types.hpp"

namespace maxcav {

/// Benchmark cavity domains. All are meshed with structured simplicial
/// grids (6 tetrahedra per box in 3D, 2 triangles per square in 2D).
enum class DomainKind {
  UnitCube,    // (-1/2,1/2)^3
  ThickL,      // ((-1,1)^2 \ (-1,0]^2) x (0,1)
  Slab,        // (-1/2,1/2) x (0,thickness) x (-1/2,1/2), thickness 0.1
  CubeCavity,  // (-1,1)^3 \ [-1/2,1/2]^3
  UnitSquare2D // (0,1)^2
};

struct DomainSpec {
  DomainKind kind = DomainKind::UnitCube;
  std::map<std::string, double> parameters; // e.g. {"thickness", 0.1}
};

DomainKind domain_kind_from_string(const std::string& name);
std::string to_string(DomainKind kind);

/// Conforming simplicial mesh with region labels and boundary faces.
/// Vertex coordinates are nv x dim, cells are nc x (dim+1) vertex indices.
/// `cell_tag` carries the bisection generation type (0..dim-1) for meshes
/// that support local refinement; -1 means untagged.
///
/// Meshes are immutable after construction and may be shared across threads.
struct Mesh {
  int dim = 3;
  Eigen::MatrixXd vertices;
  Eigen::MatrixXi cells;
  Eigen::VectorXi region_id;
  Eigen::MatrixXi boundary_faces;
  Eigen::VectorXi cell_tag;

  std::shared_ptr<const Mesh> parent; // mesh this one refines, if any
  Eigen::VectorXi parent_cell;        // per-cell index into parent->cells

  Index vertex_count() const { return vertices.rows(); }
  Index cell_count() const { return cells.rows(); }
  Index boundary_face_count() const { return boundary_faces.rows(); }

  /// Unsigned cell measure (area in 2D, volume in 3D).
  double cell_volume(Index c) const;
  /// Longest edge of the cell.
  double cell_diameter(Index c) const;
  double total_volume() const;
};

/// Axis-aligned segment {point + t*direction : t in [t0,t1]} used to drive
/// local refinement toward a reentrant edge.
struct LineSegment {
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  Eigen::Vector3d direction = Eigen::Vector3d::UnitZ();
  double t0 = 0.0;
  double t1 = 1.0;

  double distance(const Eigen::Vector3d& x) const;
  /// The reentrant edge {(0,0)} x (0,1) of the thick-L domain.
  static LineSegment thick_l_reentrant_edge();
};

/// Structured mesh of the requested domain. `resolution` counts cells per
/// unit length; Slab and CubeCavity require it even so material interfaces
/// and cavity walls fall on grid planes.
Mesh generate_mesh(const DomainSpec& spec, int resolution);

/// Red refinement: every simplex split into 2^dim children, nested in the
/// parent, region ids inherited. The interior diagonal of the octahedron is
/// the shortest of the three candidates.
Mesh refine_uniform(const Mesh& mesh);

/// One local pass: tetrahedra within `ratio` of the segment (min vertex
/// distance) have their diameter halved by tagged bisection; conformity is
/// restored by recursive closure bisections. Requires a tagged 3D mesh.
Mesh refine_toward_edge(const Mesh& mesh, const LineSegment& axis_line,
                        double ratio);

/// Oriented edge/vertex degree-of-freedom topology for lowest-order edge
/// elements. Edges are stored once with canonical low->high vertex
/// orientation; boundary entities are excluded from the free DOF maps.
struct EdgeTopology {
  Eigen::MatrixX2i edges;          // ne x 2, first index < second
  Eigen::MatrixXi cell_edges;      // nc x n_local_edges
  Eigen::MatrixXi cell_edge_signs; // +1 iff local direction matches global
  Eigen::VectorXi edge_cell;       // one incident cell per edge

  std::vector<bool> boundary_edge;
  std::vector<bool> boundary_vertex;
  Eigen::VectorXi edge_free_index;   // -1 for boundary edges
  Eigen::VectorXi vertex_free_index; // -1 for boundary vertices
  Eigen::VectorXi free_edges;        // free index -> edge index
  Eigen::VectorXi free_vertices;     // free index -> vertex index

  Index edge_count() const { return edges.rows(); }
  Index free_edge_count() const { return free_edges.size(); }
  Index free_vertex_count() const { return free_vertices.size(); }
};

EdgeTopology build_topology(const Mesh& mesh);

/// Local edge numbering of a simplex: (0,1),(0,2),(1,2) on triangles,
/// (0,1),(0,2),(0,3),(1,2),(1,3),(2,3) on tetrahedra.
const std::vector<std::pair<int, int>>& local_edges(int dim);

// ASCII mesh format, 0-based indices:
//   line 1: dim nv nc nbf
//   nv vertex lines (dim coordinates), nc cell lines (dim+1 indices +
//   region id), nbf boundary face lines (dim indices).
void write_mesh(const Mesh& mesh, std::ostream& out);
void write_mesh(const Mesh& mesh, const std::string& path);
Mesh read_mesh(std::istream& in);
Mesh read_mesh_file(const std::string& path);

struct ConformityReport {
  bool conforming = true;
  std::string detail; // first violation found, empty if conforming
};

/// Checks positive cell volumes, face sharing (every interior face shared by
/// exactly two cells), closed boundary, and hanging vertices on cell edges.
ConformityReport check_conformity(const Mesh& mesh);

/// Number of connected components of the boundary face adjacency graph
/// (faces adjacent when they share a (dim-2)-subsimplex).
int boundary_component_count(const Mesh& mesh);

} // namespace maxcav
