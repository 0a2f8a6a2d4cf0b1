// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "maxcav/materials.hpp"
#include "maxcav/mesh.hpp"
#include "maxcav/types.hpp"

namespace maxcav {

/// Sesquilinear-form matrices of the lowest-order edge element space over
/// free DOFs, boundary DOFs eliminated:
///   S[i,j] = (mu^-1 curl W_j, curl W_i)   curl-curl stiffness, PSD
///   M[i,j] = (eps W_j, W_i)               mass, PD
///   B[p,i] = (eps W_i, grad phi_p)        gradient coupling
///   G[e,p] = +-1 vertex-to-edge incidence; grad phi_p = sum_e G[e,p] W_e
/// Identities S*G = 0 and B = G^T*M hold to rounding.
struct AssembledOperators {
  SparseMatrixXc S;
  SparseMatrixXc M;
  SparseMatrixXc B;
  SparseMatrixXd G;
  Index n_edge = 0;
  Index n_vertex = 0;
};

/// Barycentric quadrature on the reference simplex; weights sum to the
/// reference volume (1/2 triangle, 1/6 tetrahedron). Exact for polynomials
/// of degree <= `degree` (1 or 2 supported).
struct QuadratureRule {
  Eigen::MatrixXd points; // nq x (dim+1) barycentric coordinates
  Eigen::VectorXd weights;

  static QuadratureRule simplex(int dim, int degree);
};

AssembledOperators assemble_operators(const Mesh& mesh,
                                      const EdgeTopology& topo,
                                      const MaterialMap& materials);

/// Signed incidence matrix over free DOFs: -1 at the tail of an edge, +1 at
/// the head (canonical low->high orientation).
SparseMatrixXd discrete_gradient(const EdgeTopology& topo);

/// Edge-interpolation of a coarse discrete field onto a nested refinement:
/// each fine edge coefficient is the tangential line integral of the coarse
/// field along the fine edge, which embeds the coarse space exactly.
VectorXc interpolate_to_fine(const VectorXc& coarse_coeffs, const Mesh& coarse,
                             const EdgeTopology& coarse_topo, const Mesh& fine,
                             const EdgeTopology& fine_topo);

/// Coordinate-format text dump, one `i j re im` line per entry after a
/// `rows cols nnz` header.
void write_triplets(const SparseMatrixXc& a, std::ostream& out);
SparseMatrixXc read_triplets(std::istream& in);

} // namespace maxcav
