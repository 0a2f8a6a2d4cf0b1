// SPDX-License-Identifier: Apache-2.0
#include "maxcav/materials.hpp"

#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

namespace maxcav {

namespace {

double hermitian_defect(const MatrixXc& a) {
  const double scale = a.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (a - a.adjoint()).cwiseAbs().maxCoeff() / scale;
}

std::pair<double, double> eig_range(const MatrixXc& a) {
  Eigen::SelfAdjointEigenSolver<MatrixXc> es(a, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

} // namespace

MaterialMap MaterialMap::vacuum(int dim) {
  MaterialMap m;
  m.dim = dim;
  RegionMaterial r;
  r.mu = MatrixXc::Identity(dim == 2 ? 1 : 3, dim == 2 ? 1 : 3);
  r.eps = MatrixXc::Identity(dim, dim);
  m.regions[0] = r;
  return m;
}

MaterialMap MaterialMap::piecewise_eps(int dim, double eps0, double eps1) {
  MaterialMap m = vacuum(dim);
  m.regions[1] = m.regions[0];
  m.regions[0].eps *= eps0;
  m.regions[1].eps *= eps1;
  return m;
}

MaterialDiagnostics validate_materials(const MaterialMap& materials) {
  MaterialDiagnostics diag;
  const int mu_dim = materials.dim == 2 ? 1 : 3;
  for (const auto& [region, mat] : materials.regions) {
    MaterialDiagnostics::Row row;
    row.region = region;
    if (mat.mu.rows() != mu_dim || mat.mu.cols() != mu_dim ||
        mat.eps.rows() != materials.dim || mat.eps.cols() != materials.dim) {
      row.pass = false;
      diag.pass = false;
      diag.rows.push_back(row);
      continue;
    }
    row.mu_hermitian_defect = hermitian_defect(mat.mu);
    row.eps_hermitian_defect = hermitian_defect(mat.eps);
    std::tie(row.mu_eig_min, row.mu_eig_max) = eig_range(mat.mu);
    std::tie(row.eps_eig_min, row.eps_eig_max) = eig_range(mat.eps);
    row.pass = row.mu_hermitian_defect <= 1e-14 &&
               row.eps_hermitian_defect <= 1e-14 && row.mu_eig_min > 0.0 &&
               row.eps_eig_min > 0.0;
    diag.pass = diag.pass && row.pass;
    diag.rows.push_back(row);
  }
  if (materials.regions.empty()) diag.pass = false;
  return diag;
}

CoercivityConstants coercivity_constants(const MaterialMap& materials) {
  const MaterialDiagnostics diag = validate_materials(materials);
  for (const auto& row : diag.rows)
    if (!row.pass)
      throw std::invalid_argument(
          "materials must be Hermitian positive definite; violated in "
          "region " +
          std::to_string(row.region));
  if (!diag.pass) throw std::invalid_argument("empty material map");

  CoercivityConstants cc;
  double gamma = std::numeric_limits<double>::max();
  double beta = std::numeric_limits<double>::max();
  for (const auto& row : diag.rows) {
    gamma = std::min(gamma, 1.0 / row.mu_eig_max); // lambda_min(mu^-1)
    beta = std::min(beta, row.eps_eig_min);
  }
  cc.gamma = gamma;
  cc.beta = beta;
  cc.shift = gamma / beta;
  return cc;
}

} // namespace maxcav
