// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <vector>

#include "maxcav/types.hpp"

namespace maxcav {

/// Per-region Hermitian positive definite material tensors. In 3D both mu
/// and eps are 3x3; in 2D the curl is scalar-valued, so mu is a positive
/// scalar (stored 1x1) and eps is 2x2.
struct RegionMaterial {
  MatrixXc mu;
  MatrixXc eps;
};

struct MaterialMap {
  int dim = 3;
  std::map<int, RegionMaterial> regions;

  static MaterialMap vacuum(int dim);
  /// mu = I, eps = eps0 on region 0 and eps1 on region 1.
  static MaterialMap piecewise_eps(int dim, double eps0, double eps1);
};

/// Lower bounds gamma <= xi*.mu^-1.xi / xi*.xi and beta <= xi*.eps.xi / xi*.xi,
/// attained as exact minima over regions; shift = gamma/beta augments the
/// curl-curl form into the coercive norm used throughout.
struct CoercivityConstants {
  double gamma = 1.0;
  double beta = 1.0;
  double shift = 1.0;
};

CoercivityConstants coercivity_constants(const MaterialMap& materials);

struct MaterialDiagnostics {
  struct Row {
    int region = 0;
    double mu_hermitian_defect = 0.0;
    double eps_hermitian_defect = 0.0;
    double mu_eig_min = 0.0, mu_eig_max = 0.0;
    double eps_eig_min = 0.0, eps_eig_max = 0.0;
    bool pass = true;
  };
  bool pass = true;
  std::vector<Row> rows;
};

/// Reports Hermitian defect and eigenvalue range per region; passes iff
/// every tensor is Hermitian to 1e-14 (relative max norm) and positive
/// definite.
MaterialDiagnostics validate_materials(const MaterialMap& materials);

} // namespace maxcav
