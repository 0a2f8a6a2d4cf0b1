// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "maxcav/multigrid.hpp"

namespace maxcav {

struct ReferenceSpec {
  int target = 0; // 1-based eigenvalue index
  double value = 0.0;
  double tolerance = 0.0; // relative
  std::string note;
};

/// One experiment: a domain, its materials, a refinement schedule, and the
/// scheme to run. Parsed from a strict JSON document; unknown keys are
/// rejected so typos cannot silently change a run.
struct ExperimentConfig {
  std::string name = "experiment";
  DomainSpec domain;
  int resolution = 2;
  MaterialMap materials;

  int uniform_levels = 0;
  int local_passes = 0;
  double local_ratio = 0.5;

  SchemeKind scheme = SchemeKind::FixedShift;
  int i0 = 0;
  std::vector<int> targets; // 1-based
  int coarse_pairs = 6;
  double coarse_tol = 1e-10;
  double level_tol = 1e-10;
  int max_iterations = 5000;
  double gap_tol = 1e-2;

  std::vector<ReferenceSpec> references;
  std::string csv_path;  // default <name>.csv
  std::string json_path; // default <name>.json
  std::uint64_t seed = 20250801;

  std::optional<ReferenceSpec> reference_for(int target) const;
};

ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);

struct ReportRow {
  int target = 0; // 1-based
  int level = 0;
  Index dof = 0;
  double lambda = 0.0;
  double lambda_direct = std::numeric_limits<double>::quiet_NaN();
  double ref_error = std::numeric_limits<double>::quiet_NaN();
  double rate = std::numeric_limits<double>::quiet_NaN();
};

struct ConvergenceReport {
  std::string name;
  std::vector<ReportRow> rows;
  std::vector<ReferenceSpec> references;
  nlohmann::json metadata; // seeds, tolerances, residuals, timings
  bool failed = false;
  std::string failure;
};

struct RunOptions {
  bool oracle = false; // also run the per-level direct eigensolver columns
  std::string out_dir; // empty: no files written
  bool quiet = true;
  std::optional<std::uint64_t> seed_override;
};

/// Builds the hierarchy, runs the coarse mixed eigensolve and the scheme per
/// target, optionally the per-level reference eigensolves, and writes CSV
/// and JSON artifacts. Errors mark the report failed but still flush partial
/// results.
ConvergenceReport run_experiment(const ExperimentConfig& cfg,
                                 const RunOptions& opts = {});

/// R = log(e_{i-1}/e_i) / log((dof_i/dof_{i-1})^(1/d)); NaN where the error
/// vanishes or inputs are unusable.
std::vector<double> compute_rates(const std::vector<double>& errors,
                                  const std::vector<double>& dofs, int dim);

struct ReferenceCheck {
  struct Entry {
    int target = 0;
    double lambda = 0.0;
    double reference = 0.0;
    double rel_error = 0.0;
    double tolerance = 0.0;
    bool pass = false;
  };
  std::vector<Entry> entries;
  bool pass = true; // vacuous when no references given
};

ReferenceCheck compare_reference(const ConvergenceReport& report,
                                 const std::vector<ReferenceSpec>& references);

std::string report_to_csv(const ConvergenceReport& report);
nlohmann::json report_to_json(const ConvergenceReport& report);
ConvergenceReport report_from_json(const nlohmann::json& doc);

nlohmann::json spectrum_to_json(const SpectrumResult& spectrum);

} // namespace maxcav
