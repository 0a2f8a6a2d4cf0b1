// SPDX-License-Identifier: Apache-2.0
#include "maxcav/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace maxcav {

namespace {

using nlohmann::json;

void require_keys(const json& obj, const std::string& context,
                  std::initializer_list<const char*> allowed) {
  if (!obj.is_object())
    throw std::invalid_argument("config: " + context + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok)
      throw std::invalid_argument("config: unknown key '" + it.key() +
                                  "' in " + context);
  }
}

MatrixXc parse_material_matrix(const json& rows, Index n,
                               const std::string& what) {
  if (!rows.is_array() || Index(rows.size()) != n)
    throw std::invalid_argument("config: " + what + " must have " +
                                std::to_string(n) + " rows");
  MatrixXc m(n, n);
  for (Index i = 0; i < n; ++i) {
    const json& row = rows[size_t(i)];
    if (!row.is_array() || Index(row.size()) != n)
      throw std::invalid_argument("config: " + what + " row " +
                                  std::to_string(i) + " must have " +
                                  std::to_string(n) + " entries");
    for (Index j = 0; j < n; ++j) {
      const json& e = row[size_t(j)];
      if (!e.is_array() || e.size() != 2)
        throw std::invalid_argument("config: " + what +
                                    " entries must be [re, im] pairs");
      m(i, j) = Complex(e[0].get<double>(), e[1].get<double>());
    }
  }
  return m;
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

std::string fmt(double v, const char* spec = "%.12g") {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

json json_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

double double_or_nan(const json& v) {
  return v.is_null() ? nan() : v.get<double>();
}

} // namespace

std::optional<ReferenceSpec> ExperimentConfig::reference_for(
    int target) const {
  for (const auto& r : references)
    if (r.target == target) return r;
  return std::nullopt;
}

ExperimentConfig parse_config(const json& doc) {
  require_keys(doc, "top level",
               {"name", "domain", "materials", "refinement", "scheme",
                "references", "output", "seed"});
  ExperimentConfig cfg;
  cfg.name = doc.value("name", std::string("experiment"));
  if (!doc.contains("domain"))
    throw std::invalid_argument("config: missing 'domain'");

  const json& dom = doc.at("domain");
  require_keys(dom, "domain", {"kind", "resolution", "parameters"});
  cfg.domain.kind = domain_kind_from_string(dom.at("kind").get<std::string>());
  cfg.resolution = dom.at("resolution").get<int>();
  if (dom.contains("parameters"))
    for (auto it = dom.at("parameters").begin();
         it != dom.at("parameters").end(); ++it)
      cfg.domain.parameters[it.key()] = it.value().get<double>();

  const int dim = cfg.domain.kind == DomainKind::UnitSquare2D ? 2 : 3;
  const Index mu_n = dim == 2 ? 1 : 3;
  cfg.materials.dim = dim;
  if (doc.contains("materials")) {
    require_keys(doc.at("materials"), "materials", {"regions"});
    for (const json& r : doc.at("materials").at("regions")) {
      require_keys(r, "materials.regions[]", {"region", "mu", "eps"});
      RegionMaterial mat;
      mat.mu = parse_material_matrix(r.at("mu"), mu_n, "mu");
      mat.eps = parse_material_matrix(r.at("eps"), dim, "eps");
      cfg.materials.regions[r.at("region").get<int>()] = std::move(mat);
    }
  }
  if (cfg.materials.regions.empty()) cfg.materials = MaterialMap::vacuum(dim);

  if (doc.contains("refinement")) {
    const json& ref = doc.at("refinement");
    require_keys(ref, "refinement",
                 {"uniform_levels", "local_passes", "local_ratio"});
    cfg.uniform_levels = ref.value("uniform_levels", 0);
    cfg.local_passes = ref.value("local_passes", 0);
    cfg.local_ratio = ref.value("local_ratio", 0.5);
  }
  if (cfg.uniform_levels < 0 || cfg.local_passes < 0)
    throw std::invalid_argument("config: refinement counts must be >= 0");
  if (!(cfg.local_ratio > 0.0 && cfg.local_ratio < 1.0))
    throw std::invalid_argument("config: local_ratio must be in (0,1)");

  if (doc.contains("scheme")) {
    const json& sch = doc.at("scheme");
    require_keys(sch, "scheme",
                 {"type", "i0", "targets", "coarse_pairs", "coarse_tol",
                  "level_tol", "max_iterations", "gap_tol"});
    const std::string type = sch.value("type", std::string("fixed_shift"));
    if (type == "fixed_shift")
      cfg.scheme = SchemeKind::FixedShift;
    else if (type == "rayleigh_quotient")
      cfg.scheme = SchemeKind::RayleighQuotient;
    else
      throw std::invalid_argument("config: unknown scheme type '" + type +
                                  "'");
    cfg.i0 = sch.value("i0", 0);
    if (sch.contains("targets"))
      cfg.targets = sch.at("targets").get<std::vector<int>>();
    cfg.coarse_pairs = sch.value("coarse_pairs", 6);
    cfg.coarse_tol = sch.value("coarse_tol", 1e-10);
    cfg.level_tol = sch.value("level_tol", 1e-10);
    cfg.max_iterations = sch.value("max_iterations", 5000);
    cfg.gap_tol = sch.value("gap_tol", 1e-2);
  }
  for (int t : cfg.targets)
    if (t < 1 || t > cfg.coarse_pairs)
      throw std::invalid_argument(
          "config: targets are 1-based and must not exceed coarse_pairs");
  if (cfg.i0 < 0) throw std::invalid_argument("config: i0 must be >= 0");

  if (doc.contains("references"))
    for (const json& r : doc.at("references")) {
      require_keys(r, "references[]", {"target", "value", "tolerance", "note"});
      ReferenceSpec ref;
      ref.target = r.at("target").get<int>();
      ref.value = r.at("value").get<double>();
      ref.tolerance = r.at("tolerance").get<double>();
      ref.note = r.value("note", std::string());
      cfg.references.push_back(std::move(ref));
    }

  if (doc.contains("output")) {
    require_keys(doc.at("output"), "output", {"csv", "json"});
    cfg.csv_path = doc.at("output").value("csv", std::string());
    cfg.json_path = doc.at("output").value("json", std::string());
  }
  if (cfg.csv_path.empty()) cfg.csv_path = cfg.name + ".csv";
  if (cfg.json_path.empty()) cfg.json_path = cfg.name + ".json";
  cfg.seed = doc.value("seed", std::uint64_t(20250801));
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config parse error in " + path + ": " +
                                e.what());
  }
  return parse_config(doc);
}

std::vector<double> compute_rates(const std::vector<double>& errors,
                                  const std::vector<double>& dofs, int dim) {
  if (errors.size() != dofs.size() || errors.size() < 2)
    throw std::invalid_argument(
        "compute_rates: need matching sequences of length >= 2");
  std::vector<double> rates(errors.size() - 1, nan());
  for (size_t i = 1; i < errors.size(); ++i) {
    if (!(errors[i - 1] > 0) || !(errors[i] > 0)) continue;
    if (!(dofs[i] > 0) || !(dofs[i - 1] > 0) || dofs[i] == dofs[i - 1])
      continue;
    rates[i - 1] = std::log(errors[i - 1] / errors[i]) /
                   std::log(std::pow(dofs[i] / dofs[i - 1], 1.0 / dim));
  }
  return rates;
}

ReferenceCheck compare_reference(const ConvergenceReport& report,
                                 const std::vector<ReferenceSpec>& references) {
  ReferenceCheck check;
  for (const auto& ref : references) {
    ReferenceCheck::Entry entry;
    entry.target = ref.target;
    entry.reference = ref.value;
    entry.tolerance = ref.tolerance;
    const ReportRow* last = nullptr;
    for (const auto& row : report.rows)
      if (row.target == ref.target && (!last || row.level > last->level))
        last = &row;
    if (!last) {
      entry.pass = false;
      entry.rel_error = nan();
      check.pass = false;
      check.entries.push_back(entry);
      continue;
    }
    entry.lambda = last->lambda;
    entry.rel_error = std::abs(last->lambda - ref.value) /
                      std::max(std::abs(ref.value), 1e-300);
    entry.pass = entry.rel_error <= ref.tolerance;
    check.pass = check.pass && entry.pass;
    check.entries.push_back(entry);
  }
  return check;
}

std::string report_to_csv(const ConvergenceReport& report) {
  std::ostringstream out;
  out << "target,level,dof,lambda,lambda_direct,ref_error,rate\n";
  for (const auto& r : report.rows)
    out << r.target << ',' << r.level << ',' << r.dof << ','
        << fmt(r.lambda) << ',' << fmt(r.lambda_direct) << ','
        << fmt(r.ref_error, "%.6g") << ',' << fmt(r.rate, "%.4g") << '\n';
  if (report.failed) out << "# FAILED: " << report.failure << '\n';
  return out.str();
}

json report_to_json(const ConvergenceReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows)
    rows.push_back({{"target", r.target},
                    {"level", r.level},
                    {"dof", r.dof},
                    {"lambda", r.lambda},
                    {"lambda_direct", json_or_null(r.lambda_direct)},
                    {"ref_error", json_or_null(r.ref_error)},
                    {"rate", json_or_null(r.rate)}});
  json refs = json::array();
  for (const auto& ref : report.references)
    refs.push_back({{"target", ref.target},
                    {"value", ref.value},
                    {"tolerance", ref.tolerance},
                    {"note", ref.note}});
  return json{{"name", report.name},
              {"failed", report.failed},
              {"failure", report.failure},
              {"rows", rows},
              {"references", refs},
              {"metadata", report.metadata}};
}

ConvergenceReport report_from_json(const json& doc) {
  ConvergenceReport report;
  report.name = doc.value("name", std::string());
  report.failed = doc.value("failed", false);
  report.failure = doc.value("failure", std::string());
  for (const json& r : doc.at("rows")) {
    ReportRow row;
    row.target = r.at("target").get<int>();
    row.level = r.at("level").get<int>();
    row.dof = r.at("dof").get<Index>();
    row.lambda = r.at("lambda").get<double>();
    row.lambda_direct = double_or_nan(r.at("lambda_direct"));
    row.ref_error = double_or_nan(r.at("ref_error"));
    row.rate = double_or_nan(r.at("rate"));
    report.rows.push_back(row);
  }
  if (doc.contains("references"))
    for (const json& r : doc.at("references")) {
      ReferenceSpec ref;
      ref.target = r.at("target").get<int>();
      ref.value = r.at("value").get<double>();
      ref.tolerance = r.at("tolerance").get<double>();
      ref.note = r.value("note", std::string());
      report.references.push_back(std::move(ref));
    }
  report.metadata = doc.value("metadata", json::object());
  return report;
}

json spectrum_to_json(const SpectrumResult& spectrum) {
  json pairs = json::array();
  for (size_t j = 0; j < spectrum.pairs.size(); ++j) {
    int cluster = -1;
    for (size_t c = 0; c < spectrum.clusters.size(); ++c)
      if (int(j) >= spectrum.clusters[c].first &&
          int(j) < spectrum.clusters[c].first + spectrum.clusters[c].second)
        cluster = int(c);
    const bool zero =
        std::find(spectrum.zero_modes.begin(), spectrum.zero_modes.end(),
                  int(j)) != spectrum.zero_modes.end();
    pairs.push_back({{"lambda", spectrum.pairs[j].lambda},
                     {"residual", spectrum.pairs[j].residual},
                     {"cluster", cluster},
                     {"zero_mode", zero}});
  }
  return json{{"zero_threshold", spectrum.zero_threshold}, {"pairs", pairs}};
}

namespace {

struct TargetRun {
  int target = 0;
  SchemeResult scheme;
  std::vector<double> lambda_by_level;        // reported member per level
  std::vector<double> direct_by_level;        // NaN when oracle disabled
};

double sorted_member(const std::vector<double>& values, int offset) {
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  return sorted[size_t(offset)];
}

} // namespace

ConvergenceReport run_experiment(const ExperimentConfig& cfg,
                                 const RunOptions& opts) {
  ConvergenceReport report;
  report.name = cfg.name;
  report.references = cfg.references;
  json& meta = report.metadata;
  const auto t_start = std::chrono::steady_clock::now();
  const std::uint64_t seed = opts.seed_override.value_or(cfg.seed);
  std::vector<LevelTrace> all_trace;
  std::vector<int> trace_targets;

  try {
    const MaterialDiagnostics diag = validate_materials(cfg.materials);
    if (!diag.pass)
      throw std::invalid_argument(
          "materials failed validation (Hermitian positive definite "
          "required)");
    const CoercivityConstants cc = coercivity_constants(cfg.materials);
    meta["gamma"] = cc.gamma;
    meta["beta"] = cc.beta;
    meta["a_shift"] = cc.shift;
    meta["seed"] = seed;
    meta["domain"] = to_string(cfg.domain.kind);
    meta["resolution"] = cfg.resolution;
    meta["scheme"] =
        cfg.scheme == SchemeKind::FixedShift ? "fixed_shift"
                                             : "rayleigh_quotient";
    meta["i0"] = cfg.i0;
    meta["coarse_tol"] = cfg.coarse_tol;
    meta["level_tol"] = cfg.level_tol;
    meta["gap_tol"] = cfg.gap_tol;

    Hierarchy hierarchy;
    hierarchy.a_shift = cc.shift;
    {
      Mesh coarse_mesh = generate_mesh(cfg.domain, cfg.resolution);
      auto mesh_ptr = std::make_shared<Mesh>(std::move(coarse_mesh));
      hierarchy.levels.push_back(make_level(mesh_ptr, cfg.materials));
      for (int i = 0; i < cfg.uniform_levels; ++i) {
        auto next =
            std::make_shared<Mesh>(refine_uniform(*hierarchy.levels.back().mesh));
        hierarchy.levels.push_back(make_level(next, cfg.materials));
      }
      double ratio = cfg.local_ratio;
      for (int i = 0; i < cfg.local_passes; ++i) {
        if (cfg.domain.kind != DomainKind::ThickL)
          throw std::invalid_argument(
              "local refinement targets the thick-L reentrant edge only");
        auto next = std::make_shared<Mesh>(refine_toward_edge(
            *hierarchy.levels.back().mesh,
            LineSegment::thick_l_reentrant_edge(), ratio));
        hierarchy.levels.push_back(make_level(next, cfg.materials));
        ratio *= 0.5; // threshold halves each pass
      }
    }

    json level_meta = json::array();
    for (const auto& lvl : hierarchy.levels)
      level_meta.push_back({{"cells", lvl.mesh->cell_count()},
                            {"edge_dofs", lvl.ops.n_edge},
                            {"vertex_dofs", lvl.ops.n_vertex}});
    meta["levels"] = level_meta;

    CoarseSolveOptions copts;
    copts.num_pairs = cfg.coarse_pairs;
    copts.sigma = -cc.shift;
    copts.tol = cfg.coarse_tol;
    copts.gap_tol = cfg.gap_tol;
    copts.seed = seed;
    const auto t_coarse = std::chrono::steady_clock::now();
    const SpectrumResult coarse =
        solve_coarse_eigen(hierarchy.levels[0].ops, copts);
    meta["coarse_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      t_coarse)
            .count();
    meta["coarse_spectrum"] = spectrum_to_json(coarse);
    if (!opts.out_dir.empty()) {
      std::filesystem::create_directories(opts.out_dir);
      std::ofstream spec_out(opts.out_dir + "/" + cfg.name +
                             "_spectrum.json");
      spec_out << spectrum_to_json(coarse).dump(2) << '\n';
    }

    const int l = int(hierarchy.levels.size()) - 1;
    std::vector<TargetRun> runs;
    for (int target : cfg.targets) {
      const int idx = target - 1;
      if (idx >= int(coarse.pairs.size()))
        throw std::invalid_argument("target " + std::to_string(target) +
                                    " exceeds computed coarse pairs");
      TargetRun run;
      run.target = target;

      SchemeConfig scfg;
      scfg.scheme = cfg.scheme;
      scfg.i0 = cfg.i0;
      scfg.target_pair = idx;
      scfg.level_tol = cfg.level_tol;
      scfg.max_iterations = cfg.max_iterations;
      run.scheme = run_scheme(hierarchy, scfg, coarse);
      const int offset = idx - run.scheme.cluster_start;
      const int q = run.scheme.cluster_size;

      std::vector<double> coarse_lams(static_cast<size_t>(q));
      for (int j = 0; j < q; ++j)
        coarse_lams[size_t(j)] =
            coarse.pairs[size_t(run.scheme.cluster_start + j)].lambda;
      run.lambda_by_level.push_back(sorted_member(coarse_lams, offset));
      for (int i = 1; i <= l; ++i) {
        std::vector<double> lams;
        for (const auto& tr : run.scheme.trace)
          if (tr.level == i) lams.push_back(tr.lambda);
        run.lambda_by_level.push_back(sorted_member(lams, offset));
      }

      run.direct_by_level.assign(size_t(l + 1), nan());
      if (opts.oracle) {
        run.direct_by_level[0] = run.lambda_by_level[0];
        for (int i = 1; i <= l; ++i) {
          const LevelEigenResult oracle = inverse_iteration(
              hierarchy.levels[size_t(i)],
              run.scheme.level_vectors[size_t(i)],
              run.lambda_by_level[size_t(i)]);
          if (oracle.max_residual > 1e-9)
            throw std::runtime_error(
                "reference inverse iteration stalled at level " +
                std::to_string(i));
          run.direct_by_level[size_t(i)] = oracle.lambdas(offset);
        }
      }
      for (const auto& tr : run.scheme.trace) {
        all_trace.push_back(tr);
        trace_targets.push_back(target);
      }
      runs.push_back(std::move(run));
    }

    // Assemble rows with per-level errors and rates.
    for (const auto& run : runs) {
      std::vector<double> dofs(static_cast<size_t>(l + 1));
      dofs[0] = double(hierarchy.levels[0].ops.n_edge +
                       hierarchy.levels[0].ops.n_vertex);
      for (int i = 1; i <= l; ++i)
        dofs[size_t(i)] = double(hierarchy.levels[size_t(i)].ops.n_edge);

      double ref_value = nan();
      if (auto ref = cfg.reference_for(run.target)) ref_value = ref->value;
      if (std::isnan(ref_value) && l >= 2) {
        // Richardson extrapolation of the last three levels (approximate).
        const double l0 = run.lambda_by_level[size_t(l - 2)];
        const double l1 = run.lambda_by_level[size_t(l - 1)];
        const double l2 = run.lambda_by_level[size_t(l)];
        const double den = (l2 - l1) - (l1 - l0);
        if (std::abs(den) > 1e-14 * std::abs(l2)) {
          ref_value = l2 - (l2 - l1) * (l2 - l1) / den;
          meta["rate_reference_" + std::to_string(run.target)] =
              "richardson";
        }
      }

      std::vector<double> errors(size_t(l + 1), nan());
      if (!std::isnan(ref_value))
        for (int i = 0; i <= l; ++i)
          errors[size_t(i)] =
              std::abs(run.lambda_by_level[size_t(i)] - ref_value);

      const int dim = hierarchy.levels[0].mesh->dim;
      std::vector<double> rates(size_t(l + 1), nan());
      for (int i = 1; i <= l; ++i) {
        if (std::isnan(errors[size_t(i)])) continue;
        if (!(errors[size_t(i - 1)] > 0) || !(errors[size_t(i)] > 0))
          continue;
        rates[size_t(i)] =
            std::log(errors[size_t(i - 1)] / errors[size_t(i)]) /
            std::log(std::pow(dofs[size_t(i)] / dofs[size_t(i - 1)],
                              1.0 / dim));
      }

      for (int i = 0; i <= l; ++i) {
        ReportRow row;
        row.target = run.target;
        row.level = i;
        row.dof = Index(dofs[size_t(i)]);
        row.lambda = run.lambda_by_level[size_t(i)];
        row.lambda_direct = run.direct_by_level[size_t(i)];
        row.ref_error = errors[size_t(i)];
        row.rate = rates[size_t(i)];
        report.rows.push_back(row);
      }
    }
  } catch (const std::exception& e) {
    report.failed = true;
    report.failure = e.what();
  }

  meta["total_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();

  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir);
    std::ofstream csv(opts.out_dir + "/" + cfg.csv_path);
    csv << report_to_csv(report);
    std::ofstream js(opts.out_dir + "/" + cfg.json_path);
    js << report_to_json(report).dump(2) << '\n';
    std::ofstream trace(opts.out_dir + "/" + cfg.name + "_trace.jsonl");
    for (size_t k = 0; k < all_trace.size(); ++k) {
      const auto& tr = all_trace[k];
      trace << json{{"target", trace_targets[k]},
                    {"member", tr.member},
                    {"level", tr.level},
                    {"dof", tr.dof},
                    {"lambda", tr.lambda},
                    {"shift", tr.shift},
                    {"eig_residual", tr.eig_residual},
                    {"div_residual", tr.div_residual},
                    {"iterations", tr.solve.iterations},
                    {"solve_residual", tr.solve.relative_residual},
                    {"method", tr.solve.method},
                    {"seconds", tr.seconds}}
                   .dump()
            << '\n';
    }
  }
  if (!opts.quiet) {
    std::cout << report_to_csv(report);
    if (report.failed) std::cout << "FAILED: " << report.failure << '\n';
  }
  return report;
}

} // namespace maxcav
