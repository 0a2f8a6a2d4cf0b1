// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "maxcav/experiment.hpp"

namespace {

using namespace maxcav;

constexpr int kExitOk = 0;
constexpr int kExitNumerical = 1;
constexpr int kExitUsage = 2;

int cmd_mesh_generate(const std::string& kind, int resolution, int uniform,
                      int local_passes, double local_ratio,
                      const std::string& out) {
  DomainSpec spec;
  spec.kind = domain_kind_from_string(kind);
  Mesh mesh = generate_mesh(spec, resolution);
  for (int i = 0; i < uniform; ++i) mesh = refine_uniform(mesh);
  double ratio = local_ratio;
  for (int i = 0; i < local_passes; ++i) {
    mesh = refine_toward_edge(mesh, LineSegment::thick_l_reentrant_edge(),
                              ratio);
    ratio *= 0.5;
  }
  write_mesh(mesh, out);
  std::cout << "wrote " << out << ": " << mesh.vertex_count() << " vertices, "
            << mesh.cell_count() << " cells, " << mesh.boundary_face_count()
            << " boundary faces\n";
  return kExitOk;
}

int cmd_mesh_refine(const std::string& in, int times, const std::string& out) {
  Mesh mesh = read_mesh_file(in);
  for (int i = 0; i < times; ++i) mesh = refine_uniform(mesh);
  write_mesh(mesh, out);
  std::cout << "wrote " << out << ": " << mesh.cell_count() << " cells\n";
  return kExitOk;
}

int cmd_mesh_inspect(const std::string& in) {
  const Mesh mesh = read_mesh_file(in);
  const ConformityReport conf = check_conformity(mesh);
  std::cout << "dim " << mesh.dim << ", " << mesh.vertex_count()
            << " vertices, " << mesh.cell_count() << " cells, "
            << mesh.boundary_face_count() << " boundary faces\n";
  std::cout << "volume " << mesh.total_volume() << '\n';
  const EdgeTopology topo = build_topology(mesh);
  std::cout << "edges " << topo.edge_count() << " (free "
            << topo.free_edge_count() << "), free vertices "
            << topo.free_vertex_count() << '\n';
  std::cout << "boundary components " << boundary_component_count(mesh)
            << '\n';
  std::cout << "conforming: " << (conf.conforming ? "yes" : "no");
  if (!conf.conforming) std::cout << " (" << conf.detail << ")";
  std::cout << '\n';
  return conf.conforming ? kExitOk : kExitNumerical;
}

int cmd_solve(const std::string& config_path, const std::string& out_dir,
              bool oracle, bool quiet, std::optional<std::uint64_t> seed,
              bool dump_operators) {
  const ExperimentConfig cfg = load_config(config_path);
  RunOptions opts;
  opts.oracle = oracle;
  opts.quiet = quiet;
  opts.out_dir = out_dir.empty() ? std::string(".") : out_dir;
  opts.seed_override = seed;

  if (dump_operators) {
    auto mesh = std::make_shared<Mesh>(generate_mesh(cfg.domain,
                                                     cfg.resolution));
    const LevelContext level = make_level(mesh, cfg.materials);
    std::filesystem::create_directories(opts.out_dir);
    auto dump = [&](const SparseMatrixXc& m, const std::string& tag) {
      std::ofstream out(opts.out_dir + "/" + cfg.name + "_" + tag + ".txt");
      write_triplets(m, out);
    };
    dump(level.ops.S, "S");
    dump(level.ops.M, "M");
    dump(level.ops.B, "B");
    dump(level.ops.G.cast<Complex>(), "G");
    if (!quiet)
      std::cout << "dumped coarse operators to " << opts.out_dir << '\n';
  }

  const ConvergenceReport report = run_experiment(cfg, opts);
  if (report.failed) {
    std::cerr << "experiment failed: " << report.failure << '\n';
    return kExitNumerical;
  }
  const ReferenceCheck check = compare_reference(report, cfg.references);
  if (!quiet) {
    for (const auto& e : check.entries)
      std::cout << "target " << e.target << ": lambda " << e.lambda
                << " vs reference " << e.reference << " (rel err "
                << e.rel_error << ", tol " << e.tolerance << ") "
                << (e.pass ? "pass" : "FAIL") << '\n';
    std::cout << (check.pass ? "all checks passed" : "reference check FAILED")
              << '\n';
  }
  return check.pass ? kExitOk : kExitNumerical;
}

int cmd_rates(const std::string& report_path) {
  std::ifstream in(report_path);
  if (!in) throw std::invalid_argument("cannot open report: " + report_path);
  const ConvergenceReport report =
      report_from_json(nlohmann::json::parse(in));
  if (report.failed) {
    std::cerr << "report is marked failed: " << report.failure << '\n';
    return kExitNumerical;
  }
  std::cout << "target,level,dof,ref_error,rate\n";
  for (const auto& row : report.rows) {
    std::cout << row.target << ',' << row.level << ',' << row.dof << ',';
    if (!std::isnan(row.ref_error)) std::cout << row.ref_error;
    std::cout << ',';
    if (!std::isnan(row.rate)) std::cout << row.rate;
    std::cout << '\n';
  }
  return kExitOk;
}

int cmd_check(const std::string& report_path,
              const std::string& references_path) {
  std::ifstream in(report_path);
  if (!in) throw std::invalid_argument("cannot open report: " + report_path);
  ConvergenceReport report = report_from_json(nlohmann::json::parse(in));
  std::vector<ReferenceSpec> refs = report.references;
  if (!references_path.empty()) {
    std::ifstream rin(references_path);
    if (!rin)
      throw std::invalid_argument("cannot open references: " +
                                  references_path);
    refs.clear();
    for (const auto& r : nlohmann::json::parse(rin)) {
      ReferenceSpec ref;
      ref.target = r.at("target").get<int>();
      ref.value = r.at("value").get<double>();
      ref.tolerance = r.at("tolerance").get<double>();
      ref.note = r.value("note", std::string());
      refs.push_back(std::move(ref));
    }
  }
  if (report.failed) {
    std::cerr << "report is marked failed: " << report.failure << '\n';
    return kExitNumerical;
  }
  const ReferenceCheck check = compare_reference(report, refs);
  for (const auto& e : check.entries)
    std::cout << "target " << e.target << ": " << (e.pass ? "pass" : "FAIL")
              << " (lambda " << e.lambda << ", reference " << e.reference
              << ", rel err " << e.rel_error << ")\n";
  std::cout << (check.pass ? "PASS" : "FAIL") << '\n';
  return check.pass ? kExitOk : kExitNumerical;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maxwell cavity eigenvalues with edge elements and multigrid "
               "shifted-inverse iteration"};
  app.require_subcommand(1);

  auto* mesh_cmd = app.add_subcommand("mesh", "generate, refine, inspect");
  mesh_cmd->require_subcommand(1);

  std::string kind = "unit_cube", mesh_out = "mesh.txt", mesh_in;
  int resolution = 2, uniform = 0, local_passes = 0, times = 1;
  double local_ratio = 0.5;
  auto* gen = mesh_cmd->add_subcommand("generate", "structured domain mesh");
  gen->add_option("--kind", kind,
                  "unit_cube|thick_l|slab|cube_cavity|unit_square_2d");
  gen->add_option("-r,--resolution", resolution, "cells per unit length");
  gen->add_option("--uniform", uniform, "red refinement passes");
  gen->add_option("--local-passes", local_passes,
                  "bisection passes toward the thick-L reentrant edge");
  gen->add_option("--local-ratio", local_ratio, "first local marking radius");
  gen->add_option("-o,--out", mesh_out, "output mesh path");

  auto* refine = mesh_cmd->add_subcommand("refine", "red-refine a mesh file");
  refine->add_option("-i,--in", mesh_in, "input mesh path")->required();
  refine->add_option("--times", times, "number of refinements");
  refine->add_option("-o,--out", mesh_out, "output mesh path");

  auto* inspect = mesh_cmd->add_subcommand("inspect", "counts and checks");
  inspect->add_option("-i,--in", mesh_in, "input mesh path")->required();

  std::string config_path, out_dir, report_path, references_path;
  bool oracle = false, quiet = false, dump_operators = false;
  std::uint64_t seed_value = 0;
  auto* solve = app.add_subcommand("solve", "run an experiment config");
  solve->add_option("--config", config_path, "experiment JSON")->required();
  solve->add_option("--out", out_dir, "output directory (default .)");
  auto* seed_opt = solve->add_option("--seed", seed_value,
                                     "override the config seed");
  solve->add_flag("--oracle", oracle,
                  "also run the per-level direct eigensolver columns");
  solve->add_flag("--quiet", quiet, "suppress console output");
  solve->add_flag("--dump-operators", dump_operators,
                  "write coarse-level matrices in triplet format");

  auto* rates = app.add_subcommand("rates", "print rates from a report");
  rates->add_option("--report", report_path, "report JSON")->required();

  auto* check = app.add_subcommand("check", "verify report against references");
  check->add_option("--report", report_path, "report JSON")->required();
  check->add_option("--references", references_path,
                    "override references (JSON array)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed())
      return cmd_mesh_generate(kind, resolution, uniform, local_passes,
                               local_ratio, mesh_out);
    if (refine->parsed()) return cmd_mesh_refine(mesh_in, times, mesh_out);
    if (inspect->parsed()) return cmd_mesh_inspect(mesh_in);
    if (solve->parsed()) {
      std::optional<std::uint64_t> seed;
      if (seed_opt->count() > 0) seed = seed_value;
      return cmd_solve(config_path, out_dir, oracle, quiet, seed,
                       dump_operators);
    }
    if (rates->parsed()) return cmd_rates(report_path);
    if (check->parsed()) return cmd_check(report_path, references_path);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitUsage;
}
