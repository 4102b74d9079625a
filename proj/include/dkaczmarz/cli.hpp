#pragma once

// Command-line front end: solve, analyze, sweep, reproduce, config-dump.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "dkaczmarz/closedform.hpp"
#include "dkaczmarz/config.hpp"
#include "dkaczmarz/experiments.hpp"
#include "dkaczmarz/format.hpp"
#include "dkaczmarz/solver.hpp"
#include "dkaczmarz/topology.hpp"

namespace dkaczmarz {

enum ExitCode : int { kExitOk = 0, kExitError = 1, kExitMaxIterations = 2, kExitDiverged = 3 };

namespace cli {

using nlohmann::json;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string grid;
  std::string format;
  std::string experiment;
};

struct Terminal {
  std::ostream& out;
  std::ostream& err;
  bool color = false;

  std::string paint(const std::string& s, const char* code) const {
    return color ? std::string("\x1b[") + code + "m" + s + "\x1b[0m" : s;
  }
  std::string good(const std::string& s) const { return paint(s, "32"); }
  std::string bad(const std::string& s) const { return paint(s, "31"); }
};

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline RunConfig load(const Options& o) {
  if (o.config.empty()) throw ConfigError("", "--config is required");
  RunConfig c = parse_config_text(read_text(o.config));
  if (o.seed && c.system.generator) c.system.generator->seed = *o.seed;
  if (!o.out.empty()) c.output_dir = o.out;
  if (!o.format.empty()) c.output_format = o.format;
  return c;
}

inline json estimates_json(const std::vector<Vector>& xs) {
  json out = json::array();
  for (const auto& x : xs) out.push_back(detail::vector_json(x));
  return out;
}

inline json complex_list(const std::vector<Scalar>& zs) {
  json out = json::array();
  for (const auto& z : zs) out.push_back(json::array({z.real(), z.imag()}));
  return out;
}

inline std::string trace_csv(const SolveReport& r) {
  std::string s = "iteration,step_norm,residual_norm\n";
  for (std::size_t i = 0; i < r.step_norms.size(); ++i)
    s += std::to_string(i + 1) + "," + format_double(r.step_norms[i]) + "," + format_double(r.residual_norms[i]) + "\n";
  return s;
}

inline SubnetworkPartition partition_of(const RunConfig& c, const TreeNetwork& net) {
  try {
    return SubnetworkPartition::build(net, c.subnetworks);
  } catch (const ValidationError& e) {
    throw ConfigError("/subnetworks", e.what());
  }
}

// ---------------------------------------------------------------------------

inline int cmd_solve(const Options& o, const Terminal& t) {
  const RunConfig c = load(o);
  const LinearSystem sys = build_system(c);
  const auto dir = std::filesystem::path(c.output_dir);
  json rep = {{"config", dump_config(c)}};
  int code = kExitOk;
  std::string line;
  try {
    const SolveReport r = c.network.kind == NetworkKind::Tree
                              ? solve(sys, build_tree(c), c.relaxation(), c.solver())
                              : solve(sys, build_dag(c), c.relaxation(), c.solver());
    const double step = r.step_norms.empty() ? 0.0 : r.step_norms.back();
    double residual = 0.0;
    for (const auto& x : r.final_estimates) residual = std::max(residual, sys.residual_norm(x));
    rep["status"] = r.converged ? "converged" : "max_iterations";
    rep["converged"] = r.converged;
    rep["iterations_used"] = r.iterations_used;
    rep["final_estimates"] = estimates_json(r.final_estimates);
    rep["final_step_norm"] = step;
    rep["final_residual_norm"] = residual;
    rep["step_norms"] = r.step_norms;
    rep["residual_norms"] = r.residual_norms;
    if (c.output_format == "csv") write_file_atomic(dir / "solve_trace.csv", trace_csv(r));
    code = r.converged ? kExitOk : kExitMaxIterations;
    line = (r.converged ? t.good("converged") : t.bad("max iterations reached")) +
           ": iterations=" + std::to_string(r.iterations_used) + " step=" + format_double(step) +
           " residual=" + format_double(residual);
  } catch (const DivergenceError& e) {
    rep["status"] = "diverged";
    rep["converged"] = false;
    rep["iterations_used"] = e.iteration();
    rep["final_estimates"] = estimates_json(e.last_finite());
    code = kExitDiverged;
    line = t.bad("diverged") + ": iterations=" + std::to_string(e.iteration()) + " (" + e.what() + ")";
  }
  write_file_atomic(dir / "solve_report.json", rep.dump(2));
  t.out << line << "\n";
  return code;
}

inline json tree_analysis(const RunConfig& c, const LinearSystem& sys, std::vector<std::string>& reasons) {
  const TreeNetwork net = build_tree(c);
  const SubnetworkPartition part = partition_of(c, net);
  const RelaxationAssignment relax = c.relaxation();
  const AdmissibilityReport adm = check_admissibility(sys, net, part, relax);
  json nodes = json::array();
  for (const auto& v : adm.nodes) {
    json n = {{"node", v.node}, {"omega", v.omega}, {"ok", v.ok}};
    if (v.group) n["group"] = *v.group;
    if (!v.ok)
      reasons.push_back("condition 1: node " + std::to_string(v.node) + " outside every subnetwork has omega " +
                        format_double(v.omega) + " not in (0, 2)");
    nodes.push_back(n);
  }
  json groups = json::array();
  for (const auto& g : adm.groups) {
    json gj = {{"group", g.group}, {"nodes", part.groups[g.group]}, {"alpha", g.alpha}, {"ok", g.ok},
               {"leaf_only", g.leaf_only}};
    if (g.formula_alpha) gj["alpha_formula"] = *g.formula_alpha;
    if (g.leaf_only) gj["leaf_bounds"] = g.leaf_bounds;
    if (!g.ok)
      reasons.push_back("condition 2: subnetwork " + std::to_string(g.group) + " has alpha " +
                        format_double(g.alpha) + " >= 1");
    groups.push_back(gj);
  }
  json scaling = json::array();
  for (const auto& s : adm.scaling) scaling.push_back({{"s", s.s}, {"admissible", s.admissible}});

  const AffineIteration it = tree_affine(sys, net, relax);
  const DichotomyReport dich = eigen_dichotomy_check(it, sys);
  return {{"network", "tree"},
          {"admissible", adm.admissible},
          {"condition1", adm.condition1},
          {"condition2", adm.condition2},
          {"nodes", nodes},
          {"groups", groups},
          {"scaling", scaling},
          {"scaling_closed", adm.scaling_closed},
          {"restricted_radius", dich.restricted_radius},
          {"unit_eigenvalues", dich.unit_count},
          {"nullity", dich.nullity},
          {"eigenvalues", complex_list(dich.eigenvalues)}};
}

inline json dag_analysis(const RunConfig& c, const LinearSystem& sys) {
  const DagNetwork net = build_dag(c);
  const BlockStructure bs = dag_block_structure(sys, net, c.relaxation());
  const AffineIteration it = bs.affine();
  const Matrix q = bs.u_basis(sys);
  const double rho = spectral_radius(Matrix(q.adjoint() * it.B * q));
  json weights = json::array();
  for (Index i = 0; i < bs.paths.weights.rows(); ++i) {
    std::vector<double> row(bs.paths.weights.cols());
    for (Index j = 0; j < bs.paths.weights.cols(); ++j) row[static_cast<std::size_t>(j)] = bs.paths.weights(i, j);
    weights.push_back(row);
  }
  json paths = json::array();
  for (const auto& p : bs.paths.paths) paths.push_back(p.nodes);
  json out = {{"network", "dag"},
              {"minimal_nodes", bs.paths.minimal},
              {"dispersion_paths", paths},
              {"pooled_weights", weights},
              {"restricted_radius", rho},
              {"converges", rho < 1.0},
              {"eigenvalues", complex_list(eigenvalues(it.B).eigenvalues)}};
  if (bs.minimal_count() > 1) out["minimal_diameter"] = minimal_distance_diameter(net);
  return out;
}

inline int cmd_analyze(const Options& o, const Terminal& t) {
  const RunConfig c = load(o);
  const LinearSystem sys = build_system(c);
  std::vector<std::string> reasons;
  json rep = c.network.kind == NetworkKind::Tree ? tree_analysis(c, sys, reasons) : dag_analysis(c, sys);
  rep["violations"] = reasons;
  rep["config"] = dump_config(c);
  const auto dir = std::filesystem::path(c.output_dir);
  write_file_atomic(dir / "analysis.json", rep.dump(2));
  if (c.output_format == "csv" && rep.contains("nodes")) {
    std::string csv = "node,omega,group,ok\n";
    for (const auto& n : rep["nodes"])
      csv += std::to_string(n["node"].get<std::size_t>()) + "," + format_double(n["omega"].get<double>()) + "," +
             (n.contains("group") ? std::to_string(n["group"].get<std::size_t>()) : std::string()) + "," +
             (n["ok"].get<bool>() ? "true" : "false") + "\n";
    write_file_atomic(dir / "analysis_nodes.csv", csv);
  }
  const double rho = rep["restricted_radius"].get<double>();
  if (rep.contains("admissible")) {
    const bool ok = rep["admissible"].get<bool>();
    t.out << (ok ? t.good("admissible") : t.bad("not admissible")) << ": rho=" << format_double(rho);
    for (const auto& r : reasons) t.out << "; " << r;
    t.out << "\n";
  } else {
    t.out << (rho < 1.0 ? t.good("contraction") : t.bad("no contraction")) << ": rho=" << format_double(rho)
          << "\n";
  }
  return kExitOk;
}

inline std::vector<GridAxis> parse_grid(const std::string& spec) {
  std::vector<GridAxis> axes;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) axes.push_back(GridAxis::parse(item));
  if (axes.empty()) throw ArgumentError("empty grid");
  return axes;
}

inline int cmd_sweep(const Options& o, const Terminal& t) {
  const RunConfig c = load(o);
  const LinearSystem sys = build_system(c);
  const TreeNetwork net = build_tree(c);

  SweepBinding binding;
  if (c.sweep) binding.base = c.sweep->base;
  if (c.sweep && !c.sweep->parameters.empty()) {
    binding.params = c.sweep->parameters;
  } else if (!c.subnetworks.empty()) {
    binding.params = SweepBinding::per_group(partition_of(c, net), binding.base).params;
  } else {
    std::vector<NodeId> all(net.size());
    std::iota(all.begin(), all.end(), NodeId{0});
    binding.params = {all};
  }

  std::vector<GridAxis> axes;
  if (!o.grid.empty()) {
    axes = parse_grid(o.grid);
  } else if (c.sweep && !c.sweep->grid.empty()) {
    for (const auto& g : c.sweep->grid) axes.push_back(GridAxis::parse(g));
  } else {
    axes = std::vector<GridAxis>(binding.params.size(), GridAxis{});
  }
  if (axes.size() != binding.params.size()) {
    if (axes.size() != 1)
      throw ArgumentError("grid has " + std::to_string(axes.size()) + " axes for " +
                          std::to_string(binding.params.size()) + " swept parameters");
    std::vector<NodeId> all;
    for (const auto& p : binding.params) all.insert(all.end(), p.begin(), p.end());
    std::sort(all.begin(), all.end());
    binding.params = {all};
  }
  if (axes.size() > 2) throw ArgumentError("at most two swept parameters are supported");

  const SweepResult r = omega_sweep(sys, net, binding, grid_points(axes));
  const auto dir = std::filesystem::path(c.output_dir);
  write_file_atomic(dir / "sweep.csv", sweep_csv(r));
  if (c.output_format == "json") {
    json j = {{"grid", r.grid}, {"rho", json::array()}, {"argmin", r.grid[r.argmin]}, {"min_rho", r.min},
              {"baseline_rho", r.baseline}, {"config", dump_config(c)}};
    for (double v : r.rho) j["rho"].push_back(std::isfinite(v) ? json(v) : json(nullptr));
    write_file_atomic(dir / "sweep.json", j.dump(2));
  }
  t.out << "sweep: " << r.grid.size() << " points; argmin omega=(";
  for (std::size_t k = 0; k < r.grid[r.argmin].size(); ++k)
    t.out << (k ? "," : "") << format_double(r.grid[r.argmin][k]);
  t.out << ") rho=" << format_double(r.min) << " baseline rho=" << format_double(r.baseline) << "\n";
  return kExitOk;
}

inline int cmd_reproduce(const Options& o, const Terminal& t) {
  const auto& ids = experiment_ids();
  if (std::find(ids.begin(), ids.end(), o.experiment) == ids.end()) {
    std::string list;
    for (const auto& id : ids) list += (list.empty() ? "" : ", ") + id;
    t.err << "error: unknown experiment '" << o.experiment << "'; valid ids: " << list << "\n";
    return kExitError;
  }
  GridAxis axis;
  if (!o.grid.empty()) {
    const auto axes = parse_grid(o.grid);
    if (axes.size() != 1) throw ArgumentError("reproduce takes a single grid axis");
    axis = axes.front();
  }
  const std::uint64_t seed = o.seed.value_or(1);
  const ReportBundle b = reproduce(o.experiment, seed, axis);
  const std::filesystem::path dir =
      o.out.empty() ? std::filesystem::path(o.experiment + "-seed" + std::to_string(seed)) : std::filesystem::path(o.out);
  for (const auto& [name, contents] : b.files) write_file_atomic(dir / name, contents);
  std::size_t passed = 0;
  for (const auto& a : b.assertions) passed += a.passed ? 1 : 0;
  const std::string tally = std::to_string(passed) + "/" + std::to_string(b.assertions.size()) + " checks passed";
  t.out << o.experiment << " seed " << seed << ": " << (b.all_passed() ? t.good(tally) : t.bad(tally)) << " -> "
        << dir.string() << "\n";
  for (const auto& a : b.assertions)
    if (!a.passed) t.out << "  " << t.bad("failed") << " " << a.name << ": " << a.detail << "\n";
  return kExitOk;
}

inline int cmd_config_dump(const Options& o, const Terminal& t) {
  const RunConfig c = load(o);
  const std::string text = dump_config(c).dump(2);
  if (o.out.empty()) {
    t.out << text << "\n";
  } else {
    write_file_atomic(std::filesystem::path(o.out) / "config.json", text);
  }
  return kExitOk;
}

}  // namespace cli

/// Entry point shared by the executable and the tests. Never throws.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
                   std::optional<bool> color = std::nullopt) {
  cli::Options o;
  CLI::App app{"Distributed Kaczmarz solver and analysis tools", "dkaczmarz"};
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* cfg = sub->add_option("--config", o.config, "JSON run configuration");
    if (needs_config) cfg->required();
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed", o.seed, "Seed for generated systems");
    sub->add_option("--grid", o.grid, "Grid start:stop:step[,start:stop:step]");
    sub->add_option("--format", o.format, "Report format")->check(CLI::IsMember({"json", "csv"}));
  };
  auto* solve_cmd = app.add_subcommand("solve", "Run the iteration to convergence");
  auto* analyze_cmd = app.add_subcommand("analyze", "Admissibility and spectral diagnostics");
  auto* sweep_cmd = app.add_subcommand("sweep", "Spectral radius over a relaxation grid");
  auto* reproduce_cmd = app.add_subcommand("reproduce", "Regenerate an experiment bundle");
  auto* dump_cmd = app.add_subcommand("config-dump", "Print the fully resolved configuration");
  for (auto* s : {solve_cmd, analyze_cmd, sweep_cmd, dump_cmd}) add_common(s, true);
  add_common(reproduce_cmd, false);
  reproduce_cmd->add_option("experiment", o.experiment, "Experiment id")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;
  }

  const char* no_color = std::getenv("NO_COLOR");
  const bool use_color =
      color.value_or(&out == &std::cout && isatty(STDOUT_FILENO) && (no_color == nullptr || *no_color == '\0'));
  const cli::Terminal t{out, err, use_color};
  try {
    if (*solve_cmd) return cli::cmd_solve(o, t);
    if (*analyze_cmd) return cli::cmd_analyze(o, t);
    if (*sweep_cmd) return cli::cmd_sweep(o, t);
    if (*reproduce_cmd) return cli::cmd_reproduce(o, t);
    if (*dump_cmd) return cli::cmd_config_dump(o, t);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return kExitError;
}

}  // namespace dkaczmarz
