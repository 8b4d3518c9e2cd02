// pitchfork: detects pitchfork bifurcations of codimension-1 invariant
// manifolds and constructs the bifurcated branches by graph-transform
// iteration.  Subcommands: check, solve, simulate, scan, gronwall,
// flow-solve.  All numeric outputs are deterministic for a fixed spec.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pitchfork/flow.hpp"
#include "pitchfork/graph_transform.hpp"
#include "pitchfork/gronwall.hpp"
#include "pitchfork/hypotheses.hpp"
#include "pitchfork/runio.hpp"
#include "pitchfork/version.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using pitchfork::Vec;
using pitchfork::dynsys::MapFamily;
using pitchfork::geometry::build_mesh;
using pitchfork::graphtransform::BifurcationReport;
using pitchfork::graphtransform::FixedPointRun;
using pitchfork::graphtransform::GraphFunction;
using pitchfork::graphtransform::ReportConfig;
using pitchfork::graphtransform::StepKind;
using pitchfork::hypotheses::CheckConfig;
using pitchfork::hypotheses::HypothesisVerdict;
using pitchfork::runio::CsvWriter;
using pitchfork::runio::ProblemSpec;
using pitchfork::runio::RunManifest;

struct GlobalOptions {
  std::string spec_path;
  std::string out_override;
  int threads = 1;
  std::uint64_t seed = 12345;
};

struct LoadedSpec {
  ProblemSpec spec;
  std::uint64_t hash = 0;
  std::string out_dir;
};

LoadedSpec load(const GlobalOptions& g) {
  std::ifstream in(g.spec_path, std::ios::binary);
  if (!in)
    throw pitchfork::SpecError("cannot open spec file " + g.spec_path);
  std::stringstream buf;
  buf << in.rdbuf();
  LoadedSpec loaded;
  loaded.spec = pitchfork::runio::parse_problem_spec(buf.str());
  loaded.hash = pitchfork::runio::content_hash(buf.str());
  loaded.out_dir =
      g.out_override.empty() ? loaded.spec.out_dir : g.out_override;
  return loaded;
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void finish_manifest(const LoadedSpec& loaded, const std::string& subcommand,
                     std::vector<std::string> outputs) {
  RunManifest manifest;
  manifest.version = pitchfork::kVersion;
  manifest.subcommand = subcommand;
  manifest.spec_hash = loaded.hash;
  manifest.timestamp = iso_timestamp();
  manifest.outputs = std::move(outputs);
  pitchfork::runio::write_manifest(loaded.out_dir, std::move(manifest));
}

void write_text(const LoadedSpec& loaded, const std::string& rel,
                const std::string& content) {
  pitchfork::runio::atomic_write_file(
      (fs::path(loaded.out_dir) / rel).string(), content);
}

json verdict_json(const HypothesisVerdict& v) {
  json out;
  out["mu"] = v.mu;
  out["overall"] = v.overall;
  json conds = json::array();
  for (const auto& c : v.conditions) {
    json jc;
    jc["id"] = pitchfork::hypotheses::roman_label(c.condition);
    jc["name"] = pitchfork::hypotheses::condition_name(c.condition);
    jc["holds"] = c.holds;
    jc["margin"] = c.margin;
    jc["witness_r"] = c.witness_r;
    jc["witness_node"] = c.witness_node;
    jc["witness_value"] = c.witness_value;
    jc["detail"] = c.detail;
    conds.push_back(std::move(jc));
  }
  out["conditions"] = std::move(conds);
  if (v.shell_norms) {
    const auto& n = *v.shell_norms;
    json jn;
    jn["drf"] = n.drf;
    jn["dyf"] = n.dyf;
    jn["drg_hat"] = n.drg_hat;
    jn["dyg_hat"] = n.dyg_hat;
    jn["dyg"] = n.dyg;
    jn["drg"] = n.drg;
    jn["c"] = n.c;
    jn["c_star"] = n.c_star;
    jn["sigma"] = n.sigma;
    jn["cor_ix"] = n.cor_ix;
    jn["grid_radial"] = n.grid_radial;
    jn["grid_mesh"] = n.grid_mesh;
    jn["delta_drf"] = n.delta_drf;
    jn["delta_dyf"] = n.delta_dyf;
    jn["delta_drg_hat"] = n.delta_drg_hat;
    jn["delta_dyg_hat"] = n.delta_dyg_hat;
    jn["region_alpha"] = n.region.alpha;
    jn["region_inner_cut"] = n.region.inner_cut;
    out["norms"] = std::move(jn);
  }
  return out;
}

CheckConfig check_config(const LoadedSpec& loaded, const GlobalOptions& g) {
  const auto& spec = loaded.spec;
  CheckConfig cfg;
  cfg.alpha = spec.alpha;
  cfg.alpha1 = spec.alpha1;
  cfg.a = spec.mu_range_a;
  cfg.radial = spec.check_radial;
  cfg.threads = g.threads;
  cfg.seed = g.seed;
  if (spec.chi_fixed) cfg.chi_override = spec.chi_value;
  cfg.side_reversing_expected = spec.family == "canonical-reversing";
  for (const auto& label : spec.check_conditions)
    cfg.requested.push_back(
        *pitchfork::hypotheses::condition_from_label(label));
  return cfg;
}

void reject_noninvariant(const MapFamily& family,
                         const pitchfork::geometry::ManifoldMesh& mesh,
                         const std::vector<double>& mu_values) {
  for (double mu : mu_values) {
    const double defect = pitchfork::dynsys::invariance_defect(family, mesh, mu);
    if (defect > 1e-9)
      throw pitchfork::SpecError(
          "family does not leave the declared manifold invariant (defect " +
          pitchfork::runio::format_double(defect) + " at mu=" +
          pitchfork::runio::format_double(mu) + ")");
  }
}

int run_check(const LoadedSpec& loaded, const GlobalOptions& g) {
  const auto& spec = loaded.spec;
  MapFamily family = pitchfork::runio::build_map_family(spec);
  auto mesh = build_mesh(family.manifold, spec.mesh_resolution);
  reject_noninvariant(family, *mesh, spec.mu_values);

  const CheckConfig cfg = check_config(loaded, g);
  const auto verdicts = pitchfork::hypotheses::check_map_conditions(
      family, spec.mu_values, *mesh, cfg);

  json doc;
  doc["family"] = spec.family;
  doc["mesh_nodes"] = mesh->node_count();
  doc["alpha"] = spec.alpha;
  doc["alpha1"] = spec.alpha1;
  json per_mu = json::array();
  bool all_hold = true;
  for (const auto& v : verdicts) {
    all_hold = all_hold && v.overall;
    per_mu.push_back(verdict_json(v));
    std::cout << "mu=" << v.mu << ": " << (v.overall ? "all hold" : "FAIL");
    for (const auto& c : v.conditions)
      if (!c.holds)
        std::cout << " (" << pitchfork::hypotheses::roman_label(c.condition)
                  << ")";
    std::cout << "\n";
  }
  doc["per_mu"] = std::move(per_mu);
  write_text(loaded, "verdicts.json", doc.dump(2) + "\n");
  finish_manifest(loaded, "check", {"verdicts.json"});
  return all_hold ? 0 : 2;
}

std::string branch_csv(const GraphFunction& graph) {
  const auto& mesh = *graph.mesh();
  const int dim = mesh.manifold->ambient_dim();
  std::vector<std::string> columns;
  for (int d = 0; d < dim; ++d) columns.push_back("y" + std::to_string(d));
  columns.push_back("offset");
  CsvWriter csv(columns);
  for (int i = 0; i < mesh.node_count(); ++i) {
    std::vector<std::string> row;
    for (int d = 0; d < dim; ++d)
      row.push_back(CsvWriter::cell(mesh.nodes[i](d)));
    row.push_back(CsvWriter::cell(graph.values()(i)));
    csv.add_row(row);
  }
  return csv.str();
}

std::string run_csv(const FixedPointRun& run) {
  CsvWriter csv({"iteration", "kind", "sup_change", "ratio"});
  double prev_plain = -1.0;
  bool prev_was_plain = false;
  for (const auto& step : run.history) {
    std::string ratio;
    if (step.kind == StepKind::Apply) {
      if (prev_was_plain && prev_plain > 0.0)
        ratio = CsvWriter::cell(step.sup_change / prev_plain);
      prev_plain = step.sup_change;
      prev_was_plain = true;
    } else {
      prev_was_plain = false;
    }
    csv.add_row({CsvWriter::cell(step.index),
                 step.kind == StepKind::Apply ? "apply" : "extrapolation",
                 CsvWriter::cell(step.sup_change), ratio});
  }
  return csv.str();
}

json run_summary_json(const FixedPointRun& run) {
  json out;
  out["iterates"] = run.iterates;
  out["converged"] = run.converged;
  out["certified"] = run.certified;
  out["c_star_used"] = run.c_star_used;
  out["error_bound"] = run.error_bound;
  out["observed_ratio"] = run.observed_ratio;
  out["last_change"] = run.last_change;
  out["residual"] = run.residual;
  return out;
}

json branch_stats_json(const GraphFunction& graph) {
  const auto& vals = graph.values();
  const double mean = vals.mean();
  json out;
  out["mean_offset"] = mean;
  out["spread"] = (vals.array() - mean).abs().maxCoeff();
  out["lipschitz"] = graph.lipschitz_estimate();
  return out;
}

int write_report_outputs(const LoadedSpec& loaded,
                         const BifurcationReport& report,
                         const std::string& subcommand,
                         std::vector<std::string> extra_outputs,
                         json extra_summary = json::object()) {
  std::vector<std::string> outputs = std::move(extra_outputs);
  json summary;
  summary["mu_star_bracket"] = {report.mu_star.lo, report.mu_star.hi};
  summary["side_reversing"] = report.side_reversing;
  if (report.side_reversing) {
    summary["swap_deviation"] = report.swap_deviation;
    summary["square_invariance"] = report.square_invariance;
  }
  json branches = json::array();
  char name[64];
  for (size_t bi = 0; bi < report.branches.size(); ++bi) {
    const auto& pair = report.branches[bi];
    json jb;
    jb["mu"] = pair.mu;
    std::snprintf(name, sizeof name, "branch_%03zu_plus.csv", bi);
    jb["plus_file"] = name;
    write_text(loaded, name, branch_csv(pair.plus));
    outputs.emplace_back(name);
    std::snprintf(name, sizeof name, "branch_%03zu_minus.csv", bi);
    jb["minus_file"] = name;
    write_text(loaded, name, branch_csv(pair.minus));
    outputs.emplace_back(name);
    std::snprintf(name, sizeof name, "run_%03zu_plus.csv", bi);
    jb["plus_run_file"] = name;
    write_text(loaded, name, run_csv(pair.run_plus));
    outputs.emplace_back(name);
    std::snprintf(name, sizeof name, "run_%03zu_minus.csv", bi);
    jb["minus_run_file"] = name;
    write_text(loaded, name, run_csv(pair.run_minus));
    outputs.emplace_back(name);
    jb["plus"] = branch_stats_json(pair.plus);
    jb["plus"]["run"] = run_summary_json(pair.run_plus);
    jb["minus"] = branch_stats_json(pair.minus);
    jb["minus"]["run"] = run_summary_json(pair.run_minus);
    jb["plus_attracting"] = pair.plus_attracting;
    jb["minus_attracting"] = pair.minus_attracting;
    jb["manifold_repelling"] = pair.manifold_repelling;
    branches.push_back(std::move(jb));

    std::cout << "mu=" << pair.mu << " plus branch: mean offset "
              << pair.plus.values().mean() << ", spread "
              << branch_stats_json(pair.plus)["spread"].get<double>()
              << ", error bound " << pair.run_plus.error_bound << "\n";
    std::cout << "mu=" << pair.mu << " minus branch: mean offset "
              << pair.minus.values().mean() << ", spread "
              << branch_stats_json(pair.minus)["spread"].get<double>()
              << ", error bound " << pair.run_minus.error_bound << "\n";
  }
  summary["branches"] = std::move(branches);
  json skipped = json::array();
  for (const auto& [mu, reason] : report.skipped) {
    json js;
    js["mu"] = mu;
    js["reason"] = reason;
    skipped.push_back(std::move(js));
  }
  summary["skipped"] = std::move(skipped);
  for (auto& [key, value] : extra_summary.items()) summary[key] = value;
  write_text(loaded, "summary.json", summary.dump(2) + "\n");
  outputs.emplace_back("summary.json");
  finish_manifest(loaded, subcommand, std::move(outputs));

  if (report.branches.empty()) {
    std::cerr << "no bifurcation: every requested mu is at or below mu* "
                 "(bracket ["
              << report.mu_star.lo << ", " << report.mu_star.hi << "])\n";
    return 3;
  }
  return 0;
}

ReportConfig report_config(const LoadedSpec& loaded, const GlobalOptions& g) {
  const auto& spec = loaded.spec;
  ReportConfig cfg;
  cfg.alpha = spec.alpha;
  cfg.alpha1 = spec.alpha1;
  cfg.a = spec.mu_range_a;
  cfg.solve.tol = spec.solver_tol;
  cfg.solve.max_iter = spec.solver_max_iter;
  cfg.solve.aitken = spec.solver_aitken;
  cfg.solve.alpha = spec.alpha;
  cfg.side_reversing = spec.family == "canonical-reversing";
  cfg.threads = g.threads;
  return cfg;
}

int run_solve(const LoadedSpec& loaded, const GlobalOptions& g) {
  const auto& spec = loaded.spec;
  MapFamily family = pitchfork::runio::build_map_family(spec);
  auto mesh = build_mesh(family.manifold, spec.mesh_resolution);
  reject_noninvariant(family, *mesh, spec.mu_values);
  const BifurcationReport report =
      pitchfork::graphtransform::assemble_bifurcation_report(
          family, spec.mu_values, mesh, report_config(loaded, g));
  return write_report_outputs(loaded, report, "solve", {});
}

int run_simulate(const LoadedSpec& loaded, const GlobalOptions& g) {
  (void)g;
  const auto& spec = loaded.spec;
  if (spec.simulate_starts.empty())
    throw pitchfork::SpecError("simulate.starts is required");

  const bool is_flow = spec.family == "flow-model";
  MapFamily family =
      is_flow ? pitchfork::flow::time_t_map(
                    pitchfork::runio::build_flow_family(spec), spec.flow_time,
                    {spec.flow_step})
              : pitchfork::runio::build_map_family(spec);
  auto mesh = build_mesh(family.manifold, spec.mesh_resolution);
  const auto& man = *family.manifold;
  const Vec y0 = mesh->nodes[0];

  const int dim = man.ambient_dim();
  const bool has_param = man.curve_period() > 0.0;
  std::vector<std::string> columns = {"start_id", "mu",
                                      is_flow ? "t" : "n"};
  for (int d = 0; d < dim; ++d) columns.push_back("x" + std::to_string(d));
  columns.push_back("r");
  if (has_param) columns.push_back("theta");
  CsvWriter csv(columns);

  for (double mu : spec.mu_values) {
    for (size_t si = 0; si < spec.simulate_starts.size(); ++si) {
      const double r0 = spec.simulate_starts[si];
      if (std::abs(r0) > spec.alpha)
        throw pitchfork::SpecError("simulate start outside N(alpha)");
      Vec x = man.embed({r0, y0});
      for (int n = 0; n <= spec.simulate_iterations; ++n) {
        const auto p = man.project(x);
        std::vector<std::string> row = {
            std::to_string(si), CsvWriter::cell(mu),
            CsvWriter::cell(is_flow ? n * spec.flow_time : double(n))};
        for (int d = 0; d < dim; ++d) row.push_back(CsvWriter::cell(x(d)));
        row.push_back(CsvWriter::cell(p.r));
        if (has_param) row.push_back(CsvWriter::cell(*man.curve_parameter(p.y)));
        csv.add_row(row);
        if (n == spec.simulate_iterations) break;
        try {
          x = family.apply(x, mu);
        } catch (const pitchfork::LeftTube& e) {
          std::cerr << "start " << si << " (mu=" << mu
                    << "): " << e.what() << "\n";
          break;
        }
        if (std::abs(man.project(x).r) > spec.alpha + 1e-9) {
          std::cerr << "start " << si << " (mu=" << mu
                    << "): trajectory left N(alpha) at step " << n + 1
                    << "\n";
          break;
        }
      }
    }
  }
  write_text(loaded, "trajectories.csv", csv.str());
  finish_manifest(loaded, "simulate", {"trajectories.csv"});
  return 0;
}

int run_scan(const LoadedSpec& loaded, const GlobalOptions& g) {
  const auto& spec = loaded.spec;
  const bool is_flow = spec.family == "flow-model";
  MapFamily family =
      is_flow ? pitchfork::flow::time_t_map(
                    pitchfork::runio::build_flow_family(spec), spec.flow_time,
                    {spec.flow_step})
              : pitchfork::runio::build_map_family(spec);
  auto mesh = build_mesh(family.manifold, spec.mesh_resolution);
  const BifurcationReport report =
      pitchfork::graphtransform::assemble_bifurcation_report(
          family, spec.mu_values, mesh, report_config(loaded, g));

  CsvWriter csv({"mu", "has_branches", "plus_offset", "minus_offset",
                 "converged", "plus_attracting", "minus_attracting",
                 "manifold_repelling", "mu_star_lo", "mu_star_hi"});
  size_t bi = 0;
  for (double mu : spec.mu_values) {
    const bool solved = bi < report.branches.size() &&
                        report.branches[bi].mu == mu;
    if (solved) {
      const auto& pair = report.branches[bi++];
      csv.add_row({CsvWriter::cell(mu), "1",
                   CsvWriter::cell(pair.plus.values().mean()),
                   CsvWriter::cell(pair.minus.values().mean()),
                   pair.run_plus.converged && pair.run_minus.converged ? "1"
                                                                       : "0",
                   pair.plus_attracting ? "1" : "0",
                   pair.minus_attracting ? "1" : "0",
                   pair.manifold_repelling ? "1" : "0",
                   CsvWriter::cell(report.mu_star.lo),
                   CsvWriter::cell(report.mu_star.hi)});
    } else {
      csv.add_row({CsvWriter::cell(mu), "0", "", "", "", "", "", "",
                   CsvWriter::cell(report.mu_star.lo),
                   CsvWriter::cell(report.mu_star.hi)});
    }
  }
  write_text(loaded, "scan.csv", csv.str());
  finish_manifest(loaded, "scan", {"scan.csv"});
  std::cout << "scan: " << report.branches.size() << "/"
            << spec.mu_values.size() << " mu values past the threshold; "
            << "mu* in [" << report.mu_star.lo << ", " << report.mu_star.hi
            << "]\n";
  return 0;
}

int run_gronwall(const LoadedSpec& loaded, const GlobalOptions&) {
  const auto& spec = loaded.spec;
  if (spec.gronwall_rows.empty())
    throw pitchfork::SpecError("gronwall.rows is required");

  using pitchfork::flow::GronwallBounds;
  using pitchfork::flow::GronwallParams;
  std::vector<std::string> columns = {
      "row",       "s",          "sigma",       "nu",          "t",
      "violation", "lambda_minus", "lambda_plus", "lambda_minus_printed",
      "lambda_plus_printed"};
  for (const char* reading : {"diff", "prod"}) {
    for (const char* kappa : {"kappa1", "kappa2", "kbar1", "kbar2"})
      columns.push_back(std::string(kappa) + "_" + reading);
  }
  for (int i = 0; i < 4; ++i) columns.push_back("E" + std::to_string(i));
  for (int i = 0; i < 4; ++i)
    columns.push_back("E" + std::to_string(i) + "_printed_diff");
  for (int i = 0; i < 4; ++i)
    columns.push_back("E" + std::to_string(i) + "_printed_prod");
  for (int i = 0; i < 4; ++i)
    columns.push_back("disc" + std::to_string(i) + "_diff");
  CsvWriter csv(columns);

  for (size_t ri = 0; ri < spec.gronwall_rows.size(); ++ri) {
    const auto& row = spec.gronwall_rows[ri];
    GronwallParams params{row.s, row.sigma, row.nu,
                          *std::max_element(row.t.begin(), row.t.end())};
    const auto ineq = pitchfork::flow::check_comparison_ineq(params);
    const GronwallBounds bounds =
        pitchfork::flow::gronwall_bounds_unchecked(params);
    for (double t : row.t) {
      std::vector<std::string> cells = {
          std::to_string(ri),
          CsvWriter::cell(row.s),
          CsvWriter::cell(row.sigma),
          CsvWriter::cell(row.nu),
          CsvWriter::cell(t),
          ineq.ok ? "" : ineq.violated,
          CsvWriter::cell(bounds.lambda_minus()),
          CsvWriter::cell(bounds.lambda_plus()),
          CsvWriter::cell(bounds.lambda_minus_printed()),
          CsvWriter::cell(bounds.lambda_plus_printed())};
      for (auto reading : {GronwallBounds::Reading::Difference,
                           GronwallBounds::Reading::Product}) {
        for (double kappa : bounds.kappas(reading))
          cells.push_back(CsvWriter::cell(kappa));
      }
      for (int i = 0; i < 4; ++i) cells.push_back(CsvWriter::cell(bounds.E(i, t)));
      for (auto reading : {GronwallBounds::Reading::Difference,
                           GronwallBounds::Reading::Product}) {
        const auto printed = bounds.printed(t, reading);
        for (int i = 0; i < 4; ++i)
          cells.push_back(CsvWriter::cell(printed[i]));
      }
      const auto disc =
          bounds.discrepancy(t, GronwallBounds::Reading::Difference);
      for (int i = 0; i < 4; ++i) cells.push_back(CsvWriter::cell(disc[i]));
      csv.add_row(cells);
    }
  }
  write_text(loaded, "gronwall.csv", csv.str());
  finish_manifest(loaded, "gronwall", {"gronwall.csv"});
  return 0;
}

int run_flow_solve(const LoadedSpec& loaded, const GlobalOptions& g) {
  const auto& spec = loaded.spec;
  auto field = pitchfork::runio::build_flow_family(spec);
  auto mesh = build_mesh(field.manifold, spec.mesh_resolution);

  pitchfork::flow::FlowCheckConfig fcfg;
  fcfg.alpha = spec.alpha;
  fcfg.alpha1 = spec.alpha1;
  fcfg.step = {spec.flow_step};
  const auto flow_verdicts = pitchfork::flow::check_flow_conditions(
      field, spec.mu_values, *mesh, fcfg);

  json flow_doc;
  bool flow_ok = true;
  {
    json per_mu = json::array();
    for (const auto& v : flow_verdicts) {
      json jm;
      jm["mu"] = v.mu;
      jm["overall"] = v.overall;
      flow_ok = flow_ok && v.overall;
      json conds = json::array();
      for (const auto& c : v.conditions) {
        json jc;
        jc["id"] = pitchfork::flow::flow_condition_label(c.condition);
        jc["holds"] = c.holds;
        jc["margin"] = c.margin;
        jc["detail"] = c.detail;
        conds.push_back(std::move(jc));
      }
      jm["conditions"] = std::move(conds);
      jm["fitted"] = {{"s", v.fitted.s},
                      {"sigma", v.fitted.sigma},
                      {"nu", v.fitted.nu},
                      {"t_star", v.fitted.t_star}};
      per_mu.push_back(std::move(jm));
    }
    flow_doc["per_mu"] = std::move(per_mu);
  }
  write_text(loaded, "flow_verdicts.json", flow_doc.dump(2) + "\n");

  MapFamily time_map =
      pitchfork::flow::time_t_map(field, spec.flow_time, {spec.flow_step});

  CheckConfig mcfg = check_config(loaded, g);
  if (!mcfg.chi_override) mcfg.chi_override = spec.alpha1;
  const auto map_verdicts = pitchfork::hypotheses::check_map_conditions(
      time_map, spec.mu_values, *mesh, mcfg);
  json map_doc;
  bool map_ok = true;
  {
    json per_mu = json::array();
    for (const auto& v : map_verdicts) {
      map_ok = map_ok && v.overall;
      per_mu.push_back(verdict_json(v));
    }
    map_doc["per_mu"] = std::move(per_mu);
    map_doc["time"] = spec.flow_time;
  }
  write_text(loaded, "map_verdicts.json", map_doc.dump(2) + "\n");

  ReportConfig rcfg = report_config(loaded, g);
  const BifurcationReport report =
      pitchfork::graphtransform::assemble_bifurcation_report(
          time_map, spec.mu_values, mesh, rcfg);

  CsvWriter inv_csv({"mu", "deviation"});
  for (const auto& pair : report.branches) {
    const double deviation = pitchfork::flow::verify_invariance_across_t(
        field, pair.mu, {&pair.plus, &pair.minus}, spec.invariance_times,
        {spec.flow_step});
    inv_csv.add_row({CsvWriter::cell(pair.mu), CsvWriter::cell(deviation)});
    std::cout << "mu=" << pair.mu
              << " invariance deviation across t: " << deviation << "\n";
  }
  write_text(loaded, "invariance.csv", inv_csv.str());

  json extra;
  extra["flow_conditions_hold"] = flow_ok;
  extra["map_conditions_hold"] = map_ok;
  const int solve_code = write_report_outputs(
      loaded, report, "flow-solve",
      {"flow_verdicts.json", "map_verdicts.json", "invariance.csv"}, extra);
  if (solve_code != 0) return solve_code;
  return (flow_ok && map_ok) ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pitchfork: pitchfork bifurcations of invariant manifolds"};
  app.set_version_flag("--version", pitchfork::kVersion);
  app.require_subcommand(1);

  GlobalOptions g;
  struct Sub {
    CLI::App* cmd;
    int (*fn)(const LoadedSpec&, const GlobalOptions&);
  };
  std::vector<Sub> subs;
  auto add = [&](const std::string& name, const std::string& help,
                 int (*fn)(const LoadedSpec&, const GlobalOptions&)) {
    CLI::App* cmd = app.add_subcommand(name, help);
    cmd->add_option("--spec", g.spec_path, "problem definition JSON")
        ->required();
    cmd->add_option("--out", g.out_override, "output directory override");
    cmd->add_option("--threads", g.threads, "worker threads");
    cmd->add_option("--seed", g.seed, "seed for sampled starts");
    subs.push_back({cmd, fn});
  };
  add("check", "verify the derivative-norm conditions", run_check);
  add("solve", "construct the bifurcated manifolds", run_solve);
  add("simulate", "iterate start points and dump trajectories", run_simulate);
  add("scan", "bifurcation diagram over a mu range", run_scan);
  add("gronwall", "tabulate comparison-system bounds", run_gronwall);
  add("flow-solve", "continuous-time pipeline via the time-t map",
      run_flow_solve);

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& sub : subs)
      if (sub.cmd->parsed()) return sub.fn(load(g), g);
    return 1;
  } catch (const pitchfork::SpecError& e) {
    std::cerr << "spec error: " << e.what() << "\n";
    return 1;
  } catch (const pitchfork::NotContracting& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 3;
  } catch (const pitchfork::BranchCollapse& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 3;
  } catch (const pitchfork::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
