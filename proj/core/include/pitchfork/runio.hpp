#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pitchfork/dynsys.hpp"
#include "pitchfork/flow.hpp"

namespace pitchfork::runio {

/// Parsed problem-definition file (JSON, strict unknown-key rejection).
struct ProblemSpec {
  std::string family;  // canonical | canonical-reversing | flow-model | plugin
  std::string plugin_path;
  int ambient_dim = 2;
  double rotation_angle = 0.5;
  std::vector<double> rotation_axis = {0.0, 0.0, 1.0};
  std::vector<double> mu_values;
  double mu_range_a = 0.04;
  double alpha = 0.2;
  double alpha1 = 0.15;
  bool chi_fixed = false;
  double chi_value = 0.0;
  int mesh_resolution = 256;
  double solver_tol = 1e-12;
  int solver_max_iter = 500;
  bool solver_aitken = true;
  double flow_step = 1e-3;
  double flow_time = 1.0;
  std::vector<double> invariance_times = {0.37, 1.0, 1.5, 2.0};
  std::vector<double> simulate_starts;
  int simulate_iterations = 2000;
  struct GronwallRow {
    double s = 1.0, sigma = 0.0, nu = 0.0;
    std::vector<double> t = {1.0};
  };
  std::vector<GronwallRow> gronwall_rows;
  std::vector<std::string> check_conditions;  // roman labels or names
  int check_radial = 64;
  std::string out_dir = "out";
};

ProblemSpec parse_problem_spec(const std::string& json_text);
ProblemSpec load_problem_spec(const std::string& path);

/// FNV-1a of the raw spec bytes: run provenance key.
std::uint64_t content_hash(const std::string& bytes);

/// Shortest-exact double formatting (%.17g) for deterministic tables.
std::string format_double(double v);

/// Writes content to path via a temp file in the same directory + rename.
void atomic_write_file(const std::string& path, const std::string& content);

/// Deterministic CSV assembly: fixed column order, %.17g numbers.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> columns);
  void add_row(const std::vector<std::string>& cells);
  std::vector<std::string> row_builder() const { return {}; }
  std::string str() const;
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(int v) { return std::to_string(v); }

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

struct RunManifest {
  std::string version;
  std::string subcommand;
  std::uint64_t spec_hash = 0;
  std::string timestamp;  // manifest-only; result files carry no timestamps
  std::vector<std::string> outputs;  // paths relative to the out dir
};

/// Verifies every referenced output exists, then writes
/// <out_dir>/run_manifest.json atomically.
void write_manifest(const std::string& out_dir, RunManifest manifest);

/// Family construction from a spec: canonical, canonical-reversing, or a
/// dlopen plugin.
dynsys::MapFamily build_map_family(const ProblemSpec& spec);
flow::VectorFieldFamily build_flow_family(const ProblemSpec& spec);

/// Loads a plugin shared object (see pitchfork/plugin.hpp).
dynsys::MapFamily load_plugin_family(const std::string& path);

}  // namespace pitchfork::runio
