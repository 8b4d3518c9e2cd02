#include "pitchfork/runio.hpp"

#include <dlfcn.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pitchfork/plugin.hpp"

namespace pitchfork::runio {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key))
      throw SpecError("unknown key \"" + key + "\" in " + where);
  }
}

std::vector<double> mu_list(const json& j) {
  if (j.is_array()) {
    auto values = j.get<std::vector<double>>();
    if (values.empty()) throw SpecError("mu: empty list");
    return values;
  }
  if (j.is_object()) {
    reject_unknown_keys(j, {"min", "max", "step"}, "mu");
    const double lo = j.at("min").get<double>();
    const double hi = j.at("max").get<double>();
    const double step = j.at("step").get<double>();
    if (!(step > 0.0) || hi < lo) throw SpecError("mu: bad range");
    std::vector<double> values;
    // lo + i*step rather than accumulation: no drift across the grid
    for (int i = 0; lo + i * step <= hi + 1e-15; ++i)
      values.push_back(lo + i * step);
    return values;
  }
  if (j.is_number()) return {j.get<double>()};
  throw SpecError("mu: expected number, list or {min,max,step}");
}

}  // namespace

ProblemSpec parse_problem_spec(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const std::exception& e) {
    throw SpecError(std::string("spec is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw SpecError("spec must be a JSON object");
  reject_unknown_keys(
      j,
      {"family", "plugin_path", "ambient_dim", "rotation", "mu", "mu_range_a",
       "alpha", "alpha1", "chi", "mesh_resolution", "solver", "flow",
       "simulate", "gronwall", "check", "out_dir"},
      "spec");

  ProblemSpec spec;
  spec.family = j.at("family").get<std::string>();
  static const std::set<std::string> families = {
      "canonical", "canonical-reversing", "flow-model", "plugin"};
  if (!families.count(spec.family))
    throw SpecError("family must be one of canonical, canonical-reversing, "
                    "flow-model, plugin");
  if (spec.family == "plugin") {
    if (!j.contains("plugin_path"))
      throw SpecError("family=plugin requires plugin_path");
    spec.plugin_path = j.at("plugin_path").get<std::string>();
  }
  if (j.contains("ambient_dim")) spec.ambient_dim = j["ambient_dim"].get<int>();
  if (spec.ambient_dim != 2 && spec.ambient_dim != 3)
    throw SpecError("ambient_dim must be 2 or 3");

  if (j.contains("rotation")) {
    const auto& rot = j["rotation"];
    reject_unknown_keys(rot, {"angle", "axis"}, "rotation");
    if (rot.contains("angle")) spec.rotation_angle = rot["angle"].get<double>();
    if (rot.contains("axis")) {
      spec.rotation_axis = rot["axis"].get<std::vector<double>>();
      if (spec.rotation_axis.size() != 3)
        throw SpecError("rotation.axis must have 3 components");
    }
  }

  if (!j.contains("mu")) throw SpecError("spec is missing mu");
  spec.mu_values = mu_list(j["mu"]);

  if (j.contains("mu_range_a")) spec.mu_range_a = j["mu_range_a"].get<double>();
  if (j.contains("alpha")) spec.alpha = j["alpha"].get<double>();
  if (j.contains("alpha1")) spec.alpha1 = j["alpha1"].get<double>();
  if (!(spec.alpha > 0.0) || !(spec.alpha1 > 0.0) || spec.alpha1 >= spec.alpha)
    throw SpecError("need 0 < alpha1 < alpha");
  for (double mu : spec.mu_values)
    if (std::abs(mu) > spec.mu_range_a + 1e-15)
      throw SpecError("mu value " + format_double(mu) +
                      " outside the declared range (-a, a)");

  if (j.contains("chi")) {
    const auto& chi = j["chi"];
    reject_unknown_keys(chi, {"policy", "value"}, "chi");
    const std::string policy = chi.value("policy", "default");
    if (policy == "fixed") {
      spec.chi_fixed = true;
      spec.chi_value = chi.at("value").get<double>();
      if (spec.chi_value < 0.0 || spec.chi_value >= spec.alpha)
        throw SpecError("chi.value must be in [0, alpha)");
    } else if (policy != "default") {
      throw SpecError("chi.policy must be default or fixed");
    }
  }

  if (j.contains("mesh_resolution"))
    spec.mesh_resolution = j["mesh_resolution"].get<int>();
  const int min_resolution = spec.ambient_dim == 2 ? 8 : 42;
  if (spec.mesh_resolution < min_resolution)
    throw SpecError("mesh_resolution below the minimum for this dimension");

  if (j.contains("solver")) {
    const auto& solver = j["solver"];
    reject_unknown_keys(solver, {"tol", "max_iter", "aitken"}, "solver");
    if (solver.contains("tol")) spec.solver_tol = solver["tol"].get<double>();
    if (solver.contains("max_iter"))
      spec.solver_max_iter = solver["max_iter"].get<int>();
    if (solver.contains("aitken"))
      spec.solver_aitken = solver["aitken"].get<bool>();
  }

  if (j.contains("flow")) {
    const auto& flow = j["flow"];
    reject_unknown_keys(flow, {"step", "time", "invariance_times"}, "flow");
    if (flow.contains("step")) spec.flow_step = flow["step"].get<double>();
    if (flow.contains("time")) spec.flow_time = flow["time"].get<double>();
    if (flow.contains("invariance_times"))
      spec.invariance_times =
          flow["invariance_times"].get<std::vector<double>>();
    if (!(spec.flow_step > 0.0)) throw SpecError("flow.step must be positive");
  }

  if (j.contains("simulate")) {
    const auto& sim = j["simulate"];
    reject_unknown_keys(sim, {"starts", "iterations"}, "simulate");
    if (sim.contains("starts"))
      spec.simulate_starts = sim["starts"].get<std::vector<double>>();
    if (sim.contains("iterations"))
      spec.simulate_iterations = sim["iterations"].get<int>();
  }

  if (j.contains("gronwall")) {
    const auto& gron = j["gronwall"];
    reject_unknown_keys(gron, {"rows"}, "gronwall");
    for (const auto& row : gron.at("rows")) {
      reject_unknown_keys(row, {"s", "sigma", "nu", "t"}, "gronwall row");
      ProblemSpec::GronwallRow r;
      r.s = row.at("s").get<double>();
      r.sigma = row.value("sigma", 0.0);
      r.nu = row.value("nu", 0.0);
      if (row.contains("t")) r.t = row["t"].get<std::vector<double>>();
      spec.gronwall_rows.push_back(std::move(r));
    }
  }

  if (j.contains("check")) {
    const auto& check = j["check"];
    reject_unknown_keys(check, {"conditions", "radial"}, "check");
    if (check.contains("conditions"))
      spec.check_conditions =
          check["conditions"].get<std::vector<std::string>>();
    for (const auto& label : spec.check_conditions)
      if (!hypotheses::condition_from_label(label))
        throw SpecError("unknown condition label \"" + label + "\"");
    if (check.contains("radial")) spec.check_radial = check["radial"].get<int>();
    if (spec.check_radial < 3) throw SpecError("check.radial must be >= 3");
  }

  if (j.contains("out_dir")) spec.out_dir = j["out_dir"].get<std::string>();
  return spec;
}

ProblemSpec load_problem_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SpecError("cannot open spec file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_problem_spec(buf.str());
}

std::uint64_t content_hash(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void atomic_write_file(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.parent_path() /
                       (target.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, target);
}

CsvWriter::CsvWriter(std::vector<std::string> columns)
    : columns_(std::move(columns)) {}

void CsvWriter::add_row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_.size())
    throw Error("CsvWriter: row width mismatch");
  rows_.push_back(cells);
}

std::string CsvWriter::str() const {
  std::ostringstream out;
  for (size_t i = 0; i < columns_.size(); ++i)
    out << columns_[i] << (i + 1 < columns_.size() ? "," : "\n");
  for (const auto& row : rows_)
    for (size_t i = 0; i < row.size(); ++i)
      out << row[i] << (i + 1 < row.size() ? "," : "\n");
  return out.str();
}

void write_manifest(const std::string& out_dir, RunManifest manifest) {
  for (const auto& rel : manifest.outputs) {
    const fs::path p = fs::path(out_dir) / rel;
    if (!fs::exists(p))
      throw Error("manifest lists missing output " + p.string());
  }
  json j;
  j["version"] = manifest.version;
  j["subcommand"] = manifest.subcommand;
  j["spec_hash"] = manifest.spec_hash;
  j["timestamp"] = manifest.timestamp;
  j["outputs"] = manifest.outputs;
  atomic_write_file((fs::path(out_dir) / "run_manifest.json").string(),
                    j.dump(2) + "\n");
}

dynsys::MapFamily build_map_family(const ProblemSpec& spec) {
  if (spec.family == "plugin") return load_plugin_family(spec.plugin_path);
  Mat rotation;
  if (spec.ambient_dim == 2) {
    rotation = dynsys::rotation2d(spec.rotation_angle);
  } else {
    Vec axis(3);
    axis << spec.rotation_axis[0], spec.rotation_axis[1],
        spec.rotation_axis[2];
    rotation = dynsys::rotation3d(axis, spec.rotation_angle);
  }
  auto canonical =
      dynsys::canonical_family(spec.ambient_dim, rotation, spec.mu_range_a);
  if (spec.family == "canonical-reversing")
    return dynsys::side_reversing_wrap(canonical);
  if (spec.family == "canonical") return canonical;
  throw SpecError("family " + spec.family + " is not a discrete map family");
}

flow::VectorFieldFamily build_flow_family(const ProblemSpec& spec) {
  if (spec.family != "flow-model")
    throw SpecError("family " + spec.family + " is not a flow family");
  auto field = flow::model_field(spec.ambient_dim);
  field.mu_range = dynsys::MuRange{spec.mu_range_a};
  return field;
}

namespace {

struct PluginHandle {
  void* handle = nullptr;
  ~PluginHandle() {
    if (handle) dlclose(handle);
  }
};

}  // namespace

dynsys::MapFamily load_plugin_family(const std::string& path) {
  auto holder = std::make_shared<PluginHandle>();
  holder->handle = dlopen(path.c_str(), RTLD_NOW | RTLD_LOCAL);
  if (!holder->handle)
    throw SpecError("cannot load plugin " + path + ": " + dlerror());
  auto entry = reinterpret_cast<pitchfork_plugin_entry_fn>(
      dlsym(holder->handle, "pitchfork_plugin_v1"));
  if (!entry)
    throw SpecError("plugin " + path + " lacks pitchfork_plugin_v1()");
  const PitchforkPluginV1* desc = entry();
  if (!desc || desc->abi_version != 1)
    throw SpecError("plugin " + path + " has an unsupported ABI version");
  if (desc->ambient_dim != 2 && desc->ambient_dim != 3)
    throw SpecError("plugin ambient_dim must be 2 or 3");
  if (!desc->forward) throw SpecError("plugin forward() is required");

  dynsys::MapFamily fam;
  fam.name = "plugin";
  fam.manifold = desc->ambient_dim == 2 ? geometry::make_unit_circle()
                                        : geometry::make_unit_sphere();
  fam.mu_range = dynsys::MuRange{desc->mu_abs_max};
  const int m = desc->ambient_dim;
  fam.forward = [holder, desc, m](const Vec& x, double mu) {
    Vec out(m);
    desc->forward(x.data(), m, mu, out.data());
    return out;
  };
  if (desc->inverse) {
    fam.inverse = [holder, desc, m](const Vec& x, double mu) {
      Vec out(m);
      desc->inverse(x.data(), m, mu, out.data());
      return out;
    };
  }
  if (desc->jacobian) {
    fam.jacobian = [holder, desc, m](const Vec& x, double mu) {
      std::vector<double> row_major(m * m);
      desc->jacobian(x.data(), m, mu, row_major.data());
      Mat jac(m, m);
      for (int i = 0; i < m; ++i)
        for (int k = 0; k < m; ++k) jac(i, k) = row_major[i * m + k];
      return jac;
    };
  }
  return fam;
}

}  // namespace pitchfork::runio
