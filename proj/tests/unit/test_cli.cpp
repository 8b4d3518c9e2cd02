#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(PITCHFORK_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pf_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_spec(const fs::path& dir, const std::string& body) {
  const fs::path path = dir / "spec.json";
  std::ofstream out(path);
  out << body;
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("check: exit codes mirror the verdicts") {
  const auto dir = fresh_dir("check");

  SUBCASE("all conditions hold at mu = 1/25") {
    const auto spec = write_spec(dir, R"({
      "family": "canonical", "mu": [0.04], "mesh_resolution": 64,
      "check": {"radial": 17}, "out_dir": ")" + (dir / "out").string() + R"("
    })");
    CHECK(run_cli("check --spec " + spec.string()) == 0);
    CHECK(fs::exists(dir / "out" / "verdicts.json"));
    CHECK(fs::exists(dir / "out" / "run_manifest.json"));
    const json doc = json::parse(slurp(dir / "out" / "verdicts.json"));
    CHECK(doc["per_mu"][0]["overall"].get<bool>());
  }

  SUBCASE("the default condition set fails honestly at mu = 1/50: the "
          "constant shell is not forward-invariant there") {
    const auto spec = write_spec(dir, R"({
      "family": "canonical", "mu": [0.02], "mesh_resolution": 64,
      "check": {"radial": 17}, "out_dir": ")" + (dir / "out2").string() + R"("
    })");
    CHECK(run_cli("check --spec " + spec.string()) == 2);
    const json doc = json::parse(slurp(dir / "out2" / "verdicts.json"));
    bool shell_failed = false;
    for (const auto& c : doc["per_mu"][0]["conditions"])
      if (c["id"] == "v") shell_failed = !c["holds"].get<bool>();
    CHECK(shell_failed);
  }

  SUBCASE("explicitly requested conditions pass at mu = 1/50") {
    const auto spec = write_spec(dir, R"({
      "family": "canonical", "mu": [0.02], "mesh_resolution": 64,
      "check": {"conditions": ["i","iii","iv","vi","vii","viii"],
                 "radial": 17},
      "out_dir": ")" + (dir / "out3").string() + R"("
    })");
    CHECK(run_cli("check --spec " + spec.string()) == 0);
  }

  SUBCASE("requesting (iii) below the threshold exits 2") {
    const auto spec = write_spec(dir, R"({
      "family": "canonical", "mu": [-0.02], "mesh_resolution": 64,
      "check": {"conditions": ["iii"], "radial": 17},
      "out_dir": ")" + (dir / "out4").string() + R"("
    })");
    CHECK(run_cli("check --spec " + spec.string()) == 2);
  }

  SUBCASE("malformed specs exit 1") {
    const auto spec = write_spec(dir, R"({"family": "canonical"})");
    CHECK(run_cli("check --spec " + spec.string()) == 1);
    CHECK(run_cli("check --spec /nonexistent/spec.json") == 1);
  }
}

TEST_CASE("solve: branches, summaries and the no-bifurcation exit") {
  const auto dir = fresh_dir("solve");

  SUBCASE("canonical mu = 1/100") {
    const auto spec = write_spec(dir, R"({
      "family": "canonical", "mu": [0.01], "mesh_resolution": 64,
      "out_dir": ")" + (dir / "out").string() + R"("
    })");
    CHECK(run_cli("solve --spec " + spec.string()) == 0);
    const json summary = json::parse(slurp(dir / "out" / "summary.json"));
    REQUIRE(summary["branches"].size() == 1);
    const auto& branch = summary["branches"][0];
    CHECK(std::abs(branch["plus"]["mean_offset"].get<double>() - 0.1) <
          1e-9);
    CHECK(branch["plus"]["spread"].get<double>() < 1e-10);
    CHECK(branch["plus_attracting"].get<bool>());
    CHECK(branch["manifold_repelling"].get<bool>());
    CHECK(fs::exists(dir / "out" / "branch_000_plus.csv"));
    CHECK(fs::exists(dir / "out" / "run_000_minus.csv"));
    const json manifest =
        json::parse(slurp(dir / "out" / "run_manifest.json"));
    for (const auto& rel : manifest["outputs"])
      CHECK(fs::exists(dir / "out" / rel.get<std::string>()));
  }

  SUBCASE("side-reversing family: branches via the squared map, swap "
          "verified") {
    const auto spec = write_spec(dir, R"({
      "family": "canonical-reversing", "mu": [0.02], "mesh_resolution": 64,
      "out_dir": ")" + (dir / "out_rev").string() + R"("
    })");
    CHECK(run_cli("solve --spec " + spec.string()) == 0);
    const json summary = json::parse(slurp(dir / "out_rev" / "summary.json"));
    CHECK(summary["side_reversing"].get<bool>());
    CHECK(summary["swap_deviation"].get<double>() <= 1e-8);
    CHECK(summary["square_invariance"].get<double>() <= 1e-8);
    CHECK(std::abs(summary["branches"][0]["plus"]["mean_offset"].get<double>() -
                   std::sqrt(0.02)) < 1e-9);
  }

  SUBCASE("mu at the threshold exits 3") {
    const auto spec = write_spec(dir, R"({
      "family": "canonical", "mu": [0.0], "mesh_resolution": 64,
      "out_dir": ")" + (dir / "out5").string() + R"("
    })");
    CHECK(run_cli("solve --spec " + spec.string()) == 3);
  }

  SUBCASE("identical specs give byte-identical numeric outputs") {
    const std::string body = R"({
      "family": "canonical", "mu": [0.02], "mesh_resolution": 64,
      "out_dir": "unused"
    })";
    const auto spec = write_spec(dir, body);
    const auto out_a = dir / "rep_a";
    const auto out_b = dir / "rep_b";
    REQUIRE(run_cli("solve --spec " + spec.string() + " --out " +
                    out_a.string()) == 0);
    REQUIRE(run_cli("solve --spec " + spec.string() + " --out " +
                    out_b.string()) == 0);
    for (const char* file :
         {"branch_000_plus.csv", "branch_000_minus.csv", "run_000_plus.csv",
          "run_000_minus.csv", "summary.json"}) {
      CHECK(slurp(out_a / file) == slurp(out_b / file));
    }
  }
}

TEST_CASE("simulate: trajectory dumps") {
  const auto dir = fresh_dir("simulate");
  const auto spec = write_spec(dir, R"({
    "family": "canonical", "mu": [-0.02], "mesh_resolution": 16,
    "simulate": {"starts": [0.18], "iterations": 50},
    "out_dir": ")" + (dir / "out").string() + R"("
  })");
  CHECK(run_cli("simulate --spec " + spec.string()) == 0);
  const std::string csv = slurp(dir / "out" / "trajectories.csv");
  CHECK(count_lines(csv) == 52);  // header + 51 states
  CHECK(csv.rfind("start_id,mu,n,x0,x1,r,theta", 0) == 0);

  // a start outside the tube is rejected up front
  const auto bad = write_spec(dir, R"({
    "family": "canonical", "mu": [-0.02], "mesh_resolution": 16,
    "simulate": {"starts": [0.5], "iterations": 5},
    "out_dir": ")" + (dir / "out_bad").string() + R"("
  })");
  CHECK(run_cli("simulate --spec " + bad.string()) == 1);
}

TEST_CASE("scan: pitchfork diagram rows") {
  const auto dir = fresh_dir("scan");
  const auto spec = write_spec(dir, R"({
    "family": "canonical", "mu": [-0.01, 0.01, 0.02],
    "mesh_resolution": 32,
    "out_dir": ")" + (dir / "out").string() + R"("
  })");
  CHECK(run_cli("scan --spec " + spec.string()) == 0);
  const std::string csv = slurp(dir / "out" / "scan.csv");
  REQUIRE(count_lines(csv) == 4);
  std::istringstream lines(csv);
  std::string header, row_neg, row_pos;
  std::getline(lines, header);
  std::getline(lines, row_neg);
  std::getline(lines, row_pos);
  CHECK(row_neg.find("-0.01") == 0);
  CHECK(row_neg.find(",0,") != std::string::npos);  // no branches below mu*
  CHECK(row_pos.find("0.01,1,") == 0);
}

TEST_CASE("gronwall: bounds table with violation flags") {
  const auto dir = fresh_dir("gronwall");
  const auto spec = write_spec(dir, R"({
    "family": "canonical", "mu": [0.01],
    "gronwall": {"rows": [
      {"s": 1.0, "sigma": 0.0, "nu": 0.0, "t": [1.0]},
      {"s": 1.0, "sigma": 0.1, "nu": 0.1, "t": [1.0]},
      {"s": 0.1, "sigma": 0.3, "nu": 0.0, "t": [1.0]}
    ]},
    "out_dir": ")" + (dir / "out").string() + R"("
  })");
  CHECK(run_cli("gronwall --spec " + spec.string()) == 0);
  const std::string csv = slurp(dir / "out" / "gronwall.csv");
  REQUIRE(count_lines(csv) == 4);
  CHECK(csv.find("0.13533528323661") != std::string::npos);  // E0 = e^-2
  CHECK(csv.find("sigma >= s/4") != std::string::npos);
}

TEST_CASE("plugin family through the CLI") {
  const auto dir = fresh_dir("plugin");
  const auto spec = write_spec(dir, R"({
    "family": "plugin", "plugin_path": ")" PITCHFORK_TEST_PLUGIN R"(",
    "mu": [0.01], "mesh_resolution": 32,
    "out_dir": ")" + (dir / "out").string() + R"("
  })");
  CHECK(run_cli("solve --spec " + spec.string()) == 0);
  const json summary = json::parse(slurp(dir / "out" / "summary.json"));
  CHECK(std::abs(summary["branches"][0]["plus"]["mean_offset"].get<double>() -
                 0.1) < 1e-8);
}

TEST_CASE("flow-solve: the continuous pipeline end to end") {
  const auto dir = fresh_dir("flow");
  const auto spec = write_spec(dir, R"({
    "family": "flow-model", "mu": [0.02], "mesh_resolution": 16,
    "alpha": 0.2, "alpha1": 0.1,
    "solver": {"tol": 1e-10},
    "flow": {"step": 0.002, "time": 1.0, "invariance_times": [0.37, 1.0]},
    "check": {"radial": 9},
    "out_dir": ")" + (dir / "out").string() + R"("
  })");
  CHECK(run_cli("flow-solve --spec " + spec.string()) == 0);
  const json flow_doc = json::parse(slurp(dir / "out" / "flow_verdicts.json"));
  CHECK(flow_doc["per_mu"][0]["overall"].get<bool>());
  const json map_doc = json::parse(slurp(dir / "out" / "map_verdicts.json"));
  CHECK(map_doc["per_mu"][0]["overall"].get<bool>());
  const json summary = json::parse(slurp(dir / "out" / "summary.json"));
  CHECK(std::abs(summary["branches"][0]["plus"]["mean_offset"].get<double>() -
                 std::sqrt(0.02)) < 1e-7);
  const std::string inv = slurp(dir / "out" / "invariance.csv");
  std::istringstream lines(inv);
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  const double deviation = std::stod(row.substr(row.find(',') + 1));
  CHECK(deviation <= 1e-6);
}
