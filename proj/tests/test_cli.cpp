#include "doctest.h"

#include "report.hpp"
#include "scenario.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace bcrb;
using namespace bcrb::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = BCRB_SCENARIO_DIR;

json load(const std::string& name) {
  std::ifstream in(kScenarios / name);
  return json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, std::string* stderr_text = nullptr) {
  const std::string err = "test_cli_stderr.txt";
  const int status = std::system((std::string(BCRB_EXE) + " " + args + " 2>" + err).c_str());
  if (stderr_text) *stderr_text = slurp(err);
  fs::remove(err);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config_error_path(const std::string& kind, const json& config) {
  try {
    run_scenario(kind, config, kScenarios, {});
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "";
}

}  // namespace

TEST_CASE("canonical_json sorts keys and formats floats") {
  json j = {{"zeta", 1}, {"alpha", {{"b", 0.1}, {"a", -2.5e-300}}}, {"mid", {1.0, 2}}, {"s", "x"}};
  CHECK(canonical_json(j) ==
        "{\n"
        "  \"alpha\": {\n"
        "    \"a\": -2.500000000000e-300,\n"
        "    \"b\": 1.000000000000e-01\n"
        "  },\n"
        "  \"mid\": [\n"
        "    1.000000000000e+00,\n"
        "    2\n"
        "  ],\n"
        "  \"s\": \"x\",\n"
        "  \"zeta\": 1\n"
        "}\n");
  CHECK(canonical_json(json(std::numeric_limits<double>::infinity())) == "\"inf\"\n");
  CHECK(canonical_json(json(-0.0)) == "0.000000000000e+00\n");
}

TEST_CASE("sha256_hex") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("schema violations name the field") {
  CHECK(config_error_path("bound", json::object()) == "$.model");
  CHECK(config_error_path("bound", json::array()) == "$");
  json c = load("gaussian_closed_form.json");
  c["model"]["grid"]["nodes"][0] = 2;
  CHECK(config_error_path("bound", c) == "$.model.grid.nodes[0]");
  c = load("gaussian_closed_form.json");
  c["model"]["prior"]["varience"] = 1;
  CHECK(config_error_path("bound", c) == "$.model.prior.varience");
  c = load("gaussian_closed_form.json");
  CHECK(config_error_path("optimal", c) == "$.kind");
  c.erase("n");
  CHECK(config_error_path("bound", c) == "$.n");
  c = load("minimax_quadratic.json");
  c["n_list"] = {1e2, 1e3, 1e4};
  CHECK(config_error_path("minimax", c) == "$.n_list");
  c = load("waveform_rectangle.json");
  c["nodes"] = 800;
  CHECK(config_error_path("waveform", c) == "$.nodes");
  c = load("imaging_rank.json");
  c["psf"]["csv"] = "missing.csv";
  CHECK(config_error_path("imaging", c) == "$.psf");
  c["psf"].erase("catalog");
  CHECK(config_error_path("imaging", c) == "$.psf.csv");
}

TEST_CASE("Gaussian closed-form scenario") {
  const auto r = run_scenario("bound", load("gaussian_closed_form.json"), kScenarios, {});
  const double b = r.results["rows"][0]["bmax"].get<double>();
  CHECK(std::abs(b - 1.0 / 11) < 1e-6);
  CHECK(r.results["rows"][0]["random_fields"]["above_bmax"].get<int>() == 0);
  CHECK(r.files.front().name == "bounds.csv");
  CHECK(r.files.front().contents.rfind("n,A,F,P,B,v_choice,residual\n", 0) == 0);
}

TEST_CASE("minimax scenario slope") {
  const auto r = run_scenario("minimax", load("minimax_quadratic.json"), kScenarios, {});
  CHECK(std::abs(r.results["slope"].get<double>() + 0.5) < 0.05);
  REQUIRE(r.files.size() == 1);
  CHECK(r.files[0].name == "rate.csv");
  CHECK(r.files[0].contents.rfind("n,E_min,B_worst\n", 0) == 0);
}

TEST_CASE("waveform violations are sorted by frequency") {
  const auto r = run_scenario("waveform", load("waveform_rectangle.json"), kScenarios, {});
  CHECK(std::abs(r.results["continuum_qmax"].get<double>() - 0.5) < 1e-6);
  const auto& v = r.results["violations"];
  REQUIRE(v.size() > 1);
  for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i - 1]["omega"].get<double>() < v[i]["omega"].get<double>());
}

TEST_CASE("imaging rank table columns") {
  json c = load("imaging_rank.json");
  c.erase("exponent");
  c.erase("sources");
  c["rank_scan"]["scales"] = {1.0, 0.5};
  const auto r = run_scenario("imaging", c, kScenarios, {});
  REQUIRE(r.files.size() == 1);
  CHECK(r.files[0].contents.rfind("scale,lambda1,lambda2,lambda3\n", 0) == 0);
}

TEST_CASE("CLI exit codes") {
  const fs::path work = "test_cli_work";
  fs::remove_all(work);
  fs::create_directories(work);
  std::ofstream(work / "empty.json").close();
  std::string err;
  CHECK(run_cli("bound --config " + (work / "empty.json").string() + " --out " + work.string(), &err) == 2);
  CHECK(err.rfind("bcrb: error: schema: $:", 0) == 0);
  CHECK(std::count(err.begin(), err.end(), '\n') == 1);

  json bad = load("gaussian_closed_form.json");
  bad["model"]["grid"]["nodes"] = {"many"};
  std::ofstream(work / "bad.json") << bad.dump();
  CHECK(run_cli("bound --config " + (work / "bad.json").string() + " --out " + work.string(), &err) == 2);
  CHECK(err.find("$.model.grid.nodes[0]") != std::string::npos);

  // density underflows the floor on the widened box
  json wide = load("gaussian_closed_form.json");
  wide["model"]["grid"] = {{"lower", {-12.0}}, {"upper", {12.0}}, {"nodes", {241}}};
  std::ofstream(work / "wide.json") << wide.dump();
  CHECK(run_cli("bound --config " + (work / "wide.json").string() + " --out " + work.string(), &err) == 3);
  CHECK(err.rfind("bcrb: error: numerical:", 0) == 0);

  std::ofstream(work / "blocker").close();
  const auto scenario = (kScenarios / "minimax_quadratic.json").string();
  CHECK(run_cli("minimax --config " + scenario + " --out " + (work / "blocker" / "sub").string(), &err) == 4);
  CHECK(err.rfind("bcrb: error: output:", 0) == 0);

  CHECK(run_cli("frobnicate --config " + scenario) == 2);
  CHECK(run_cli("minimax") == 2);
  fs::remove_all(work);
}

TEST_CASE("report round trip through the embedded config") {
  const fs::path work = "test_cli_roundtrip";
  fs::remove_all(work);
  const auto scenario = (kScenarios / "waveform_rectangle.json").string();
  REQUIRE(run_cli("waveform --config " + scenario + " --out " + (work / "a").string()) == 0);
  const std::string report = slurp(work / "a" / "report.json");
  const json parsed = json::parse(report);
  CHECK(parsed["config_sha256"].get<std::string>() == sha256_hex(parsed["config"].dump()));
  std::ofstream(work / "embedded.json") << parsed["config"].dump(2);
  REQUIRE(run_cli("waveform --config " + (work / "embedded.json").string() + " --out " + (work / "b").string()) == 0);
  CHECK(slurp(work / "b" / "report.json") == report);
  CHECK(slurp(work / "b" / "violations.csv") == slurp(work / "a" / "violations.csv"));
  fs::remove_all(work);
}

TEST_CASE("grid scale and seed are recorded") {
  RunOptions o;
  o.grid_scale = 2;
  o.seed = 7;
  json c = load("optimal_2d.json");
  c["n_list"] = {10};
  const auto r = run_scenario("optimal", c, kScenarios, o);
  CHECK(r.results["grid"].get<std::string>() == "grid[[-5, 5]/101 x [-5, 5]/101]");
  const json report = json::parse(build_report("optimal", c, o, r));
  CHECK(report["options"]["grid_scale"] == 2);
  CHECK(report["options"]["seed"] == 7);
  CHECK(report["files"].size() == 2);
}
