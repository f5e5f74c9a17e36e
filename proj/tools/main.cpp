#include "report.hpp"
#include "scenario.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <iterator>

namespace fs = std::filesystem;
using namespace bcrb;
using namespace bcrb::cli;

namespace {

enum Exit { kOk = 0, kSchema = 2, kNumerical = 3, kOutput = 4 };

int fail(int code, const std::string& category, const std::string& detail) {
  std::string line = "bcrb: error: " + category + ": " + detail;
  for (char& c : line)
    if (c == '\n' || c == '\r') c = ' ';
  std::cerr << line << "\n";
  return code;
}

int execute(const std::string& kind, const std::string& config_path, std::string out_dir,
            const RunOptions& options) {
  std::ifstream in(config_path, std::ios::binary);
  if (!in) return fail(kSchema, "schema", "$: cannot read config '" + config_path + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  json config;
  try {
    config = json::parse(text);
  } catch (const json::parse_error& e) {
    return fail(kSchema, "schema", std::string("$: invalid JSON: ") + e.what());
  }
  const fs::path base = fs::absolute(config_path).parent_path();

  ScenarioResult result;
  try {
    result = run_scenario(kind, config, base, options);
    if (out_dir.empty()) {
      out_dir = ".";
      if (config.contains("output") && config["output"].is_string())
        out_dir = (base / config["output"].get<std::string>()).string();
    }
  } catch (const ConfigError& e) {
    return fail(kSchema, "schema", e.path() + ": " + e.what());
  } catch (const std::exception& e) {
    return fail(kNumerical, "numerical", e.what());
  }

  const std::string report = build_report(kind, config, options, result);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) return fail(kOutput, "output", "cannot create directory '" + out_dir + "'");
  std::vector<OutputFile> files = result.files;
  files.push_back({"report.json", report});
  for (const auto& f : files) {
    const fs::path p = fs::path(out_dir) / f.name;
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << f.contents;
    out.close();
    if (!out) return fail(kOutput, "output", "cannot write '" + p.string() + "'");
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian Cramer-Rao bound scenarios"};
  app.require_subcommand(1);
  std::string config, out;
  RunOptions options;
  for (const auto& kind : kKinds) {
    auto* sub = app.add_subcommand(kind, "run the " + kind + " scenario in --config");
    sub->add_option("--config", config, "scenario JSON file")->required();
    sub->add_option("--out", out, "output directory (default: the config's output field, else .)");
    sub->add_option("--grid-scale", options.grid_scale, "refine every grid by this factor")
        ->check(CLI::Range(1, 64));
    sub->add_option("--seed", options.seed, "seed for randomized sections");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kSchema, "usage", e.what());
  }
  for (auto* sub : app.get_subcommands())
    return execute(sub->get_name(), config, out, options);
  return kSchema;
}
