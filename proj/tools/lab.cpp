#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include <kmslab/cli_runner.hpp>

using namespace kmslab;

namespace {

Json read_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::config_invalid, "cannot open config " + path);
  try {
    return Json::parse(f);
  } catch (const Json::exception& e) {
    fail(ErrorCode::config_invalid, path + ": " + e.what());
  }
}

std::string command_line(int argc, char** argv) {
  std::string s = "lab";
  for (int i = 1; i < argc; ++i) s += std::string(" ") + argv[i];
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scenario runner for the conformal measure and isometry checks"};
  std::string scenario, config_path, out, mode, store_path;
  double tol = 0;
  bool oracle = false;
  app.add_option("scenario", scenario, "conformal-check | lift-check | tower | riesz-compare | isometry-verify | full-report")
      ->required();
  app.add_option("--config", config_path, "JSON configuration")->required();
  app.add_flag("--oracle", oracle, "generate reference records into the oracle store instead of checking");
  app.add_option("--out", out, "report directory");
  app.add_option("--mode", mode, "exact or numeric");
  app.add_option("--tol", tol, "numeric tolerance");
  app.add_option("--store", store_path, "oracle store file");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::config_invalid);
  }

  try {
    Json j = read_config(config_path);
    ScenarioConfig cfg = config_from_json(j);
    if (!cfg.scenario.empty() && cfg.scenario != scenario)
      fail(ErrorCode::config_invalid, "config is for '" + cfg.scenario + "', not '" + scenario + "'");
    cfg.scenario = scenario;
    if (!out.empty()) cfg.out = out;
    if (!mode.empty()) cfg.mode = parse_mode(mode);
    if (app.count("--tol")) cfg.tol = tol;
    if (!store_path.empty()) cfg.oracle_store = store_path;
    cfg.validate();

    OracleStore store = OracleStore::load(cfg.oracle_store);
    if (oracle) {
      auto keys = record_oracles(cfg, store, command_line(argc, argv));
      store.save(cfg.oracle_store);
      for (const auto& k : keys) std::cout << "recorded " << k << "\n";
      if (keys.empty()) std::cout << scenario << " has no oracle records\n";
      return static_cast<int>(ExitCode::pass);
    }

    ScenarioResult result = run_scenario(cfg, store);
    result.write(cfg.out);
    std::cout << scenario << ": " << (result.pass ? "PASS" : "FAIL") << " " << result.counts.dump()
              << " maxResidual=" << format_double(result.max_residual) << " -> " << cfg.out.string() << "\n";
    return static_cast<int>(result.pass ? ExitCode::pass : ExitCode::check_failed);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return static_cast<int>(exit_code_for(e));
  } catch (const std::exception& e) {
    std::cerr << "ConfigInvalid: " << e.what() << "\n";
    return static_cast<int>(ExitCode::config_invalid);
  }
}
