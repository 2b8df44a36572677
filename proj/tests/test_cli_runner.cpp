#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <kmslab/cli_runner.hpp>

#include "oracles.hpp"

using namespace kmslab;
namespace fs = std::filesystem;

namespace {

const fs::path source_dir = KMSLAB_SOURCE_DIR;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::invalid_argument;
}

ScenarioConfig config(const std::string& scenario, Json params) {
  ScenarioConfig cfg;
  cfg.scenario = scenario;
  cfg.params = std::move(params);
  return cfg;
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("kmslab-test-" + name);
  fs::remove_all(p);
  return p;
}

std::map<std::string, std::string> slurp_tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream f(e.path(), std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    files[fs::relative(e.path(), dir).string()] = s.str();
  }
  return files;
}

const OracleStore& committed_store() {
  static const OracleStore store = OracleStore::load(source_dir / "data/oracle_store.json");
  return store;
}

}  // namespace

TEST_CASE("config validation") {
  REQUIRE(code_of([] { config("no-such-scenario", Json::object()).validate(); }) == ErrorCode::config_invalid);
  auto cfg = config("tower", Json::object());
  cfg.mode = CheckMode::numeric;
  cfg.tol = 0;
  REQUIRE(code_of([&] { cfg.validate(); }) == ErrorCode::config_invalid);
  REQUIRE(code_of([] { parse_mode("approximate"); }) == ErrorCode::config_invalid);
  REQUIRE(code_of([] { config_from_json(Json::array()); }) == ErrorCode::config_invalid);

  auto parsed = config_from_json(Json::parse(R"({"scenario":"tower","mode":"numeric","tol":1e-9,"out":"r"})"), "base");
  REQUIRE(parsed.mode == CheckMode::numeric);
  REQUIRE(parsed.tol == 1e-9);
  REQUIRE(parsed.out == fs::path("base/r"));
}

TEST_CASE("beta literals") {
  REQUIRE(params::real(Json("ln2"), "beta") == Catch::Approx(std::log(2.0)));
  REQUIRE(params::real(Json("-ln2"), "beta") == Catch::Approx(-std::log(2.0)));
  REQUIRE(params::real(Json("2ln3"), "beta") == Catch::Approx(2 * std::log(3.0)));
  REQUIRE(params::real(Json("1/2"), "theta") == 0.5);
  REQUIRE(params::real(Json(1.5), "theta") == 1.5);
  REQUIRE(code_of([] { params::real(Json("lnx"), "beta"); }) == ErrorCode::config_invalid);
  REQUIRE(code_of([] { params::real(Json("ln0"), "beta"); }) == ErrorCode::config_invalid);
  REQUIRE(params::beta(Json::object()).half_factor() == Rational(1, 2));
  REQUIRE_FALSE(params::beta(Json{{"beta", 0.7}}).exact());
  REQUIRE(code_of([] { params::beta(Json{{"half_factor", "3/2"}}); }) == ErrorCode::config_invalid);
}

TEST_CASE("conformal-check reports one row per cylinder") {
  auto res = run_scenario(config("conformal-check", {{"beta", "ln2"}, {"theta", 1}, {"depth", 6}}), OracleStore{});
  // every window [lo, hi] inside [-6, 6] with every symbol string, plus the full space
  std::size_t expected = 1;
  for (int lo = -6; lo <= 6; ++lo)
    for (int hi = lo; hi <= 6; ++hi) expected += std::size_t{1} << (hi - lo + 1);
  REQUIRE(res.pass);
  REQUIRE(res.counts["cylinders"] == expected);
  REQUIRE(res.tables.front().second.size() == expected);
  REQUIRE(res.tables.front().second.header() == std::vector<std::string>{"window", "symbols", "lhs", "rhs", "pass"});
  REQUIRE(code_of([] { run_scenario(config("conformal-check", {{"depth", 11}}), OracleStore{}); }) ==
          ErrorCode::config_invalid);
}

TEST_CASE("oracle store records") {
  OracleStore store;
  OracleRecord rec;
  rec.scenario = "riesz-compare";
  rec.values = Json::array({{{"lag", 0}, {"value", "1"}}});
  rec.provenance = {"lab riesz-compare --oracle", "2026-01-01", "test"};
  store.record("k", rec);
  REQUIRE(code_of([&] { store.record("k", rec); }) == ErrorCode::key_exists);
  OracleRecord empty = rec;
  empty.values = Json::array();
  REQUIRE(code_of([&] { store.record("other", empty); }) == ErrorCode::config_invalid);
  REQUIRE(code_of([&] { store.at("missing"); }) == ErrorCode::config_invalid);

  auto dir = scratch("store");
  store.save(dir / "store.json");
  auto back = OracleStore::load(dir / "store.json");
  REQUIRE(back.to_json() == store.to_json());
  REQUIRE(back.at("k").provenance.command == "lab riesz-compare --oracle");
  REQUIRE(OracleStore::load(dir / "absent.json").size() == 0);
}

TEST_CASE("brute-force generators agree with the test oracles") {
  for (int K = 1; K <= 4; ++K) {
    TowerSystem t(canonical_heights(), K);
    auto values = brute::koopman_by_permutation(t, t.cycle_length());
    for (std::int64_t lag = 0; lag <= t.cycle_length(); ++lag)
      REQUIRE(values[static_cast<std::size_t>(lag)] == oracle::base_autocorrelation(t.frequencies(), lag));
  }
  for (std::int64_t m = -20; m <= 20; ++m)
    REQUIRE(std::abs(brute::riesz_by_quadrature({1, 4, 13}, m) - oracle::riesz_numeric({1, 4, 13}, m)) < 1e-10);
  REQUIRE(brute::staircase_purity({0, -1, -2, -3, -4, -5, -6, -7, -8, -9}, 10, 3) == Rational(7, 25));
  REQUIRE(brute::ceil_nano(0.25) == Rational(1, 4));
  REQUIRE(brute::ceil_nano(1e-10) == Rational(1, 1000000000));
}

TEST_CASE("committed oracle store") {
  const auto& store = committed_store();
  const auto& koop = store.at(koopman_key({1, 4, 13}, 3));
  REQUIRE(koop.extra.at("cycle_length") == 40);
  REQUIRE(koop.values.size() == 41);
  for (const auto& v : koop.values)
    REQUIRE(parse_rational(v.at("value").get<std::string>()) ==
            oracle::base_autocorrelation({1, 4, 13}, v.at("lag").get<std::int64_t>()));
  REQUIRE(koop.extra.at("thresholds").size() == 41);
  REQUIRE_FALSE(koop.provenance.date.empty());
  const auto& purity = store.at(purity_key({0, -1, -2, -3, -4, -5, -6, -7, -8, -9}, 10, 3));
  REQUIRE(purity.values.at(0).at("value") == "7/25");
}

TEST_CASE("riesz-compare needs its oracle key") {
  auto cfg = config("riesz-compare", {{"heights", {1, 4, 13}}, {"K", 3}});
  REQUIRE(code_of([&] { run_scenario(cfg, OracleStore{}); }) == ErrorCode::config_invalid);
  auto res = run_scenario(cfg, committed_store());
  REQUIRE(res.pass);
  REQUIRE(res.counts["lags"] == 41);
  cfg.params["lags"] = {0, 41};
  REQUIRE(code_of([&] { run_scenario(cfg, committed_store()); }) == ErrorCode::config_invalid);
}

TEST_CASE("isometry-verify flags non-commuting ranges") {
  Json build{{"model", "operator2"}, {"d", 4},       {"seed", 20240611},
             {"blocks", {{0, 2}, {1}, {3}}}, {"fiber", 12}};
  auto spectral = run_scenario(config("isometry-verify", {{"builds", {build}}}), OracleStore{});
  REQUIRE(spectral.pass);
  build["projections"] = "coordinate";
  auto coordinate = run_scenario(config("isometry-verify", {{"builds", {build}}}), OracleStore{});
  REQUIRE_FALSE(coordinate.pass);
  REQUIRE(coordinate.counts["failed_rows"] == 1);
  build["fiber"] = 8;
  build["projections"] = "spectral";
  auto narrow = run_scenario(config("isometry-verify", {{"builds", {build}}}), OracleStore{});
  REQUIRE_FALSE(narrow.pass);
  REQUIRE(narrow.tables.front().second.str().find("pairs without interior cells") != std::string::npos);
  build["model"] = "hilbert-hotel";
  REQUIRE(code_of([&] { run_scenario(config("isometry-verify", {{"builds", {build}}}), OracleStore{}); }) ==
          ErrorCode::config_invalid);
  Json slope{{"model", "theta1"}, {"f", {0, -2}}, {"fiber", 4}};
  REQUIRE(code_of([&] { run_scenario(config("isometry-verify", {{"builds", {slope}}}), OracleStore{}); }) ==
          ErrorCode::slope_violation);
}

TEST_CASE("numeric mode") {
  auto cfg = config("isometry-verify",
                    {{"builds", {{{"model", "theta1"}, {"f", {0, 0, -1, -1, 0}}, {"fiber", 10}, {"half_factor", "1/2"}}}}});
  cfg.mode = CheckMode::numeric;
  cfg.tol = 1e-12;
  auto res = run_scenario(cfg, OracleStore{});
  REQUIRE(res.pass);
  REQUIRE(res.max_residual <= 1e-12);
}

TEST_CASE("full-report aggregates in order and reports are deterministic") {
  Json runs = Json::array({{{"scenario", "tower"}, {"params", {{"heights", {1, 4, 13}}}}},
                           {{"scenario", "riesz-compare"}, {"params", {{"heights", {1, 4, 13}}, {"lags", {0, 1, 5}}}}},
                           {{"scenario", "conformal-check"}, {"params", {{"depth", 3}}}}});
  auto cfg = config("full-report", {{"scenarios", runs}});
  auto a = run_scenario(cfg, committed_store());
  REQUIRE(a.pass);
  REQUIRE(a.children.size() == 3);
  REQUIRE(a.children[0].first == "00-tower");
  REQUIRE(a.children[2].first == "02-conformal-check");
  REQUIRE(a.counts["passed"] == 3);

  auto d1 = scratch("det1"), d2 = scratch("det2");
  a.write(d1);
  run_scenario(cfg, committed_store()).write(d2);
  auto f1 = slurp_tree(d1);
  REQUIRE(f1 == slurp_tree(d2));
  auto summary = Json::parse(f1.at("summary.json"));
  REQUIRE(summary.size() == 5);
  for (const char* key : {"scenario", "params", "pass", "counts", "maxResidual"}) REQUIRE(summary.contains(key));

  runs.push_back({{"scenario", "full-report"}});
  REQUIRE(code_of([&] { run_scenario(config("full-report", {{"scenarios", runs}}), committed_store()); }) ==
          ErrorCode::config_invalid);
  REQUIRE(code_of([] { run_scenario(config("full-report", Json::object()), OracleStore{}); }) == ErrorCode::config_invalid);
}

TEST_CASE("oracle pass writes fresh records only") {
  OracleStore store;
  auto cfg = config("riesz-compare", {{"heights", {1, 4, 13}}, {"K", 2}});
  auto keys = record_oracles(cfg, store, "lab riesz-compare --oracle");
  REQUIRE(keys == std::vector<std::string>{koopman_key({1, 4}, 2)});
  REQUIRE(code_of([&] { record_oracles(cfg, store, "again"); }) == ErrorCode::key_exists);
  REQUIRE(run_scenario(cfg, store).pass);
  REQUIRE(record_oracles(config("tower", Json::object()), store, "x").empty());
}

TEST_CASE("csv quoting and exit codes") {
  CsvTable t({"a", "b"});
  t.add({"x,y", "say \"hi\""});
  REQUIRE(t.str() == "a,b\n\"x,y\",\"say \"\"hi\"\"\"\n");
  REQUIRE_THROWS_AS(t.add({"only one"}), Error);
  REQUIRE(exit_code_for(Error(ErrorCode::coherence_violation, "")) == ExitCode::check_failed);
  REQUIRE(exit_code_for(Error(ErrorCode::key_exists, "")) == ExitCode::config_invalid);
}
