#pragma once

// Structured-text records (JSON) and CSV tables for the library's value types.
// Exact quantities travel as strings so that rationals round-trip.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "isometry_engine.hpp"
#include "lattice_space.hpp"
#include "odometer_tower.hpp"
#include "riesz_spectral.hpp"
#include "symbolic_space.hpp"

namespace kmslab {

using Json = nlohmann::ordered_json;

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(std::vector<std::string> row) {
    if (row.size() != header_.size()) fail(ErrorCode::invalid_argument, "csv row width differs from the header");
    rows_.push_back(std::move(row));
  }

  std::size_t size() const { return rows_.size(); }
  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

  std::string str() const {
    std::ostringstream out;
    line(out, header_);
    for (const auto& r : rows_) line(out, r);
    return out.str();
  }

  void write(const std::filesystem::path& path) const { write_text(path, str()); }

  static void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(ErrorCode::invalid_argument, "cannot write " + path.string());
    f << text;
  }

 private:
  static std::string quote(const std::string& cell) {
    if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
    std::string q = "\"";
    for (char c : cell) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }

  static void line(std::ostringstream& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << quote(cells[i]);
    out << '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline std::string format_double(double x) {
  std::ostringstream s;
  s.precision(17);
  s << x;
  return s.str();
}

inline const char* pass_string(bool pass) { return pass ? "true" : "false"; }

// symbolic_space

inline Json to_json(const CylinderMeasure& m) {
  Json params = Json::object();
  for (const auto& [name, w] : m.parameters()) params[name] = w.to_string();
  return {{"kind", to_string(m.kind())}, {"beta", m.beta()}, {"theta", m.theta()}, {"parameters", params}};
}

inline CsvTable conformality_csv(const ConformalityReport& r) {
  CsvTable t({"window", "symbols", "lhs", "rhs", "pass"});
  for (const auto& row : r.rows)
    t.add({row.cylinder.window_string(), row.cylinder.symbols_string(), row.lhs.to_string(), row.rhs.to_string(),
           pass_string(row.pass)});
  return t;
}

// lattice_space

inline Json to_json(const StaircaseProfile& p) {
  Json heights = Json::array();
  for (const auto& h : p.heights()) {
    if (h.is_finite())
      heights.push_back(h.value());
    else
      heights.push_back(h.to_string());
  }
  return {{"basis", p.basis() == Basis::skewed ? "skewed" : "standard"}, {"window", {p.lo(), p.hi()}}, {"heights", heights}};
}

inline StaircaseProfile profile_from_json(const Json& j) {
  std::vector<Height> h;
  for (const auto& x : j.at("heights")) {
    if (x.is_number_integer())
      h.emplace_back(x.get<std::int64_t>());
    else if (x == "inf")
      h.push_back(Height::pos_inf());
    else if (x == "-inf")
      h.push_back(Height::neg_inf());
    else
      fail(ErrorCode::invalid_argument, "unreadable height " + x.dump());
  }
  Basis basis = j.value("basis", std::string("skewed")) == "standard" ? Basis::standard : Basis::skewed;
  return StaircaseProfile(basis, j.at("window").at(0).get<std::int64_t>(), std::move(h));
}

inline CsvTable equivariance_csv(const std::vector<EquivarianceRow>& rows) {
  CsvTable t({"word", "t", "generator", "pass"});
  for (const auto& r : rows)
    t.add({r.word.window_string() + " " + r.word.symbols_string(), std::to_string(r.t), to_string(r.generator),
           pass_string(r.pass)});
  return t;
}

// odometer_tower

inline Json to_json(const TowerSystem& t) {
  return {{"heights", t.frequencies()}, {"K", t.K()}};
}

inline TowerSystem tower_from_json(const Json& j) {
  auto n = j.at("heights").get<std::vector<std::int64_t>>();
  if (j.contains("K")) return TowerSystem(n, j.at("K").get<int>());
  return TowerSystem(n);
}

inline CsvTable orbit_csv(const TowerSystem& t) {
  CsvTable table({"step", "base", "level"});
  auto orbit = tower_orbit(t);
  for (std::size_t i = 0; i < orbit.size(); ++i)
    table.add({std::to_string(i), orbit[i].base.to_string(), std::to_string(orbit[i].level)});
  return table;
}

inline Json to_json(const FrequencyPlan& p) {
  Json n = Json::array();
  for (const auto& x : p.n) n.push_back(x.get_str());
  return {{"alpha", p.alpha}, {"n", n}, {"certificates", p.certificates}};
}

// riesz_spectral

inline CsvTable spectral_csv(const SpectralReport& r) {
  CsvTable t({"lag", "koopman", "riesz", "deviation", "threshold", "pass"});
  for (const auto& row : r.rows)
    t.add({std::to_string(row.lag), to_string(row.koopman), to_string(row.riesz), to_string(row.deviation),
           to_string(row.threshold), pass_string(row.pass)});
  return t;
}

// isometry_engine

template <class S>
std::string scalar_string(const S& x) {
  if constexpr (std::is_same_v<S, Rational>)
    return to_string(x);
  else if constexpr (std::is_same_v<S, Complex>)
    return format_double(x.real()) + (x.imag() < 0 ? "" : "+") + format_double(x.imag()) + "i";
  else
    return format_double(x);
}

template <class S>
Json to_json(const TruncatedOperator<S>& op) {
  Json triplets = Json::array(), lossy = Json::array();
  for (std::size_t c = 0; c < op.dim(); ++c) {
    for (const auto& [r, x] : op.column(c)) triplets.push_back({r, c, scalar_string(x)});
    if (op.lossy(c)) lossy.push_back(c);
  }
  return {{"triplets", triplets}, {"lossy", lossy}, {"margin", {op.margin.fiber, op.margin.base}}};
}

template <class S>
Json to_json(const IsoRep<S>& rep) {
  Json j{{"model", rep.model},
         {"grid", {{"base", rep.grid.base}, {"fiber", rep.grid.fiber}, {"closed", rep.grid.closed}}},
         {"beta", rep.beta.to_string()},
         {"theta", rep.theta},
         {"V1", to_json(rep.gen.V[0])},
         {"V2", to_json(rep.gen.V[1])}};
  if (!rep.levels.empty()) j["levels"] = rep.levels;
  return j;
}

inline CsvTable check_csv(const std::vector<CheckRow>& rows) {
  CsvTable t({"identity", "margin", "tested", "max_residual", "pass"});
  for (const auto& r : rows)
    t.add({r.identity, std::to_string(r.margin), std::to_string(r.tested), format_double(r.max_residual),
           pass_string(r.pass)});
  return t;
}

}  // namespace kmslab
