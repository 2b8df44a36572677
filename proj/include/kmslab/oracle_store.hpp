#pragma once

// Versioned store of brute-force reference values. Records are append-only:
// writing an existing key is an error, and nothing is regenerated on read.

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "io.hpp"

namespace kmslab {

struct Provenance {
  std::string command;
  std::string date;
  std::string method;
};

struct OracleRecord {
  std::string scenario;
  Json parameters = Json::object();
  Json values = Json::array();
  Json extra = Json::object();
  Provenance provenance;
};

class OracleStore {
 public:
  static constexpr int version = 1;

  static OracleStore load(const std::filesystem::path& path) {
    OracleStore store;
    if (!std::filesystem::exists(path)) return store;
    std::ifstream f(path);
    Json j;
    try {
      j = Json::parse(f);
    } catch (const Json::exception& e) {
      fail(ErrorCode::config_invalid, "oracle store " + path.string() + ": " + e.what());
    }
    if (j.value("version", 0) != version) fail(ErrorCode::config_invalid, "oracle store version mismatch");
    for (const auto& [key, r] : j.at("records").items()) {
      OracleRecord rec;
      rec.scenario = r.at("scenario");
      rec.parameters = r.at("parameters");
      rec.values = r.at("values");
      rec.extra = r.value("extra", Json::object());
      const auto& p = r.at("provenance");
      rec.provenance = {p.at("command"), p.at("date"), p.at("method")};
      store.records_.emplace(key, std::move(rec));
    }
    return store;
  }

  void save(const std::filesystem::path& path) const { CsvTable::write_text(path, to_json().dump(2) + "\n"); }

  Json to_json() const {
    Json records = Json::object();
    for (const auto& [key, r] : records_)
      records[key] = {{"scenario", r.scenario},
                      {"parameters", r.parameters},
                      {"values", r.values},
                      {"extra", r.extra},
                      {"provenance",
                       {{"command", r.provenance.command}, {"date", r.provenance.date}, {"method", r.provenance.method}}}};
    return {{"version", version}, {"records", records}};
  }

  bool contains(const std::string& key) const { return records_.contains(key); }
  std::size_t size() const { return records_.size(); }

  const OracleRecord& at(const std::string& key) const {
    auto it = records_.find(key);
    if (it == records_.end()) fail(ErrorCode::config_invalid, "oracle key not found: " + key);
    return it->second;
  }

  const OracleRecord& record(const std::string& key, OracleRecord rec) {
    if (key.empty()) fail(ErrorCode::config_invalid, "empty oracle key");
    if (contains(key)) fail(ErrorCode::key_exists, key);
    if (!rec.values.is_array() || rec.values.empty()) fail(ErrorCode::config_invalid, "no values for " + key);
    return records_.emplace(key, std::move(rec)).first->second;
  }

 private:
  std::map<std::string, OracleRecord> records_;
};

inline std::string join_ints(const std::vector<std::int64_t>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

inline std::string koopman_key(const std::vector<std::int64_t>& heights, int K) {
  return "koopman-autocorrelation/heights=" + join_ints(heights) + "/K=" + std::to_string(K);
}

inline std::string purity_key(const std::vector<std::int64_t>& a, std::size_t fiber, std::int64_t steps) {
  return "purity-defect/staircase=" + join_ints(a) + "/N=" + std::to_string(fiber) + "/steps=" + std::to_string(steps);
}

}  // namespace kmslab
