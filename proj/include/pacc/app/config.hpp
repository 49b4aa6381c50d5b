#pragma once

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pacc/core/json_io.hpp"
#include "pacc/dsl/ast.hpp"

namespace pacc::app {

inline constexpr const char* kConfigEnv = "PACC_SELECT_CONFIG";

/// How simulated audits resolve. Mirrors the outcome options of the
/// synthetic world without depending on it.
struct AuditSimulation {
  int delay_months = 6;
  int jitter_months = 2;
  double miss_rate = 0.1;
  double back_tax_rate = 0.25;

  bool operator==(const AuditSimulation&) const = default;
};

struct AppConfig {
  std::string workspace = "pacc-work";
  std::string schema;  // empty: the schema shipped with the build
  std::string cases;
  std::string watchlist;
  std::string registry;
  std::string truth;    // synthetic ground truth, needed only to simulate
  std::string signals;  // optional JSONL of individual-selection signals
  std::vector<std::string> rules;
  std::string models;  // empty: <workspace>/models.json
  std::string plan;
  int uid_quota = 100;
  int uid_days_per_month = 30;
  int port = 8080;
  std::uint64_t seed = 1;
  int cadence = 2;  // scoring batches per simulated month
  int workers = 1;
  dsl::TierDefaults tier_defaults;
  AuditSimulation audits;

  bool operator==(const AppConfig&) const = default;

  /// Throws DataError naming the first bad field.
  void validate() const {
    if (cadence < 1) throw DataError("config.cadence must be >= 1");
    if (port < 1 || port > 65535) throw DataError("config.port must lie in 1..65535");
    if (uid_quota < 1) throw DataError("config.uid_quota must be >= 1");
    if (uid_days_per_month < 0) throw DataError("config.uid_days_per_month must be >= 0");
    if (workers < 1) throw DataError("config.workers must be >= 1");
    for (double c : {tier_defaults.low, tier_defaults.med, tier_defaults.high}) {
      if (!(c > 0.0 && c <= 1.0)) throw DataError("config.tier_defaults values must lie in (0, 1]");
    }
    if (audits.delay_months < 0 || audits.jitter_months < 0) throw DataError("config.audits delays must be >= 0");
    if (!(audits.miss_rate >= 0.0 && audits.miss_rate <= 1.0)) throw DataError("config.audits.miss_rate must lie in [0, 1]");
    if (audits.back_tax_rate < 0.0) throw DataError("config.audits.back_tax_rate must be >= 0");
  }

  std::string schema_path() const {
#ifdef PACC_DATA_DIR
    if (schema.empty()) return std::string(PACC_DATA_DIR) + "/schema.json";
#endif
    return schema;
  }
  std::string models_path() const { return models.empty() ? file("models.json") : models; }
  std::string file(const std::string& name) const { return (std::filesystem::path(workspace) / name).string(); }
};

namespace detail {

inline std::string resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty() || std::filesystem::path(p).is_absolute()) return p;
  return (base / p).lexically_normal().string();
}

}  // namespace detail

/// Parses a config object. Relative paths are taken against `base`.
inline AppConfig config_from_json(const Json& j, const std::filesystem::path& base = {}) {
  if (!j.is_object()) throw DataError("config: expected JSON object");
  pacc::detail::reject_unknown_keys(
      j,
      {"workspace", "schema", "cases", "watchlist", "registry", "truth", "signals", "rules", "models", "plan",
       "uid_quota", "uid_days_per_month", "port", "seed", "cadence", "workers", "tier_defaults", "audits"},
      "config");
  AppConfig c;
  try {
    auto path = [&](const char* key, std::string& out) {
      if (j.contains(key)) out = detail::resolve(base, j.at(key).get<std::string>());
    };
    path("workspace", c.workspace);
    path("schema", c.schema);
    path("cases", c.cases);
    path("watchlist", c.watchlist);
    path("registry", c.registry);
    path("truth", c.truth);
    path("signals", c.signals);
    path("models", c.models);
    path("plan", c.plan);
    if (j.contains("rules")) {
      for (const auto& r : j.at("rules")) c.rules.push_back(detail::resolve(base, r.get<std::string>()));
    }
    if (j.contains("uid_quota")) c.uid_quota = j.at("uid_quota").get<int>();
    if (j.contains("uid_days_per_month")) c.uid_days_per_month = j.at("uid_days_per_month").get<int>();
    if (j.contains("port")) c.port = j.at("port").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("cadence")) c.cadence = j.at("cadence").get<int>();
    if (j.contains("workers")) c.workers = j.at("workers").get<int>();
    if (j.contains("tier_defaults")) {
      const auto& t = j.at("tier_defaults");
      pacc::detail::reject_unknown_keys(t, {"LOW", "MED", "HIGH"}, "config.tier_defaults");
      if (t.contains("LOW")) c.tier_defaults.low = t.at("LOW").get<double>();
      if (t.contains("MED")) c.tier_defaults.med = t.at("MED").get<double>();
      if (t.contains("HIGH")) c.tier_defaults.high = t.at("HIGH").get<double>();
    }
    if (j.contains("audits")) {
      const auto& a = j.at("audits");
      pacc::detail::reject_unknown_keys(a, {"delay_months", "jitter_months", "miss_rate", "back_tax_rate"},
                                        "config.audits");
      if (a.contains("delay_months")) c.audits.delay_months = a.at("delay_months").get<int>();
      if (a.contains("jitter_months")) c.audits.jitter_months = a.at("jitter_months").get<int>();
      if (a.contains("miss_rate")) c.audits.miss_rate = a.at("miss_rate").get<double>();
      if (a.contains("back_tax_rate")) c.audits.back_tax_rate = a.at("back_tax_rate").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline Json config_to_json(const AppConfig& c) {
  Json j;
  j["workspace"] = c.workspace;
  j["schema"] = c.schema;
  j["cases"] = c.cases;
  j["watchlist"] = c.watchlist;
  j["registry"] = c.registry;
  j["truth"] = c.truth;
  j["signals"] = c.signals;
  j["rules"] = c.rules;
  j["models"] = c.models;
  j["plan"] = c.plan;
  j["uid_quota"] = c.uid_quota;
  j["uid_days_per_month"] = c.uid_days_per_month;
  j["port"] = c.port;
  j["seed"] = c.seed;
  j["cadence"] = c.cadence;
  j["workers"] = c.workers;
  j["tier_defaults"] = Json{{"LOW", c.tier_defaults.low}, {"MED", c.tier_defaults.med}, {"HIGH", c.tier_defaults.high}};
  j["audits"] = Json{{"delay_months", c.audits.delay_months},
                     {"jitter_months", c.audits.jitter_months},
                     {"miss_rate", c.audits.miss_rate},
                     {"back_tax_rate", c.audits.back_tax_rate}};
  return j;
}

inline AppConfig load_config(const std::string& path) {
  auto base = std::filesystem::absolute(path).parent_path();
  return config_from_json(read_json_file(path), base);
}

/// Config named by `explicit_path`, else by PACC_SELECT_CONFIG, else defaults.
inline AppConfig resolve_config(const std::optional<std::string>& explicit_path) {
  if (explicit_path && !explicit_path->empty()) return load_config(*explicit_path);
  if (const char* env = std::getenv(kConfigEnv); env && *env) return load_config(env);
  return AppConfig{};
}

}  // namespace pacc::app
