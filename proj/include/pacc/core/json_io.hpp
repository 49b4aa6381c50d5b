#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pacc/core/types.hpp"

namespace pacc {

/// Insertion-ordered JSON so serialized output is byte-stable.
using Json = nlohmann::ordered_json;

namespace detail {
inline void reject_unknown_keys(const Json& j, const std::set<std::string>& allowed,
                                const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw DataError(where + ": unknown field '" + key + "'");
  }
}

inline const Json& require(const Json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw DataError(where + ": missing field '" + key + "'");
  return *it;
}

template <typename T>
T get_as(const Json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(where + ": " + e.what());
  }
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Feature values
// ---------------------------------------------------------------------------

inline Json feature_to_json(const FeatureValue& v) {
  return std::visit(
      [](const auto& x) -> Json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Missing>) {
          return nullptr;
        } else {
          return x;
        }
      },
      v);
}

inline FeatureValue feature_from_json(const Json& j, const std::string& where) {
  if (j.is_null()) return Missing{};
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw DataError(where + ": feature value must be number, string, bool or null");
}

// ---------------------------------------------------------------------------
// Cases
// ---------------------------------------------------------------------------

inline Json case_to_json(const TaxpayerCase& c) {
  Json j;
  j["case_id"] = c.case_id;
  j["kind"] = std::string(to_string(c.kind));
  Json features = Json::object();
  for (const auto& [name, value] : c.features) features[name] = feature_to_json(value);
  j["features"] = std::move(features);
  j["persons"] = c.persons;
  j["address_id"] = c.address_id;
  Json returns = Json::array();
  for (const auto& r : c.vat_returns) {
    returns.push_back(Json{{"period", to_string(r.period)}, {"filed", r.filed}});
  }
  j["vat_returns"] = std::move(returns);
  j["last_audited_year"] = c.last_audited_year ? Json(*c.last_audited_year) : Json(nullptr);
  j["registered_date"] = to_string(c.registered_date);
  j["trading_partners"] = c.trading_partners;
  if (c.outcome) {
    j["outcome"] = Json{{"audited", c.outcome->audited},
                        {"fraud_found", c.outcome->fraud_found},
                        {"back_tax_eur", c.outcome->back_tax.eur()},
                        {"available_at", c.outcome->available_at}};
  } else {
    j["outcome"] = nullptr;
  }
  return j;
}

/// Strict reader: unknown fields and malformed values raise DataError.
inline TaxpayerCase case_from_json(const Json& j) {
  using detail::get_as;
  using detail::require;
  if (!j.is_object()) throw DataError("case: expected JSON object");
  std::string where = "case";
  if (auto it = j.find("case_id"); it != j.end() && it->is_string()) {
    where = "case " + it->get<std::string>();
  }
  detail::reject_unknown_keys(j,
                              {"case_id", "kind", "features", "persons", "address_id", "vat_returns",
                               "last_audited_year", "registered_date", "trading_partners", "outcome"},
                              where);
  TaxpayerCase c;
  c.case_id = get_as<std::string>(require(j, "case_id", where), where + ".case_id");
  auto kind = parse_case_kind(get_as<std::string>(require(j, "kind", where), where + ".kind"));
  if (!kind) throw DataError(where + ".kind: unknown case kind");
  c.kind = *kind;

  const Json& features = require(j, "features", where);
  if (!features.is_object()) throw DataError(where + ".features: expected object");
  for (const auto& [name, value] : features.items()) {
    c.features[name] = feature_from_json(value, where + ".features." + name);
  }
  c.persons = get_as<std::vector<std::string>>(require(j, "persons", where), where + ".persons");
  c.address_id = get_as<std::string>(require(j, "address_id", where), where + ".address_id");

  const Json& returns = require(j, "vat_returns", where);
  if (!returns.is_array()) throw DataError(where + ".vat_returns: expected array");
  for (const auto& r : returns) {
    if (!r.is_object()) throw DataError(where + ".vat_returns: expected objects");
    detail::reject_unknown_keys(r, {"period", "filed"}, where + ".vat_returns");
    auto period = parse_year_month(get_as<std::string>(require(r, "period", where), where + ".period"));
    if (!period) throw DataError(where + ".vat_returns: bad period (want YYYY-MM)");
    c.vat_returns.push_back({*period, get_as<bool>(require(r, "filed", where), where + ".filed")});
  }

  const Json& audited_year = require(j, "last_audited_year", where);
  if (!audited_year.is_null()) c.last_audited_year = get_as<int>(audited_year, where + ".last_audited_year");

  auto date = parse_date(get_as<std::string>(require(j, "registered_date", where), where + ".registered_date"));
  if (!date) throw DataError(where + ".registered_date: bad date (want YYYY-MM-DD)");
  c.registered_date = *date;

  if (auto it = j.find("trading_partners"); it != j.end()) {
    c.trading_partners = get_as<std::vector<std::string>>(*it, where + ".trading_partners");
  }

  if (auto it = j.find("outcome"); it != j.end() && !it->is_null()) {
    const Json& o = *it;
    if (!o.is_object()) throw DataError(where + ".outcome: expected object");
    detail::reject_unknown_keys(o, {"audited", "fraud_found", "back_tax_eur", "available_at"},
                                where + ".outcome");
    AuditOutcome out;
    out.audited = get_as<bool>(require(o, "audited", where), where + ".outcome.audited");
    out.fraud_found = get_as<bool>(require(o, "fraud_found", where), where + ".outcome.fraud_found");
    out.back_tax = Money::from_eur(get_as<double>(require(o, "back_tax_eur", where), where + ".outcome.back_tax_eur"));
    out.available_at = get_as<int>(require(o, "available_at", where), where + ".outcome.available_at");
    c.outcome = out;
  }
  return c;
}

/// Reads JSON Lines; blank lines are skipped. Errors carry the 1-based line.
inline std::vector<TaxpayerCase> read_cases_jsonl(std::istream& in) {
  std::vector<TaxpayerCase> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(case_from_json(Json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline void write_cases_jsonl(std::ostream& out, const std::vector<TaxpayerCase>& cases) {
  for (const auto& c : cases) out << case_to_json(c).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

inline FeatureSchema schema_from_json(const Json& j) {
  FeatureSchema schema;
  const Json& features = detail::require(j, "features", "schema");
  for (const auto& [name, spec] : features.items()) {
    auto type = parse_feature_type(detail::get_as<std::string>(detail::require(spec, "type", name), name));
    if (!type) throw DataError("schema." + name + ": unknown type");
    FeatureSpec fs;
    fs.type = *type;
    fs.unit = spec.value("unit", "");
    fs.description = spec.value("description", "");
    schema.features[name] = fs;
  }
  return schema;
}

inline Json schema_to_json(const FeatureSchema& schema) {
  Json features = Json::object();
  for (const auto& [name, spec] : schema.features) {
    features[name] = Json{{"type", std::string(to_string(spec.type))},
                          {"unit", spec.unit},
                          {"description", spec.description}};
  }
  return Json{{"features", std::move(features)}};
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline FeatureSchema load_schema(const std::string& path) { return schema_from_json(read_json_file(path)); }

}  // namespace pacc
