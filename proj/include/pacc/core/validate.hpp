#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pacc/core/types.hpp"

namespace pacc {

struct Diagnostic {
  std::string path;  // e.g. "features.employee_count", "outcome"
  std::string message;

  bool operator==(const Diagnostic&) const = default;
};

namespace detail {
inline bool matches(FeatureType t, const FeatureValue& v) {
  switch (t) {
    case FeatureType::number: return std::holds_alternative<double>(v);
    case FeatureType::text: return std::holds_alternative<std::string>(v);
    case FeatureType::flag: return std::holds_alternative<bool>(v);
  }
  return false;
}

inline std::string_view value_type_name(const FeatureValue& v) {
  switch (v.index()) {
    case 0: return "missing";
    case 1: return "number";
    case 2: return "text";
    default: return "flag";
  }
}
}  // namespace detail

/// Checks one case against its invariants and the schema. Pure; an empty
/// result means the case is valid. `current_year` enables the
/// last-audited-year bound.
inline std::vector<Diagnostic> validate_case(const TaxpayerCase& c, const FeatureSchema& schema,
                                             std::optional<int> current_year = std::nullopt) {
  std::vector<Diagnostic> out;
  if (c.case_id.empty()) out.push_back({"case_id", "case_id must not be empty"});

  for (const auto& [name, value] : c.features) {
    auto it = schema.features.find(name);
    if (it == schema.features.end()) {
      out.push_back({"features." + name, "feature not in schema"});
      continue;
    }
    if (!is_missing(value) && !detail::matches(it->second.type, value)) {
      out.push_back({"features." + name, "expected " + std::string(to_string(it->second.type)) +
                                             ", got " + std::string(detail::value_type_name(value))});
    }
  }

  for (std::size_t i = 1; i < c.vat_returns.size(); ++i) {
    if (!(c.vat_returns[i - 1].period < c.vat_returns[i].period)) {
      out.push_back({"vat_returns[" + std::to_string(i) + "]", "periods must be strictly increasing"});
    }
  }

  if (c.last_audited_year && current_year && *c.last_audited_year > *current_year) {
    out.push_back({"last_audited_year", "audited year " + std::to_string(*c.last_audited_year) +
                                            " lies after corpus year " + std::to_string(*current_year)});
  }

  if (c.outcome) {
    const auto& o = *c.outcome;
    if (o.back_tax < Money{}) out.push_back({"outcome.back_tax_eur", "back tax must be >= 0"});
    if (o.fraud_found && !o.audited) out.push_back({"outcome", "fraud_found requires audited"});
    if (o.back_tax > Money{} && !o.fraud_found) {
      out.push_back({"outcome", "back tax > 0 requires fraud_found"});
    }
  }
  return out;
}

/// Corpus-level checks: per-case diagnostics (path prefixed by case id) plus
/// case-id uniqueness.
inline std::vector<Diagnostic> validate_corpus(const std::vector<TaxpayerCase>& cases,
                                               const FeatureSchema& schema,
                                               std::optional<int> current_year = std::nullopt) {
  std::vector<Diagnostic> out;
  std::set<std::string> seen;
  for (const auto& c : cases) {
    if (!seen.insert(c.case_id).second) {
      out.push_back({c.case_id + ".case_id", "duplicate case_id"});
    }
    for (auto d : validate_case(c, schema, current_year)) {
      d.path = c.case_id + "." + d.path;
      out.push_back(std::move(d));
    }
  }
  return out;
}

}  // namespace pacc
