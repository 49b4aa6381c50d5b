#pragma once

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>

#include "pacc/core/json_io.hpp"

namespace pacc::synth {

enum class FraudPattern { NONE, MT_RING, LOW_PERSONNEL, UNDERREPORTED_TAX };

constexpr std::string_view to_string(FraudPattern p) {
  switch (p) {
    case FraudPattern::NONE: return "NONE";
    case FraudPattern::MT_RING: return "MT_RING";
    case FraudPattern::LOW_PERSONNEL: return "LOW_PERSONNEL";
    case FraudPattern::UNDERREPORTED_TAX: return "UNDERREPORTED_TAX";
  }
  return "NONE";
}

inline std::optional<FraudPattern> parse_pattern(std::string_view s) {
  for (auto p : {FraudPattern::NONE, FraudPattern::MT_RING, FraudPattern::LOW_PERSONNEL,
                 FraudPattern::UNDERREPORTED_TAX}) {
    if (to_string(p) == s) return p;
  }
  return std::nullopt;
}

struct TruthEntry {
  bool is_fraud = false;
  FraudPattern pattern = FraudPattern::NONE;
  int archetype = -1;  // company archetype, -1 for missing-trader cases
  int ring = -1;       // ring index for MT_RING cases

  bool operator==(const TruthEntry&) const = default;
};

/// Generator oracle: the fraud label of every case and the validity of
/// every foreign trading-partner UID. Only the generator, outcome
/// attachment and the simulation's UID oracle read it.
struct GroundTruth {
  std::map<std::string, TruthEntry> cases;
  std::map<std::string, bool> uid_valid;

  std::size_t fraud_count() const {
    std::size_t n = 0;
    for (const auto& [_, e] : cases) n += e.is_fraud ? 1 : 0;
    return n;
  }

  bool operator==(const GroundTruth&) const = default;
};

inline void write_truth_jsonl(std::ostream& out, const GroundTruth& t) {
  for (const auto& [id, e] : t.cases) {
    Json j{{"case_id", id}, {"is_fraud", e.is_fraud}, {"pattern", std::string(to_string(e.pattern))}};
    if (e.archetype >= 0) j["archetype"] = e.archetype;
    if (e.ring >= 0) j["ring"] = e.ring;
    out << j.dump() << '\n';
  }
  for (const auto& [uid, valid] : t.uid_valid) out << Json{{"uid", uid}, {"valid", valid}}.dump() << '\n';
}

inline GroundTruth read_truth_jsonl(std::istream& in) {
  GroundTruth t;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      Json j = Json::parse(line);
      if (j.contains("uid")) {
        t.uid_valid[j.at("uid").get<std::string>()] = j.at("valid").get<bool>();
        continue;
      }
      TruthEntry e;
      e.is_fraud = j.at("is_fraud").get<bool>();
      auto p = parse_pattern(j.at("pattern").get<std::string>());
      if (!p) throw DataError("unknown pattern");
      e.pattern = *p;
      if (j.contains("archetype")) e.archetype = j.at("archetype").get<int>();
      if (j.contains("ring")) e.ring = j.at("ring").get<int>();
      t.cases[j.at("case_id").get<std::string>()] = e;
    } catch (const std::exception& e) {
      throw DataError("truth line " + std::to_string(n) + ": " + e.what());
    }
  }
  return t;
}

}  // namespace pacc::synth
