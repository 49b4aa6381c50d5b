#pragma once

#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pacc/core/json_io.hpp"
#include "pacc/engine/score.hpp"

namespace pacc::engine {

inline constexpr const char* kLimitedExplanationNotice =
    "model-derived indication \xE2\x80\x94 limited explanation available";
inline constexpr const char* kRegularAuditNotice =
    "This score is an indication only. Conduct a regular audit of the received case; the listed rules do not "
    "replace the auditor's own examination.";

inline Json report_to_json(const ScoreReport& r) {
  Json j;
  j["case_id"] = r.case_id;
  j["kind"] = std::string(to_string(r.kind));
  j["score"] = r.score.value();
  Json trig = Json::array();
  for (const auto& t : r.triggered) {
    Json inputs = Json::object();
    for (const auto& [k, v] : t.inputs_snapshot) inputs[k] = v;
    trig.push_back({{"rule", t.rule_name},
                    {"tier", std::string(to_string(t.tier))},
                    {"contribution", t.contribution},
                    {"source", t.source == dsl::RuleSource::model_backed ? "model" : "expert"},
                    {"explanation", t.explanation},
                    {"inputs", inputs}});
  }
  j["triggered"] = trig;
  Json na = Json::array();
  for (const auto& n : r.not_applicable) na.push_back({{"rule", n.rule_name}, {"reason", n.reason}});
  j["not_applicable"] = na;
  j["deactivated"] = r.deactivated;
  Json syn = Json::array();
  for (const auto& s : r.synergy_bonuses) syn.push_back({{"rules", s.rule_names}, {"bonus", s.bonus}});
  j["synergy_bonuses"] = syn;
  j["ruleset_digest"] = r.ruleset_digest;
  j["scored_at"] = r.scored_at;
  return j;
}

inline ScoreReport report_from_json(const Json& j) {
  try {
    ScoreReport r;
    r.case_id = j.at("case_id").get<std::string>();
    auto kind = parse_case_kind(j.at("kind").get<std::string>());
    if (!kind) throw DataError("report: unknown kind");
    r.kind = *kind;
    r.score = FraudScore(j.at("score").get<int>());
    for (const auto& t : j.at("triggered")) {
      TriggeredRule tr;
      tr.rule_name = t.at("rule").get<std::string>();
      auto tier = parse_tier(t.at("tier").get<std::string>());
      if (!tier) throw DataError("report: unknown tier");
      tr.tier = *tier;
      tr.contribution = t.at("contribution").get<double>();
      tr.source = t.at("source").get<std::string>() == "model" ? dsl::RuleSource::model_backed
                                                               : dsl::RuleSource::expert;
      tr.explanation = t.at("explanation").get<std::string>();
      for (const auto& [k, v] : t.at("inputs").items()) tr.inputs_snapshot[k] = v.get<std::string>();
      r.triggered.push_back(std::move(tr));
    }
    for (const auto& n : j.at("not_applicable")) {
      r.not_applicable.push_back({n.at("rule").get<std::string>(), n.at("reason").get<std::string>()});
    }
    r.deactivated = j.at("deactivated").get<std::vector<std::string>>();
    for (const auto& s : j.at("synergy_bonuses")) {
      r.synergy_bonuses.push_back({s.at("rules").get<std::vector<std::string>>(), s.at("bonus").get<double>()});
    }
    r.ruleset_digest = j.at("ruleset_digest").get<std::string>();
    r.scored_at = j.at("scored_at").get<int>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("report: ") + e.what());
  }
}

inline void write_reports_jsonl(std::ostream& out, const std::vector<ScoreReport>& reports) {
  for (const auto& r : reports) out << report_to_json(r).dump() << '\n';
}

inline std::vector<ScoreReport> read_reports_jsonl(std::istream& in) {
  std::vector<ScoreReport> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(report_from_json(Json::parse(line)));
    } catch (const std::exception& e) {
      throw DataError("line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

/// Plain-text explanation document for auditors.
inline std::string render_explanations(const ScoreReport& r) {
  std::ostringstream out;
  out << "Case " << r.case_id << " (" << to_string(r.kind) << ")\n";
  out << "Fraud score: " << r.score.value() << " / 999\n";
  if (!r.ruleset_digest.empty()) out << "Rule base: " << r.ruleset_digest.substr(0, 16) << "\n";
  out << "\n";
  if (r.triggered.empty()) {
    out << "No rule triggered.\n\n";
  } else {
    out << "Triggered rules:\n";
    for (const auto& t : r.triggered) {
      out << "\n[" << to_string(t.tier) << "] " << t.rule_name << "\n";
      if (!t.explanation.empty()) {
        out << "  " << t.explanation << "\n";
      } else {
        out << "  " << kLimitedExplanationNotice << "\n";
      }
      out << "  contribution: " << dsl::format_number(t.contribution) << "\n";
      if (!t.inputs_snapshot.empty()) {
        out << "  inputs:";
        for (const auto& [k, v] : t.inputs_snapshot) out << " " << k << "=" << v;
        out << "\n";
      }
    }
    out << "\n";
  }
  for (const auto& s : r.synergy_bonuses) {
    out << "Combination bonus " << dsl::format_number(s.bonus) << " for:";
    for (const auto& n : s.rule_names) out << " " << n;
    out << "\n";
  }
  if (!r.not_applicable.empty()) {
    out << "Not applicable:\n";
    for (const auto& n : r.not_applicable) out << "  " << n.rule_name << ": " << n.reason << "\n";
  }
  if (!r.deactivated.empty()) {
    out << "Deactivated:";
    for (const auto& d : r.deactivated) out << " " << d;
    out << "\n";
  }
  if (!r.synergy_bonuses.empty() || !r.not_applicable.empty() || !r.deactivated.empty()) out << "\n";
  out << "Notice: " << kRegularAuditNotice << "\n";
  return out.str();
}

}  // namespace pacc::engine
