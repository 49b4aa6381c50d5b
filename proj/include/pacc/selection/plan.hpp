#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "pacc/core/json_io.hpp"
#include "pacc/selection/strategies.hpp"

namespace pacc::selection {

/// Per-strategy quotas, the sampling seed and the liability threshold.
struct SelectionPlan {
  std::map<Strategy, int> counts;
  std::uint64_t seed = 1;
  Money liability_threshold = Money::from_cents(1'000'000);  // EUR 10,000

  int count(Strategy s) const {
    auto it = counts.find(s);
    return it == counts.end() ? 0 : it->second;
  }

  /// Throws std::invalid_argument for negative counts or a non-positive threshold.
  void validate() const {
    for (const auto& [s, n] : counts) {
      if (n < 0) throw std::invalid_argument("negative quota for " + std::string(to_string(s)));
    }
    if (liability_threshold <= Money{}) throw std::invalid_argument("liability threshold must be > 0");
  }
};

struct PlanInputs {
  const std::vector<TaxpayerCase>* cases = nullptr;
  const std::vector<engine::ScoreReport>* reports = nullptr;
  const std::map<std::string, Money>* liabilities = nullptr;
  const std::vector<Signal>* signals = nullptr;
  YearMonth now{2024, 1};
};

struct PlanResult {
  std::vector<SelectionDecision> decisions;
  std::vector<std::string> warnings;
};

/// Seed used by the random control sample, kept apart from the group sample.
inline std::uint64_t control_seed(std::uint64_t seed) { return seed ^ 0x9E3779B97F4A7C15ULL; }

/// Runs the strategies in fixed order, each skipping cases already chosen.
/// Output is grouped by strategy, then sorted by case id.
inline PlanResult compose_plan(const SelectionPlan& plan, const PlanInputs& in) {
  plan.validate();
  static const std::vector<TaxpayerCase> kNoCases;
  static const std::vector<engine::ScoreReport> kNoReports;
  static const std::map<std::string, Money> kNoLiabilities;
  static const std::vector<Signal> kNoSignals;
  const auto& cases = in.cases ? *in.cases : kNoCases;
  const auto& reports = in.reports ? *in.reports : kNoReports;
  const auto& liabilities = in.liabilities ? *in.liabilities : kNoLiabilities;
  const auto& signals = in.signals ? *in.signals : kNoSignals;

  PlanResult result;
  Exclusions chosen;
  for (Strategy s : kStrategyOrder) {
    auto quota = static_cast<std::size_t>(plan.count(s));
    std::vector<SelectionDecision> picked;
    switch (s) {
      case Strategy::TIME: picked = select_by_time(cases, quota, &chosen); break;
      case Strategy::GROUP_RANDOM: picked = select_group_random(cases, quota, plan.seed, &chosen); break;
      case Strategy::INDIVIDUAL: picked = select_individual(cases, signals, &chosen); break;
      case Strategy::NEW_ENTRY: picked = select_new_entries(cases, in.now, &chosen); break;
      case Strategy::RISK:
        picked = select_by_risk(reports, liabilities, plan.liability_threshold, quota, &chosen);
        break;
      case Strategy::RANDOM_CONTROL:
        picked = select_random_control(cases, quota, control_seed(plan.seed), &chosen);
        break;
    }
    if (s == Strategy::INDIVIDUAL || s == Strategy::NEW_ENTRY) {
      // Eligibility lists: the quota caps how many of them are taken.
      if (picked.size() > quota) {
        result.warnings.push_back(std::string(to_string(s)) + ": " + std::to_string(picked.size()) +
                                  " eligible cases, quota " + std::to_string(quota));
        picked.resize(quota);
      }
    } else if (picked.size() < quota) {
      result.warnings.push_back(std::string(to_string(s)) + ": quota " + std::to_string(quota) +
                                " truncated to " + std::to_string(picked.size()) + " available cases");
    }
    for (auto& d : picked) {
      chosen.insert(d.case_id);
      result.decisions.push_back(std::move(d));
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// plan.json and selection.jsonl
// ---------------------------------------------------------------------------

inline Json plan_to_json(const SelectionPlan& p) {
  Json counts = Json::object();
  for (Strategy s : kStrategyOrder) counts[std::string(to_string(s))] = p.count(s);
  return Json{{"counts", counts}, {"seed", p.seed}, {"liability_threshold_eur", p.liability_threshold.eur()}};
}

inline SelectionPlan plan_from_json(const Json& j) {
  try {
    SelectionPlan p;
    for (const auto& [name, n] : j.at("counts").items()) {
      auto s = parse_strategy(name);
      if (!s) throw DataError("plan: unknown strategy " + name);
      p.counts[*s] = n.get<int>();
    }
    if (j.contains("seed")) p.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("liability_threshold_eur")) {
      p.liability_threshold = Money::from_eur(j.at("liability_threshold_eur").get<double>());
    }
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("plan: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("plan: ") + e.what());
  }
}

inline Json decision_to_json(const SelectionDecision& d) {
  Json j{{"case_id", d.case_id}, {"strategy", std::string(to_string(d.strategy))}, {"rationale", d.rationale}};
  if (d.score) j["score"] = d.score->value();
  if (d.estimated_liability) j["estimated_liability_eur"] = d.estimated_liability->eur();
  return j;
}

inline SelectionDecision decision_from_json(const Json& j) {
  try {
    SelectionDecision d;
    d.case_id = j.at("case_id").get<std::string>();
    auto s = parse_strategy(j.at("strategy").get<std::string>());
    if (!s) throw DataError("selection: unknown strategy");
    d.strategy = *s;
    d.rationale = j.at("rationale").get<std::string>();
    if (j.contains("score")) d.score = FraudScore(j.at("score").get<int>());
    if (j.contains("estimated_liability_eur")) {
      d.estimated_liability = Money::from_eur(j.at("estimated_liability_eur").get<double>());
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("selection: ") + e.what());
  }
}

inline void write_decisions_jsonl(std::ostream& out, const std::vector<SelectionDecision>& ds) {
  for (const auto& d : ds) out << decision_to_json(d).dump() << '\n';
}

inline std::vector<SelectionDecision> read_decisions_jsonl(std::istream& in) {
  std::vector<SelectionDecision> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(decision_from_json(Json::parse(line)));
    } catch (const std::exception& e) {
      throw DataError("line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace pacc::selection
