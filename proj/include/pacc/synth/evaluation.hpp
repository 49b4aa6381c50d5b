#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pacc/core/json_io.hpp"
#include "pacc/engine/score.hpp"
#include "pacc/selection/strategies.hpp"

namespace pacc::synth {

using selection::SelectionDecision;
using selection::Strategy;

struct StrategyStats {
  Strategy strategy = Strategy::TIME;
  int selected = 0;
  int matured = 0;
  int frauds = 0;
  double success_rate = 0.0;  // frauds / matured, 0 when nothing matured
  bool immature = true;       // nothing matured yet
  int overlap = 0;            // picks scoring at or above the risk cutoff

  bool operator==(const StrategyStats&) const = default;
};

/// Success rates per strategy, computed only from matured audit outcomes.
struct EvaluationReport {
  int clock = 0;
  int delay_months = 6;
  std::vector<StrategyStats> strategies;  // plan order, strategies with picks
  int selected = 0;
  int matured = 0;
  std::optional<int> risk_cutoff;
  std::vector<std::string> caveats;

  double maturation() const { return selected == 0 ? 0.0 : static_cast<double>(matured) / selected; }
  const StrategyStats* find(Strategy s) const {
    for (const auto& st : strategies) {
      if (st.strategy == s) return &st;
    }
    return nullptr;
  }
  double rate(Strategy s) const {
    const auto* st = find(s);
    return st ? st->success_rate : 0.0;
  }
};

/// Evaluates decisions against the audit outcomes visible at `clock`.
/// `reports`, when given, supplies scores for the overlap counts.
inline EvaluationReport success_rate(const std::vector<SelectionDecision>& decisions,
                                     const std::vector<TaxpayerCase>& cases, int clock, int delay_months = 6,
                                     const std::vector<engine::ScoreReport>* reports = nullptr) {
  std::map<std::string, const TaxpayerCase*> by_id;
  for (const auto& c : cases) by_id[c.case_id] = &c;
  std::map<std::string, int> score_of;
  if (reports) {
    for (const auto& r : *reports) score_of[r.case_id] = r.score.value();
  }

  EvaluationReport rep;
  rep.clock = clock;
  rep.delay_months = delay_months;
  for (const auto& d : decisions) {
    if (d.strategy == Strategy::RISK && d.score) {
      rep.risk_cutoff = rep.risk_cutoff ? std::min(*rep.risk_cutoff, d.score->value()) : d.score->value();
    }
  }

  std::map<Strategy, StrategyStats> stats;
  for (const auto& d : decisions) {
    auto& st = stats[d.strategy];
    st.strategy = d.strategy;
    ++st.selected;
    ++rep.selected;
    auto it = by_id.find(d.case_id);
    if (it != by_id.end()) {
      const auto& o = it->second->outcome;
      if (o && o->audited && o->available_at <= clock) {
        ++st.matured;
        ++rep.matured;
        if (o->fraud_found) ++st.frauds;
      }
    }
    if (rep.risk_cutoff) {
      auto sc = score_of.find(d.case_id);
      int score = sc != score_of.end() ? sc->second : (d.score ? d.score->value() : -1);
      if (score >= *rep.risk_cutoff) ++st.overlap;
    }
  }
  for (Strategy s : selection::kStrategyOrder) {
    auto it = stats.find(s);
    if (it == stats.end()) continue;
    auto& st = it->second;
    st.immature = st.matured == 0;
    st.success_rate = st.matured == 0 ? 0.0 : static_cast<double>(st.frauds) / st.matured;
    if (st.immature) {
      rep.caveats.push_back(std::string(selection::to_string(s)) + ": no matured outcomes yet, rate reported as 0");
    }
    rep.strategies.push_back(st);
  }
  if (rep.selected > 0 && rep.maturation() < 0.5) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "only %.0f%% of selected cases have matured outcomes (delay about %d months); rates are preliminary",
                  rep.maturation() * 100.0, delay_months);
    rep.caveats.insert(rep.caveats.begin(), buf);
  }
  return rep;
}

inline Json evaluation_to_json(const EvaluationReport& r) {
  Json rows = Json::array();
  for (const auto& s : r.strategies) {
    rows.push_back({{"strategy", std::string(selection::to_string(s.strategy))},
                    {"selected", s.selected},
                    {"matured", s.matured},
                    {"frauds", s.frauds},
                    {"success_rate", s.success_rate},
                    {"immature", s.immature},
                    {"overlap_with_risk_cutoff", s.overlap}});
  }
  Json j{{"clock", r.clock},       {"delay_months", r.delay_months}, {"selected", r.selected},
         {"matured", r.matured},   {"maturation", r.maturation()},   {"strategies", rows},
         {"caveats", r.caveats}};
  j["risk_cutoff"] = r.risk_cutoff ? Json(*r.risk_cutoff) : Json(nullptr);
  return j;
}

inline std::string evaluation_to_text(const EvaluationReport& r) {
  std::ostringstream out;
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-15s %8s %8s %7s %8s %8s\n", "strategy", "selected", "matured", "frauds", "rate",
                "overlap");
  out << buf;
  for (const auto& s : r.strategies) {
    std::snprintf(buf, sizeof buf, "%-15s %8d %8d %7d %8.3f %8d\n", std::string(selection::to_string(s.strategy)).c_str(),
                  s.selected, s.matured, s.frauds, s.success_rate, s.overlap);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "maturation %.1f%% at month %d\n", r.maturation() * 100.0, r.clock);
  out << buf;
  for (const auto& c : r.caveats) out << "caveat: " << c << "\n";
  return out.str();
}

struct ComparisonRow {
  Strategy strategy = Strategy::TIME;
  int runs = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double mean_selected = 0.0;
  double mean_matured = 0.0;
  double mean_overlap = 0.0;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;

  const ComparisonRow* find(Strategy s) const {
    for (const auto& r : rows) {
      if (r.strategy == s) return &r;
    }
    return nullptr;
  }
};

/// Mean, min and max success rate per strategy across runs. Strategies are
/// reported side by side with their overlap counts rather than attributed.
inline ComparisonTable compare_strategies(const std::vector<EvaluationReport>& runs) {
  if (runs.empty()) throw std::invalid_argument("compare_strategies needs at least one run");
  ComparisonTable t;
  for (Strategy s : selection::kStrategyOrder) {
    ComparisonRow row;
    row.strategy = s;
    for (const auto& r : runs) {
      const auto* st = r.find(s);
      if (!st) continue;
      if (row.runs == 0) {
        row.min = row.max = st->success_rate;
      } else {
        row.min = std::min(row.min, st->success_rate);
        row.max = std::max(row.max, st->success_rate);
      }
      ++row.runs;
      row.mean += st->success_rate;
      row.mean_selected += st->selected;
      row.mean_matured += st->matured;
      row.mean_overlap += st->overlap;
    }
    if (row.runs == 0) continue;
    row.mean /= row.runs;
    row.mean_selected /= row.runs;
    row.mean_matured /= row.runs;
    row.mean_overlap /= row.runs;
    t.rows.push_back(row);
  }
  return t;
}

inline Json comparison_to_json(const ComparisonTable& t) {
  Json rows = Json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"strategy", std::string(selection::to_string(r.strategy))},
                    {"runs", r.runs},
                    {"mean", r.mean},
                    {"min", r.min},
                    {"max", r.max},
                    {"mean_selected", r.mean_selected},
                    {"mean_matured", r.mean_matured},
                    {"mean_overlap", r.mean_overlap}});
  }
  return Json{{"strategies", rows}};
}

inline std::string comparison_to_text(const ComparisonTable& t) {
  std::ostringstream out;
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-15s %5s %7s %7s %7s %9s %9s\n", "strategy", "runs", "mean", "min", "max",
                "selected", "matured");
  out << buf;
  for (const auto& r : t.rows) {
    std::snprintf(buf, sizeof buf, "%-15s %5d %7.3f %7.3f %7.3f %9.1f %9.1f\n",
                  std::string(selection::to_string(r.strategy)).c_str(), r.runs, r.mean, r.min, r.max,
                  r.mean_selected, r.mean_matured);
    out << buf;
  }
  return out.str();
}

}  // namespace pacc::synth
