#pragma once

// The simulation driver: the only app code that reads the synthetic ground
// truth. It answers UID validations and resolves audits from it.

#include <fstream>
#include <string>
#include <vector>

#include "pacc/app/workspace.hpp"
#include "pacc/synth/outcomes.hpp"
#include "pacc/synth/truth.hpp"

namespace pacc::app {

inline synth::GroundTruth load_truth(const AppConfig& cfg) {
  if (cfg.truth.empty()) throw DataError("config.truth is not set; simulation needs the generator's truth file");
  std::ifstream in(cfg.truth);
  if (!in) throw DataError("cannot open " + cfg.truth);
  return synth::read_truth_jsonl(in);
}

inline synth::OutcomeOptions outcome_options(const AppConfig& cfg) {
  synth::OutcomeOptions o;
  o.delay_months = cfg.audits.delay_months;
  o.jitter_months = cfg.audits.jitter_months;
  o.miss_rate = cfg.audits.miss_rate;
  o.back_tax_rate = cfg.audits.back_tax_rate;
  o.seed = cfg.seed;
  return o;
}

/// Queues a UID check for every trading partner, routed by the partner's
/// registry member state ("XX" when unregistered) and prioritised by the
/// case's stored score. Returns the number of new checks.
inline int enqueue_uid_checks(Workspace& ws) {
  auto snap = ws.hub().snapshot();
  int added = 0;
  for (const auto& c : ws.corpus().cases) {
    const auto* r = ws.report_for(c.case_id);
    int priority = r ? r->score.value() : 0;
    for (const auto& p : c.trading_partners) {
      const auto* e = snap->registry.find(p);
      added += ws.hub().uid_client().enqueue(e ? e->member_state : "XX", p, priority) ? 1 : 0;
    }
  }
  return added;
}

/// Runs `days` validation days answered from the truth. Unknown UIDs count
/// as valid. Returns the number of checks performed.
inline int run_uid_days(Workspace& ws, const synth::GroundTruth& truth, int days) {
  int done = 0;
  for (int d = 0; d < days; ++d) {
    done += static_cast<int>(ws.hub()
                                 .run_validation_day([&](const std::string& uid) {
                                   auto it = truth.uid_valid.find(uid);
                                   return it == truth.uid_valid.end() || it->second;
                                 })
                                 .size());
  }
  return done;
}

/// Opens audits on `ids` at the current clock; their findings become
/// visible after the configured delay.
inline void start_audits(Workspace& ws, const synth::GroundTruth& truth, const std::vector<std::string>& ids) {
  synth::attach_outcomes(ws.corpus().cases, truth, ids, ws.clock(), outcome_options(ws.config()), ws.corpus().start);
  ws.record_audits(ids);
  ws.save_outcomes();
}

struct MonthSummary {
  int clock = 0;
  YearMonth month;
  std::vector<std::string> digests;
  int uid_checks = 0;
  std::size_t uid_pending = 0;
  int matured = 0;      // outcomes that became visible this month
  int audits_open = 0;  // outcomes still in the future

  std::string to_line() const {
    std::string d;
    for (const auto& x : digests) d += (d.empty() ? "" : ",") + x.substr(0, 12);
    return "clock=" + std::to_string(clock) + " month=" + to_string(month) + " event=summary batches=" +
           std::to_string(digests.size()) + " digests=" + d + " uid_checks=" + std::to_string(uid_checks) +
           " uid_pending=" + std::to_string(uid_pending) + " matured=" + std::to_string(matured) +
           " audits_open=" + std::to_string(audits_open);
  }
};

/// Advances the clock one month. The month's UID validation days are split
/// evenly around `cadence` scoring batches; each batch is logged with its
/// digest and a summary line closes the month.
inline MonthSummary simulate_month(Workspace& ws, const synth::GroundTruth& truth) {
  const auto& cfg = ws.config();
  ws.advance_clock();
  MonthSummary s;
  s.clock = ws.clock();
  s.month = ws.now();
  enqueue_uid_checks(ws);
  int days = cfg.uid_days_per_month;
  for (int b = 0; b < cfg.cadence; ++b) {
    int span = days * (b + 1) / cfg.cadence - days * b / cfg.cadence;
    s.uid_checks += run_uid_days(ws, truth, span);
    auto run = ws.score_all(static_cast<unsigned>(cfg.workers));
    s.digests.push_back(run.digest);
    ws.commit_batch(std::move(run));
  }
  s.uid_pending = ws.hub().uid_client().pending();
  for (const auto& c : ws.corpus().cases) {
    if (!c.outcome) continue;
    if (c.outcome->available_at == s.clock) ++s.matured;
    if (c.outcome->available_at > s.clock) ++s.audits_open;
  }
  ws.save_state();
  ws.append_log(s.to_line());
  return s;
}

}  // namespace pacc::app
