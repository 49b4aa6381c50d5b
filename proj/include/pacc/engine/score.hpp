#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "pacc/dsl/lint.hpp"
#include "pacc/engine/evaluate.hpp"

namespace pacc::engine {

/// Thrown for a kind mismatch or an unknown deactivated rule name.
class ScoringError : public Error {
 public:
  using Error::Error;
};

/// Noisy-OR over rule contributions and synergy bonuses, scaled to 0..999
/// with half-up rounding. Throws std::invalid_argument for values outside
/// (0, 1].
inline FraudScore combine_contributions(const std::vector<double>& contributions,
                                        const std::vector<double>& bonuses = {}) {
  double keep = 1.0;
  auto fold = [&](double c) {
    if (!(c > 0.0 && c <= 1.0)) throw std::invalid_argument("contribution outside (0, 1]: " + std::to_string(c));
    keep *= 1.0 - c;
  };
  for (double c : contributions) fold(c);
  for (double b : bonuses) fold(b);
  double s = 1.0 - keep;
  // The epsilon absorbs representation error just below an exact .5.
  double scaled = std::floor(999.0 * s + 0.5 + 1e-9);
  return FraudScore(static_cast<int>(std::clamp(scaled, 0.0, 999.0)));
}

struct SynergyApplied {
  std::vector<std::string> rule_names;
  double bonus = 0.0;
  bool operator==(const SynergyApplied&) const = default;
};

struct NotApplicableRule {
  std::string rule_name;
  std::string reason;
  bool operator==(const NotApplicableRule&) const = default;
};

struct ScoreReport {
  std::string case_id;
  CaseKind kind = CaseKind::company_audit;
  FraudScore score;
  std::vector<TriggeredRule> triggered;
  std::vector<NotApplicableRule> not_applicable;
  std::vector<std::string> deactivated;
  std::vector<SynergyApplied> synergy_bonuses;
  std::string ruleset_digest;
  int scored_at = 0;

  /// Score recomputed from the listed contributions and bonuses.
  FraudScore recombined() const {
    std::vector<double> c, b;
    for (const auto& t : triggered) c.push_back(t.contribution);
    for (const auto& s : synergy_bonuses) b.push_back(s.bonus);
    return combine_contributions(c, b);
  }

  bool operator==(const ScoreReport&) const = default;
};

/// Rejects deactivation names that the set does not define.
inline void check_deactivated(const dsl::RuleSet& rs, const std::set<std::string>& deactivated) {
  for (const auto& name : deactivated) {
    if (!rs.find(name)) throw ScoringError("cannot deactivate unknown rule \"" + name + "\"");
  }
}

namespace detail {
inline ScoreReport score_checked(const dsl::RuleSet& rs, const CaseContext& ctx, const std::string& digest) {
  const TaxpayerCase& c = *ctx.taxpayer;
  if (rs.kind && *rs.kind != c.kind) {
    throw ScoringError("case " + c.case_id + " is " + std::string(to_string(c.kind)) + ", rule set is " +
                       std::string(to_string(*rs.kind)));
  }
  ScoreReport report;
  report.case_id = c.case_id;
  report.kind = c.kind;
  report.ruleset_digest = digest;
  report.scored_at = ctx.shared->clock;
  const auto& off = ctx.shared->deactivated;

  std::set<std::string> fired;
  std::vector<double> contributions;
  for (const auto& rule : rs.rules) {
    if (off.count(rule.name)) {
      report.deactivated.push_back(rule.name);
      continue;
    }
    auto ev = evaluate_rule(rule, ctx);
    switch (ev.status) {
      case RuleStatus::triggered:
        fired.insert(rule.name);
        contributions.push_back(ev.triggered->contribution);
        report.triggered.push_back(std::move(*ev.triggered));
        break;
      case RuleStatus::not_applicable: report.not_applicable.push_back({rule.name, ev.reason}); break;
      case RuleStatus::not_triggered: break;
    }
  }
  std::vector<double> bonuses;
  for (const auto& syn : rs.synergies) {
    bool all = std::all_of(syn.rule_names.begin(), syn.rule_names.end(),
                           [&](const std::string& n) { return fired.count(n) != 0; });
    if (all) {
      report.synergy_bonuses.push_back({syn.rule_names, syn.bonus});
      bonuses.push_back(syn.bonus);
    }
  }
  report.score = combine_contributions(contributions, bonuses);
  return report;
}
}  // namespace detail

/// Scores one case: evaluates every active rule, applies combos whose rules
/// all triggered, and combines the result.
inline ScoreReport score_case(const dsl::RuleSet& rs, const CaseContext& ctx) {
  check_deactivated(rs, ctx.shared->deactivated);
  return detail::score_checked(rs, ctx, dsl::ruleset_digest(rs));
}

struct BatchError {
  std::size_t index = 0;
  std::string case_id;
  std::string message;
};

struct BatchResult {
  std::vector<ScoreReport> reports;  // successful cases, input order
  std::vector<BatchError> errors;    // failed cases, input order
};

/// Scores `cases` against one shared context, fanning out over `workers`
/// threads. A failing case is reported in `errors` and never aborts the
/// batch. Throws ScoringError only for an invalid deactivation set.
inline BatchResult score_batch(const dsl::RuleSet& rs, const std::vector<const TaxpayerCase*>& cases,
                               const SharedContext& shared, unsigned workers = 1) {
  check_deactivated(rs, shared.deactivated);
  const std::string digest = dsl::ruleset_digest(rs);
  std::vector<std::optional<ScoreReport>> slots(cases.size());
  std::vector<std::string> failures(cases.size());

  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        CaseContext ctx{cases[i], &shared};
        slots[i] = detail::score_checked(rs, ctx, digest);
      } catch (const std::exception& e) {
        failures[i] = e.what();
        if (failures[i].empty()) failures[i] = "scoring failed";
      }
    }
  };

  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(1, cases.size()))));
  if (workers == 1) {
    run(0, cases.size());
  } else {
    std::vector<std::thread> pool;
    std::size_t chunk = (cases.size() + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      std::size_t b = w * chunk, e = std::min(cases.size(), b + chunk);
      if (b >= e) break;
      pool.emplace_back(run, b, e);
    }
    for (auto& t : pool) t.join();
  }

  BatchResult out;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (slots[i]) {
      out.reports.push_back(std::move(*slots[i]));
    } else {
      out.errors.push_back({i, cases[i]->case_id, failures[i]});
    }
  }
  return out;
}

/// Takes one snapshot of the hub and holds it for the whole batch; source
/// mutations are refused until the batch returns.
inline BatchResult score_batch(const dsl::RuleSet& rs, const std::vector<const TaxpayerCase*>& cases,
                               sources::SourceHub& hub, const models::TrainedModels& models,
                               std::set<std::string> deactivated, YearMonth now, int clock, unsigned workers = 1) {
  auto guard = hub.begin_batch();
  auto snap = hub.snapshot();
  SharedContext shared{&models, snap.get(), std::move(deactivated), now, clock};
  return score_batch(rs, cases, shared, workers);
}

/// Case ids by descending score, ties by ascending id, at most `top_k`.
inline std::vector<std::string> rank_cases(const std::vector<ScoreReport>& reports, std::size_t top_k) {
  std::vector<const ScoreReport*> order;
  order.reserve(reports.size());
  for (const auto& r : reports) order.push_back(&r);
  auto cmp = [](const ScoreReport* a, const ScoreReport* b) {
    if (a->score != b->score) return a->score > b->score;
    return a->case_id < b->case_id;
  };
  std::size_t k = std::min(top_k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), cmp);
  std::vector<std::string> ids;
  ids.reserve(k);
  for (std::size_t i = 0; i < k; ++i) ids.push_back(order[i]->case_id);
  return ids;
}

}  // namespace pacc::engine
