#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pacc/core/random.hpp"
#include "pacc/engine/score.hpp"
#include "pacc/sources/hub.hpp"

namespace pacc::selection {

enum class Strategy { TIME, GROUP_RANDOM, INDIVIDUAL, NEW_ENTRY, RISK, RANDOM_CONTROL };

/// Composition order of the plan.
inline constexpr std::array<Strategy, 6> kStrategyOrder{Strategy::TIME,      Strategy::GROUP_RANDOM,
                                                         Strategy::INDIVIDUAL, Strategy::NEW_ENTRY,
                                                         Strategy::RISK,      Strategy::RANDOM_CONTROL};

constexpr std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::TIME: return "TIME";
    case Strategy::GROUP_RANDOM: return "GROUP_RANDOM";
    case Strategy::INDIVIDUAL: return "INDIVIDUAL";
    case Strategy::NEW_ENTRY: return "NEW_ENTRY";
    case Strategy::RISK: return "RISK";
    case Strategy::RANDOM_CONTROL: return "RANDOM_CONTROL";
  }
  return "?";
}

inline std::optional<Strategy> parse_strategy(std::string_view s) {
  for (auto st : kStrategyOrder) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

struct SelectionDecision {
  std::string case_id;
  Strategy strategy = Strategy::TIME;
  std::string rationale;
  std::optional<FraudScore> score;
  std::optional<Money> estimated_liability;

  bool operator==(const SelectionDecision&) const = default;
};

enum class SignalKind { INCONSISTENCY, RESTRUCTURING, COMPLAINT, MANDATED };

constexpr std::string_view to_string(SignalKind k) {
  switch (k) {
    case SignalKind::INCONSISTENCY: return "INCONSISTENCY";
    case SignalKind::RESTRUCTURING: return "RESTRUCTURING";
    case SignalKind::COMPLAINT: return "COMPLAINT";
    case SignalKind::MANDATED: return "MANDATED";
  }
  return "?";
}

inline std::optional<SignalKind> parse_signal_kind(std::string_view s) {
  for (auto k : {SignalKind::INCONSISTENCY, SignalKind::RESTRUCTURING, SignalKind::COMPLAINT, SignalKind::MANDATED}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

/// A warning signal raised against one case.
struct Signal {
  std::string case_id;
  SignalKind kind = SignalKind::COMPLAINT;
  std::string note;
};

using Exclusions = std::set<std::string>;

namespace detail {
inline bool excluded(const Exclusions* ex, const std::string& id) { return ex && ex->count(id); }

inline void sort_by_id(std::vector<SelectionDecision>& d) {
  std::sort(d.begin(), d.end(), [](const auto& a, const auto& b) { return a.case_id < b.case_id; });
}

/// Uniform sample of `n` positions from `candidates` (partial Fisher-Yates).
inline std::vector<const TaxpayerCase*> sample(std::vector<const TaxpayerCase*> candidates, std::size_t n,
                                               std::uint64_t seed) {
  std::sort(candidates.begin(), candidates.end(),
            [](const auto* a, const auto* b) { return a->case_id < b->case_id; });
  n = std::min(n, candidates.size());
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.index(candidates.size() - i));
    std::swap(candidates[i], candidates[j]);
  }
  candidates.resize(n);
  return candidates;
}
}  // namespace detail

/// The `n` cases audited longest ago; never-audited cases come first, ties
/// by case id.
inline std::vector<SelectionDecision> select_by_time(const std::vector<TaxpayerCase>& cases, std::size_t n,
                                                     const Exclusions* exclude = nullptr) {
  std::vector<const TaxpayerCase*> pool;
  for (const auto& c : cases) {
    if (!detail::excluded(exclude, c.case_id)) pool.push_back(&c);
  }
  auto key = [](const TaxpayerCase* c) {
    return std::pair{c->last_audited_year ? *c->last_audited_year : std::numeric_limits<int>::min(), c->case_id};
  };
  std::sort(pool.begin(), pool.end(), [&](const auto* a, const auto* b) { return key(a) < key(b); });
  pool.resize(std::min(n, pool.size()));
  std::vector<SelectionDecision> out;
  for (const auto* c : pool) {
    std::string why = c->last_audited_year ? "last audited period ended " + std::to_string(*c->last_audited_year)
                                           : "never audited";
    out.push_back({c->case_id, Strategy::TIME, why, std::nullopt, std::nullopt});
  }
  detail::sort_by_id(out);
  return out;
}

/// Uniform random sample without replacement, fixed by `seed`.
inline std::vector<SelectionDecision> select_group_random(const std::vector<TaxpayerCase>& cases, std::size_t n,
                                                          std::uint64_t seed, const Exclusions* exclude = nullptr,
                                                          Strategy tag = Strategy::GROUP_RANDOM) {
  std::vector<const TaxpayerCase*> pool;
  for (const auto& c : cases) {
    if (!detail::excluded(exclude, c.case_id)) pool.push_back(&c);
  }
  std::vector<SelectionDecision> out;
  for (const auto* c : detail::sample(std::move(pool), n, seed)) {
    std::string why = tag == Strategy::RANDOM_CONTROL ? "random control sample (seed " + std::to_string(seed) + ")"
                                                      : "random group sample (seed " + std::to_string(seed) + ")";
    out.push_back({c->case_id, tag, why, std::nullopt, std::nullopt});
  }
  detail::sort_by_id(out);
  return out;
}

/// One decision per flagged case; signals for unknown cases are ignored.
inline std::vector<SelectionDecision> select_individual(const std::vector<TaxpayerCase>& cases,
                                                        const std::vector<Signal>& signals,
                                                        const Exclusions* exclude = nullptr) {
  std::set<std::string> known;
  for (const auto& c : cases) known.insert(c.case_id);
  std::map<std::string, std::string> rationale;
  for (const auto& s : signals) {
    if (!known.count(s.case_id) || detail::excluded(exclude, s.case_id)) continue;
    std::string& r = rationale[s.case_id];
    if (!r.empty()) r += "; ";
    r += std::string(to_string(s.kind));
    if (!s.note.empty()) r += ": " + s.note;
  }
  std::vector<SelectionDecision> out;
  for (auto& [id, why] : rationale) out.push_back({id, Strategy::INDIVIDUAL, why, std::nullopt, std::nullopt});
  return out;
}

/// Missing-trader cases with no VAT return for more than 24 months.
inline std::vector<SelectionDecision> select_new_entries(const std::vector<TaxpayerCase>& cases, YearMonth now,
                                                         const Exclusions* exclude = nullptr) {
  std::vector<SelectionDecision> out;
  for (const auto& c : cases) {
    if (c.kind != CaseKind::missing_trader || detail::excluded(exclude, c.case_id)) continue;
    auto gap = sources::filing_gap_months(c, now);
    if (!models::applicable(gap)) continue;
    int months = static_cast<int>(std::get<double>(gap));
    if (months > 24) {
      bool filed = std::any_of(c.vat_returns.begin(), c.vat_returns.end(), [](const auto& v) { return v.filed; });
      std::string why = filed ? "no VAT return for " + std::to_string(months) + " months"
                              : "never filed a VAT return, registered " + std::to_string(months) + " months ago";
      out.push_back({c.case_id, Strategy::NEW_ENTRY, why, std::nullopt, std::nullopt});
    }
  }
  detail::sort_by_id(out);
  return out;
}

/// Highest-scoring cases whose estimated liability reaches `threshold`.
/// Cases without an estimate are not eligible.
inline std::vector<SelectionDecision> select_by_risk(const std::vector<engine::ScoreReport>& reports,
                                                     const std::map<std::string, Money>& liabilities,
                                                     Money threshold, std::size_t n,
                                                     const Exclusions* exclude = nullptr) {
  std::vector<engine::ScoreReport> eligible;
  std::map<std::string, const engine::ScoreReport*> by_id;
  for (const auto& r : reports) {
    if (detail::excluded(exclude, r.case_id)) continue;
    auto it = liabilities.find(r.case_id);
    if (it == liabilities.end() || it->second < threshold) continue;
    eligible.push_back(r);
  }
  for (const auto& r : eligible) by_id[r.case_id] = &r;
  std::vector<SelectionDecision> out;
  for (const auto& id : engine::rank_cases(eligible, n)) {
    const auto* r = by_id.at(id);
    Money liab = liabilities.at(id);
    std::string why = "fraud score " + std::to_string(r->score.value()) + ", estimated liability EUR " +
                      liab.to_string() + " >= EUR " + threshold.to_string();
    out.push_back({id, Strategy::RISK, why, r->score, liab});
  }
  detail::sort_by_id(out);
  return out;
}

/// Random control sample, disjoint from `exclude` (the risk picks).
inline std::vector<SelectionDecision> select_random_control(const std::vector<TaxpayerCase>& cases, std::size_t n,
                                                            std::uint64_t seed, const Exclusions* exclude = nullptr) {
  return select_group_random(cases, n, seed, exclude, Strategy::RANDOM_CONTROL);
}

}  // namespace pacc::selection
