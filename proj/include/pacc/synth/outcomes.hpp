#pragma once

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "pacc/core/random.hpp"
#include "pacc/core/types.hpp"
#include "pacc/synth/truth.hpp"

namespace pacc::synth {

struct OutcomeOptions {
  int delay_months = 6;
  int jitter_months = 2;  // available_at varies by +-min(jitter, delay)
  double miss_rate = 0.1;
  double back_tax_rate = 0.25;  // share of the reported tax base recovered
  std::uint64_t seed = 1;
};

/// Records an audit of each case in `audited` at month `clock`. The finding
/// follows the ground truth except that a fraud is missed with `miss_rate`;
/// it becomes visible `delay` (+- jitter) months later. Unknown ids are
/// ignored.
inline void attach_outcomes(std::vector<TaxpayerCase>& cases, const GroundTruth& truth,
                            const std::vector<std::string>& audited, int clock, const OutcomeOptions& opt = {},
                            YearMonth start = {2024, 1}) {
  if (opt.delay_months < 0) throw std::invalid_argument("delay_months must be >= 0");
  if (opt.jitter_months < 0) throw std::invalid_argument("jitter_months must be >= 0");
  std::set<std::string> ids(audited.begin(), audited.end());
  Rng rng(opt.seed ^ (static_cast<std::uint64_t>(clock) * 0x9E3779B97F4A7C15ULL));
  int spread = std::min(opt.jitter_months, opt.delay_months);
  int year = start.plus(clock).year;
  // Draws happen in case-id order so the result does not depend on the
  // order of `audited`.
  std::vector<TaxpayerCase*> targets;
  for (auto& c : cases) {
    if (ids.count(c.case_id)) targets.push_back(&c);
  }
  std::sort(targets.begin(), targets.end(), [](const auto* a, const auto* b) { return a->case_id < b->case_id; });
  for (auto* c : targets) {
    auto it = truth.cases.find(c->case_id);
    bool is_fraud = it != truth.cases.end() && it->second.is_fraud;
    bool missed = rng.bernoulli(opt.miss_rate);
    int shift = spread > 0 ? rng.between(-spread, spread) : 0;
    AuditOutcome o;
    o.audited = true;
    o.fraud_found = is_fraud && !missed;
    if (o.fraud_found) {
      o.back_tax = Money::from_eur(opt.back_tax_rate * c->number("reported_tax_base_eur").value_or(0.0));
    }
    o.available_at = std::max(clock, clock + opt.delay_months + shift);
    c->outcome = o;
    c->last_audited_year = std::max(c->registered_date.year, year - 1);
  }
}

}  // namespace pacc::synth
