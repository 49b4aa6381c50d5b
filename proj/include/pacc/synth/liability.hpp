#pragma once

#include <map>
#include <string>
#include <vector>

#include "pacc/engine/score.hpp"
#include "pacc/models/trained.hpp"

namespace pacc::synth {

/// Estimated fraud probability for a case: the model matching its kind, or
/// score / 999 when the model cannot produce a value.
inline double fraud_probability(const models::TrainedModels& m, const TaxpayerCase& c, FraudScore score) {
  models::ModelValue v = c.kind == CaseKind::company_audit ? models::predict_company_fraud(m, c)
                                                           : models::effectiveness_risk(m, c);
  if (models::applicable(v)) return std::get<double>(v);
  return score.value() / 999.0;
}

/// Estimated tax liability = fraud probability x reported tax base. Zero when
/// the tax base is missing.
inline Money estimated_liability(const models::TrainedModels& m, const TaxpayerCase& c, FraudScore score) {
  auto base = c.number("reported_tax_base_eur");
  if (!base) return Money{};
  return Money::from_eur(fraud_probability(m, c, score) * *base);
}

inline std::map<std::string, Money> estimate_liabilities(const models::TrainedModels& m,
                                                         const std::vector<TaxpayerCase>& cases,
                                                         const std::vector<engine::ScoreReport>& reports) {
  std::map<std::string, const TaxpayerCase*> by_id;
  for (const auto& c : cases) by_id[c.case_id] = &c;
  std::map<std::string, Money> out;
  for (const auto& r : reports) {
    auto it = by_id.find(r.case_id);
    if (it != by_id.end()) out[r.case_id] = estimated_liability(m, *it->second, r.score);
  }
  return out;
}

}  // namespace pacc::synth
