#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pacc/models/common.hpp"

namespace pacc::models {

/// How a feature is scaled inside the effectiveness model.
enum class FeatureRole { plain, qualitative, frequency };

constexpr std::string_view to_string(FeatureRole r) {
  switch (r) {
    case FeatureRole::plain: return "plain";
    case FeatureRole::qualitative: return "qualitative";
    case FeatureRole::frequency: return "frequency";
  }
  return "plain";
}

inline std::optional<FeatureRole> parse_feature_role(std::string_view s) {
  if (s == "plain") return FeatureRole::plain;
  if (s == "qualitative") return FeatureRole::qualitative;
  if (s == "frequency") return FeatureRole::frequency;
  return std::nullopt;
}

inline double logistic(double z) {
  // Clamped so the output stays strictly inside (0, 1).
  z = std::clamp(z, -30.0, 30.0);
  return 1.0 / (1.0 + std::exp(-z));
}

/// Logistic risk model for missing-trader cases. Qualitative features (flags)
/// are multiplied by `qualitative_weight`, frequency features (counts) by
/// `frequency_weight`, after standardization.
struct EffectivenessModel {
  std::vector<std::string> feature_list;
  std::vector<FeatureRole> roles;
  std::vector<Standardization> standardization;
  std::vector<double> weights;
  double intercept = 0.0;
  double qualitative_weight = 1.0;
  double frequency_weight = 1.0;

  double role_scale(FeatureRole r) const {
    switch (r) {
      case FeatureRole::qualitative: return qualitative_weight;
      case FeatureRole::frequency: return frequency_weight;
      default: return 1.0;
    }
  }

  /// Model input for raw feature values.
  std::vector<double> inputs(const std::vector<double>& raw) const {
    std::vector<double> x(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      x[i] = (raw[i] - standardization[i].mean) / standardization[i].stddev * role_scale(roles[i]);
    }
    return x;
  }

  double risk_from_inputs(const std::vector<double>& x) const {
    double z = intercept;
    for (std::size_t i = 0; i < x.size(); ++i) z += weights[i] * x[i];
    return logistic(z);
  }

  bool operator==(const EffectivenessModel&) const = default;
};

inline ModelValue effectiveness_risk(const EffectivenessModel& model, const TaxpayerCase& c) {
  std::string missing;
  auto raw = feature_vector(c, model.feature_list, &missing);
  if (!raw) return NotApplicable{"missing feature " + missing};
  return model.risk_from_inputs(model.inputs(*raw));
}

struct EffectivenessOptions {
  double learning_rate = 0.1;
  int epochs = 500;
  double qualitative_weight = 1.0;
  double frequency_weight = 1.0;
};

/// Full-batch gradient descent on the mean logistic loss from zero weights.
/// Labels come from audited outcomes; unlabeled or incomplete cases are skipped.
inline EffectivenessModel fit_effectiveness(const std::vector<const TaxpayerCase*>& training,
                                            const std::vector<std::string>& features,
                                            const std::vector<FeatureRole>& roles,
                                            const EffectivenessOptions& opt = {}) {
  if (features.size() != roles.size()) throw TrainingError("feature/role length mismatch");
  std::vector<std::vector<double>> raw;
  std::vector<double> y;
  for (const auto* c : training) {
    if (!c->outcome || !c->outcome->audited) continue;
    auto x = feature_vector(*c, features);
    if (!x) continue;
    raw.push_back(std::move(*x));
    y.push_back(c->outcome->fraud_found ? 1.0 : 0.0);
  }
  if (raw.empty()) throw TrainingError("no labeled cases for the effectiveness model");

  EffectivenessModel m;
  m.feature_list = features;
  m.roles = roles;
  m.qualitative_weight = opt.qualitative_weight;
  m.frequency_weight = opt.frequency_weight;
  const std::size_t n = raw.size();
  const std::size_t d = features.size();
  for (std::size_t f = 0; f < d; ++f) {
    double mean = 0.0;
    for (const auto& r : raw) mean += r[f];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const auto& r : raw) var += (r[f] - mean) * (r[f] - mean);
    double sd = std::sqrt(var / static_cast<double>(n));
    m.standardization.push_back({mean, sd > 0.0 ? sd : 1.0});
  }
  m.weights.assign(d, 0.0);

  std::vector<std::vector<double>> xs;
  xs.reserve(n);
  for (const auto& r : raw) xs.push_back(m.inputs(r));

  std::vector<double> grad(d);
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double err = m.risk_from_inputs(xs[i]) - y[i];
      for (std::size_t f = 0; f < d; ++f) grad[f] += err * xs[i][f];
      grad_b += err;
    }
    for (std::size_t f = 0; f < d; ++f) m.weights[f] -= opt.learning_rate * grad[f] / static_cast<double>(n);
    m.intercept -= opt.learning_rate * grad_b / static_cast<double>(n);
  }
  return m;
}

}  // namespace pacc::models
