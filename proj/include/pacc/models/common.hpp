#pragma once

#include <string>
#include <variant>
#include <vector>

#include "pacc/core/types.hpp"

namespace pacc::models {

/// A model output that could not be produced for a case, with the reason.
struct NotApplicable {
  std::string reason;
  bool operator==(const NotApplicable&) const = default;
};

/// Model output: a value or NOT_APPLICABLE. Never coerced to zero.
using ModelValue = std::variant<double, NotApplicable>;

inline bool applicable(const ModelValue& v) { return std::holds_alternative<double>(v); }

/// Thrown for invalid training input (too few cases, unlabeled data, ...).
class TrainingError : public Error {
 public:
  using Error::Error;
};

struct Standardization {
  double mean = 0.0;
  double stddev = 1.0;
  bool operator==(const Standardization&) const = default;
};

/// Numeric view of a feature; flags read as 0/1. nullopt when missing or text.
inline std::optional<double> numeric_feature(const TaxpayerCase& c, const std::string& name) {
  const FeatureValue& v = c.feature(name);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* b = std::get_if<bool>(&v)) return *b ? 1.0 : 0.0;
  return std::nullopt;
}

/// Raw feature vector in `features` order, or nullopt with the first missing name.
inline std::optional<std::vector<double>> feature_vector(const TaxpayerCase& c,
                                                         const std::vector<std::string>& features,
                                                         std::string* missing = nullptr) {
  std::vector<double> x;
  x.reserve(features.size());
  for (const auto& f : features) {
    auto v = numeric_feature(c, f);
    if (!v) {
      if (missing) *missing = f;
      return std::nullopt;
    }
    x.push_back(*v);
  }
  return x;
}

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace pacc::models
