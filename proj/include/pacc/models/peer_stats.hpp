#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "pacc/models/common.hpp"
#include "pacc/models/kmeans.hpp"

namespace pacc::models {

/// Consistency constant turning a MAD into a normal-equivalent spread.
inline constexpr double kMadScale = 1.4826;

struct PeerFeatureStats {
  double median = 0.0;
  double mad = 0.0;
  int count = 0;

  bool degenerate() const { return mad == 0.0; }
  bool operator==(const PeerFeatureStats&) const = default;
};

/// Robust per-cluster location and spread for each numeric feature.
struct PeerStats {
  std::vector<std::string> features;
  std::map<int, std::map<std::string, PeerFeatureStats>> clusters;

  bool operator==(const PeerStats&) const = default;
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty set");
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double hi = *mid;
  if (v.size() % 2 == 1) return hi;
  double lo = *std::max_element(v.begin(), mid);
  return lo + (hi - lo) / 2.0;
}

/// Groups cases by their cluster and records median and MAD per feature.
/// Cases lacking clustering features are skipped; missing values of a single
/// feature only drop that case from that feature's statistics.
inline PeerStats fit_peer_stats(const ClusterModel& model, const std::vector<const TaxpayerCase*>& cases,
                                const std::vector<std::string>& features) {
  std::map<int, std::map<std::string, std::vector<double>>> values;
  for (const auto* c : cases) {
    auto x = feature_vector(*c, model.feature_list);
    if (!x) continue;
    int cluster = nearest_centroid(model.centroids, model.standardize(*x));
    for (const auto& f : features) {
      if (auto v = c->number(f)) values[cluster][f].push_back(*v);
    }
  }
  PeerStats stats;
  stats.features = features;
  for (auto& [cluster, per_feature] : values) {
    for (auto& [f, vs] : per_feature) {
      PeerFeatureStats s;
      s.count = static_cast<int>(vs.size());
      s.median = median_of(vs);
      std::vector<double> dev;
      dev.reserve(vs.size());
      for (double v : vs) dev.push_back(std::fabs(v - s.median));
      s.mad = median_of(std::move(dev));
      stats.clusters[cluster][f] = s;
    }
  }
  return stats;
}

namespace detail {
inline const PeerFeatureStats* peer_lookup(const PeerStats& stats, const ClusterModel& model,
                                           const TaxpayerCase& c, const std::string& feature,
                                           std::string& reason) {
  if (std::find(stats.features.begin(), stats.features.end(), feature) == stats.features.end()) {
    throw std::invalid_argument("no peer statistics for feature '" + feature + "'");
  }
  std::string missing;
  auto x = feature_vector(c, model.feature_list, &missing);
  if (!x) {
    reason = "missing feature " + missing + " for peer group";
    return nullptr;
  }
  int cluster = nearest_centroid(model.centroids, model.standardize(*x));
  auto it = stats.clusters.find(cluster);
  if (it == stats.clusters.end()) {
    reason = "no peer statistics for cluster " + std::to_string(cluster);
    return nullptr;
  }
  auto fit = it->second.find(feature);
  if (fit == it->second.end()) {
    reason = "no peer values of " + feature + " in cluster " + std::to_string(cluster);
    return nullptr;
  }
  return &fit->second;
}
}  // namespace detail

/// (value - median) / (1.4826 * MAD) within the case's peer cluster.
/// Throws std::invalid_argument for a feature without statistics.
inline ModelValue peer_zscore(const PeerStats& stats, const ClusterModel& model, const TaxpayerCase& c,
                              const std::string& feature) {
  std::string reason;
  const auto* s = detail::peer_lookup(stats, model, c, feature, reason);
  if (!s) return NotApplicable{reason};
  auto v = c.number(feature);
  if (!v) return NotApplicable{"missing feature " + feature};
  if (s->degenerate()) return NotApplicable{"degenerate peer spread for " + feature + " (MAD = 0)"};
  return (*v - s->median) / (kMadScale * s->mad);
}

/// value / peer median.
inline ModelValue peer_ratio(const PeerStats& stats, const ClusterModel& model, const TaxpayerCase& c,
                             const std::string& feature) {
  std::string reason;
  const auto* s = detail::peer_lookup(stats, model, c, feature, reason);
  if (!s) return NotApplicable{reason};
  auto v = c.number(feature);
  if (!v) return NotApplicable{"missing feature " + feature};
  if (s->median == 0.0) return NotApplicable{"peer median of " + feature + " is zero"};
  return *v / s->median;
}

}  // namespace pacc::models
