#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pacc/core/random.hpp"
#include "pacc/models/common.hpp"

namespace pacc::models {

struct ClusterModel {
  std::vector<std::string> feature_list;
  std::vector<Standardization> standardization;
  std::vector<std::vector<double>> centroids;  // k rows, standardized space

  int k() const { return static_cast<int>(centroids.size()); }

  std::vector<double> standardize(const std::vector<double>& raw) const {
    std::vector<double> z(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      z[i] = (raw[i] - standardization[i].mean) / standardization[i].stddev;
    }
    return z;
  }

  bool operator==(const ClusterModel&) const = default;
};

struct KMeansResult {
  std::vector<std::vector<double>> centroids;
  std::vector<int> assignment;
  double wcss = 0.0;
  int iterations = 0;
  std::vector<double> wcss_trace;  // initial value, then one entry per Lloyd update
};

/// Index of the nearest centroid; ties go to the lowest index.
inline int nearest_centroid(const std::vector<std::vector<double>>& centroids, const std::vector<double>& x) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centroids.size(); ++j) {
    double d = squared_distance(centroids[j], x);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

inline double within_cluster_ss(const std::vector<std::vector<double>>& points,
                                const std::vector<std::vector<double>>& centroids,
                                const std::vector<int>& assignment) {
  double s = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) s += squared_distance(points[i], centroids[assignment[i]]);
  return s;
}

/// k-means++ seeding.
inline std::vector<std::vector<double>> kmeans_plus_plus(const std::vector<std::vector<double>>& points, int k,
                                                         Rng& rng) {
  std::vector<std::vector<double>> centers;
  centers.push_back(points[rng.index(points.size())]);
  std::vector<double> d2(points.size(), std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      d2[i] = std::min(d2[i], squared_distance(points[i], centers.back()));
      total += d2[i];
    }
    std::size_t chosen = 0;
    if (total <= 0.0) {
      chosen = rng.index(points.size());
    } else {
      double target = rng.uniform() * total;
      double acc = 0.0;
      chosen = points.size() - 1;
      for (std::size_t i = 0; i < points.size(); ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    }
    centers.push_back(points[chosen]);
  }
  return centers;
}

/// Lloyd's algorithm from k-means++ seeds. Stops when assignments are stable
/// or after `max_iterations` updates. Empty clusters keep their centroid.
inline KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k, Rng& rng,
                           int max_iterations = 100) {
  KMeansResult res;
  res.centroids = kmeans_plus_plus(points, k, rng);
  const std::size_t dims = points.front().size();
  res.assignment.assign(points.size(), -1);
  bool first = true;
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      int a = nearest_centroid(res.centroids, points[i]);
      if (a != res.assignment[i]) {
        res.assignment[i] = a;
        changed = true;
      }
    }
    if (first) {
      res.wcss_trace.push_back(within_cluster_ss(points, res.centroids, res.assignment));
      first = false;
    } else if (!changed) {
      break;
    }
    std::vector<std::vector<double>> sums(k, std::vector<double>(dims, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      auto& s = sums[res.assignment[i]];
      for (std::size_t d = 0; d < dims; ++d) s[d] += points[i][d];
      ++counts[res.assignment[i]];
    }
    for (int j = 0; j < k; ++j) {
      if (counts[j] == 0) continue;
      for (std::size_t d = 0; d < dims; ++d) res.centroids[j][d] = sums[j][d] / static_cast<double>(counts[j]);
    }
    ++res.iterations;
    res.wcss_trace.push_back(within_cluster_ss(points, res.centroids, res.assignment));
  }
  res.wcss = within_cluster_ss(points, res.centroids, res.assignment);
  return res;
}

/// Mean silhouette of an assignment. Points in singleton clusters score 0.
inline double mean_silhouette(const std::vector<std::vector<double>>& points, const std::vector<int>& assignment,
                              int k) {
  const std::size_t n = points.size();
  if (n < 2) return 0.0;
  std::vector<std::size_t> sizes(k, 0);
  for (int a : assignment) ++sizes[a];
  double total = 0.0;
  std::vector<double> dist_sum(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(dist_sum.begin(), dist_sum.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      dist_sum[assignment[j]] += std::sqrt(squared_distance(points[i], points[j]));
    }
    int own = assignment[i];
    if (sizes[own] <= 1) continue;
    double a = dist_sum[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == own || sizes[c] == 0) continue;
      b = std::min(b, dist_sum[c] / static_cast<double>(sizes[c]));
    }
    if (!std::isfinite(b)) continue;
    double m = std::max(a, b);
    if (m > 0.0) total += (b - a) / m;
  }
  return total / static_cast<double>(n);
}

struct ClusterOptions {
  std::optional<int> k;  // nullopt: choose k in [2, 8] by mean silhouette
  std::uint64_t seed = 1;
  int max_iterations = 100;
  std::size_t silhouette_sample = 1000;
};

struct ClusterFitInfo {
  KMeansResult final_run;
  std::vector<std::pair<int, double>> silhouettes;  // (k, score) when k was chosen automatically
  std::vector<std::string> dropped_constant;
};

/// Standardizes the candidate features over complete cases and runs k-means.
/// Constant features are dropped; if every feature is constant the data is a
/// single point and only k = 1 is accepted.
inline ClusterModel fit_clusters(const std::vector<const TaxpayerCase*>& training,
                                 const std::vector<std::string>& candidate_features, const ClusterOptions& opt,
                                 ClusterFitInfo* info = nullptr) {
  std::vector<std::vector<double>> raw;
  for (const auto* c : training) {
    if (auto x = feature_vector(*c, candidate_features)) raw.push_back(std::move(*x));
  }
  const std::size_t n = raw.size();
  if (opt.k && *opt.k < 1) throw TrainingError("k must be >= 1");
  if (opt.k && n < static_cast<std::size_t>(*opt.k)) {
    throw TrainingError("fewer complete cases (" + std::to_string(n) + ") than clusters (" +
                        std::to_string(*opt.k) + ")");
  }
  if (!opt.k && n < 3) throw TrainingError("automatic k needs at least 3 complete cases");

  ClusterModel model;
  std::vector<std::size_t> kept;
  std::vector<Standardization> scale;
  ClusterFitInfo local;
  for (std::size_t f = 0; f < candidate_features.size(); ++f) {
    double mean = 0.0;
    for (const auto& r : raw) mean += r[f];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const auto& r : raw) var += (r[f] - mean) * (r[f] - mean);
    double sd = std::sqrt(var / static_cast<double>(n));
    scale.push_back({mean, sd});
    if (sd > 0.0) {
      kept.push_back(f);
    } else {
      local.dropped_constant.push_back(candidate_features[f]);
    }
  }
  if (kept.empty()) {
    if (opt.k.value_or(2) > 1) throw TrainingError("all features are constant");
    for (std::size_t f = 0; f < candidate_features.size(); ++f) {
      kept.push_back(f);
      scale[f].stddev = 1.0;
    }
    local.dropped_constant.clear();
  }
  for (std::size_t f : kept) {
    model.feature_list.push_back(candidate_features[f]);
    model.standardization.push_back(scale[f]);
  }

  std::vector<std::vector<double>> points;
  points.reserve(n);
  for (const auto& r : raw) {
    std::vector<double> z;
    z.reserve(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) z.push_back((r[kept[i]] - scale[kept[i]].mean) / scale[kept[i]].stddev);
    points.push_back(std::move(z));
  }

  Rng rng(opt.seed);
  if (opt.k) {
    local.final_run = kmeans(points, *opt.k, rng, opt.max_iterations);
  } else {
    // Silhouette is quadratic; score on a fixed-seed subsample.
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng sample_rng(opt.seed ^ 0x5eed);
    sample_rng.shuffle(idx);
    idx.resize(std::min(n, opt.silhouette_sample));
    std::vector<std::vector<double>> sample;
    for (auto i : idx) sample.push_back(points[i]);

    double best = -std::numeric_limits<double>::infinity();
    int max_k = static_cast<int>(std::min<std::size_t>(8, n - 1));
    for (int k = 2; k <= max_k; ++k) {
      Rng run_rng(opt.seed + static_cast<std::uint64_t>(k));
      auto run = kmeans(points, k, run_rng, opt.max_iterations);
      std::vector<int> sample_assign;
      for (auto i : idx) sample_assign.push_back(run.assignment[i]);
      double s = mean_silhouette(sample, sample_assign, k);
      local.silhouettes.emplace_back(k, s);
      if (s > best) {
        best = s;
        local.final_run = std::move(run);
      }
    }
  }
  model.centroids = local.final_run.centroids;
  if (info) *info = std::move(local);
  return model;
}

/// Nearest centroid in standardized space; ties to the lowest id.
/// Throws DataError when a model feature is missing.
inline int assign_cluster(const ClusterModel& model, const TaxpayerCase& c) {
  std::string missing;
  auto x = feature_vector(c, model.feature_list, &missing);
  if (!x) throw DataError("case " + c.case_id + " lacks feature " + missing + " required for clustering");
  return nearest_centroid(model.centroids, model.standardize(*x));
}

}  // namespace pacc::models
