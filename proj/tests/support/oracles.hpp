#pragma once

// Independent reference computations used to check the library.

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace pacc::testing {

/// Adjusted Rand index from the contingency table (Hubert and Arabie).
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  auto choose2 = [](double n) { return n * (n - 1.0) / 2.0; };
  std::map<std::pair<int, int>, double> table;
  std::map<int, double> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[{a[i], b[i]}] += 1;
    rows[a[i]] += 1;
    cols[b[i]] += 1;
  }
  double index = 0, sum_rows = 0, sum_cols = 0;
  for (const auto& [_, n] : table) index += choose2(n);
  for (const auto& [_, n] : rows) sum_rows += choose2(n);
  for (const auto& [_, n] : cols) sum_cols += choose2(n);
  double expected = sum_rows * sum_cols / choose2(static_cast<double>(a.size()));
  double max_index = (sum_rows + sum_cols) / 2.0;
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

/// Median by full sort, MAD as the median of absolute deviations.
inline std::pair<double, double> brute_median_mad(std::vector<double> v) {
  auto med = [](std::vector<double> s) {
    std::sort(s.begin(), s.end());
    std::size_t n = s.size();
    return n % 2 ? s[n / 2] : (s[n / 2 - 1] + s[n / 2]) / 2.0;
  };
  double m = med(v);
  for (auto& x : v) x = std::fabs(x - m);
  return {m, med(v)};
}

/// Walks a serialized tree (nodes array of the models file) from the root.
inline double walk_tree_json(const nlohmann::json& nodes, const std::vector<double>& x) {
  std::size_t i = 0;
  for (;;) {
    const auto& n = nodes.at(i);
    int f = n.at("feature").get<int>();
    if (f < 0) return n.at("probability").get<double>();
    bool left = x.at(static_cast<std::size_t>(f)) <= n.at("threshold").get<double>();
    i = static_cast<std::size_t>(n.at(left ? "left" : "right").get<int>());
  }
}

}  // namespace pacc::testing
