#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "pacc/models/common.hpp"
#include "pacc/models/kmeans.hpp"

namespace pacc::models {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;   // x[feature] <= threshold
  int right = -1;  // x[feature] > threshold
  double probability = 0.0;  // fraud fraction of training samples at this node
  int samples = 0;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

/// Binary CART tree over raw feature values; node 0 is the root.
struct DecisionTree {
  std::vector<TreeNode> nodes;

  const TreeNode& leaf_for(const std::vector<double>& x) const {
    int i = 0;
    while (!nodes[i].is_leaf()) i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
    return nodes[i];
  }
  double predict(const std::vector<double>& x) const { return leaf_for(x).probability; }
  int depth() const { return depth_from(0); }

  bool operator==(const DecisionTree&) const = default;

 private:
  int depth_from(int i) const {
    if (nodes[i].is_leaf()) return 0;
    return 1 + std::max(depth_from(nodes[i].left), depth_from(nodes[i].right));
  }
};

struct TreeOptions {
  int max_depth = 4;
  int min_leaf = 5;
};

namespace detail {

inline double gini(double pos, double total) {
  if (total <= 0.0) return 0.0;
  double p = pos / total;
  return 2.0 * p * (1.0 - p);
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<double>>& x, const std::vector<int>& y, TreeOptions opt)
      : x_(x), y_(y), opt_(opt) {}

  DecisionTree build() {
    std::vector<std::size_t> idx(x_.size());
    std::iota(idx.begin(), idx.end(), 0);
    grow(idx, 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t>& idx, int depth) {
    int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    double pos = 0.0;
    for (auto i : idx) pos += y_[i];
    tree_.nodes[id].samples = static_cast<int>(idx.size());
    tree_.nodes[id].probability = idx.empty() ? 0.0 : pos / static_cast<double>(idx.size());

    double parent = gini(pos, static_cast<double>(idx.size()));
    if (depth >= opt_.max_depth || parent == 0.0) return id;
    Split best = find_split(idx, pos);
    if (best.feature < 0 || best.impurity >= parent - 1e-12) return id;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (auto i : idx) (x_[i][best.feature] <= best.threshold ? left : right).push_back(i);
    tree_.nodes[id].feature = best.feature;
    tree_.nodes[id].threshold = best.threshold;
    int l = grow(left, depth + 1);
    int r = grow(right, depth + 1);
    tree_.nodes[id].left = l;
    tree_.nodes[id].right = r;
    return id;
  }

  Split find_split(const std::vector<std::size_t>& idx, double total_pos) const {
    Split best;
    best.impurity = std::numeric_limits<double>::infinity();
    const double n = static_cast<double>(idx.size());
    const std::size_t min_leaf = static_cast<std::size_t>(std::max(1, opt_.min_leaf));
    if (idx.size() < 2 * min_leaf) return best;
    std::vector<std::size_t> order(idx);
    const std::size_t dims = x_.front().size();
    for (std::size_t f = 0; f < dims; ++f) {
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x_[a][f] < x_[b][f]; });
      double left_pos = 0.0;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        left_pos += y_[order[i]];
        std::size_t n_left = i + 1;
        double v = x_[order[i]][f];
        double next = x_[order[i + 1]][f];
        if (v == next) continue;
        if (n_left < min_leaf || order.size() - n_left < min_leaf) continue;
        double nl = static_cast<double>(n_left);
        double nr = n - nl;
        double imp = (nl * gini(left_pos, nl) + nr * gini(total_pos - left_pos, nr)) / n;
        if (imp < best.impurity) {
          best = {static_cast<int>(f), v + (next - v) / 2.0, imp};
        }
      }
    }
    return best;
  }

  const std::vector<std::vector<double>>& x_;
  const std::vector<int>& y_;
  TreeOptions opt_;
  DecisionTree tree_;
};

}  // namespace detail

/// Gini CART with depth and minimum-leaf bounds. Labels are 0/1.
inline DecisionTree fit_tree(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                             const TreeOptions& opt = {}) {
  if (x.empty()) throw TrainingError("cannot fit a tree on zero samples");
  return detail::TreeBuilder(x, y, opt).build();
}

struct ClusterClassifier {
  int cluster_id = 0;
  DecisionTree tree;
  int max_depth = 4;

  bool operator==(const ClusterClassifier&) const = default;
};

/// One tree per populated cluster. Every training case must carry an audited
/// outcome; cases missing a model feature are skipped. Clusters without
/// training cases get no classifier.
inline std::vector<ClusterClassifier> fit_cluster_classifiers(const ClusterModel& model,
                                                              const std::vector<const TaxpayerCase*>& training,
                                                              const TreeOptions& opt = {}) {
  std::vector<std::vector<std::vector<double>>> xs(model.k());
  std::vector<std::vector<int>> ys(model.k());
  for (const auto* c : training) {
    if (!c->outcome || !c->outcome->audited) {
      throw TrainingError("training case " + c->case_id + " has no audited outcome");
    }
    auto x = feature_vector(*c, model.feature_list);
    if (!x) continue;
    int cluster = nearest_centroid(model.centroids, model.standardize(*x));
    xs[cluster].push_back(std::move(*x));
    ys[cluster].push_back(c->outcome->fraud_found ? 1 : 0);
  }
  std::vector<ClusterClassifier> out;
  for (int k = 0; k < model.k(); ++k) {
    if (xs[k].empty()) continue;
    out.push_back({k, fit_tree(xs[k], ys[k], opt), opt.max_depth});
  }
  return out;
}

}  // namespace pacc::models
