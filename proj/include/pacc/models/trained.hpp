#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "pacc/core/json_io.hpp"
#include "pacc/models/cart.hpp"
#include "pacc/models/effectiveness.hpp"
#include "pacc/models/kmeans.hpp"
#include "pacc/models/peer_stats.hpp"

namespace pacc::models {

inline constexpr int kModelsFormatVersion = 1;

/// Everything the rule conditions may consult as `model.*` or peer calls.
struct TrainedModels {
  std::optional<ClusterModel> clusters;
  std::vector<ClusterClassifier> classifiers;
  std::optional<PeerStats> peers;
  std::optional<EffectivenessModel> effectiveness;
  int trained_at = 0;

  const ClusterClassifier* classifier_for(int cluster) const {
    for (const auto& c : classifiers) {
      if (c.cluster_id == cluster) return &c;
    }
    return nullptr;
  }

  bool operator==(const TrainedModels&) const = default;
};

/// Cluster assignment followed by that cluster's tree.
inline ModelValue predict_company_fraud(const TrainedModels& m, const TaxpayerCase& c) {
  if (!m.clusters) return NotApplicable{"no cluster model trained"};
  std::string missing;
  auto x = feature_vector(c, m.clusters->feature_list, &missing);
  if (!x) return NotApplicable{"missing feature " + missing};
  int cluster = nearest_centroid(m.clusters->centroids, m.clusters->standardize(*x));
  const auto* clf = m.classifier_for(cluster);
  if (!clf) return NotApplicable{"no classifier for cluster " + std::to_string(cluster)};
  return clf->tree.predict(*x);
}

inline ModelValue effectiveness_risk(const TrainedModels& m, const TaxpayerCase& c) {
  if (!m.effectiveness) return NotApplicable{"no effectiveness model trained"};
  return effectiveness_risk(*m.effectiveness, c);
}

/// Hyperparameters and feature choices for `train_models`.
struct ModelConfig {
  std::vector<std::string> cluster_features{"employee_count",  "revenue_eur",      "personnel_cost_eur",
                                            "profit_eur",      "input_tax_eur",    "output_tax_eur",
                                            "total_assets_eur", "inventory_eur"};
  std::optional<int> k;  // nullopt: automatic by silhouette
  TreeOptions tree;
  std::vector<std::string> peer_features;  // empty: every numeric schema feature
  std::vector<std::string> effectiveness_features{
      "employee_count",         "input_tax_eur",      "output_tax_eur",       "intra_eu_acquisitions_eur",
      "company_age_months",     "vat_refund_claims",  "director_changes_count", "late_filings_count",
      "has_foreign_director"};
  std::vector<FeatureRole> effectiveness_roles{FeatureRole::plain,     FeatureRole::plain,     FeatureRole::plain,
                                               FeatureRole::plain,     FeatureRole::plain,     FeatureRole::frequency,
                                               FeatureRole::frequency, FeatureRole::frequency, FeatureRole::qualitative};
  EffectivenessOptions effectiveness;
  std::uint64_t seed = 1;
};

/// Cases whose audit outcome is known at `clock`.
inline bool documented(const TaxpayerCase& c, int clock) {
  return c.outcome && c.outcome->audited && c.outcome->available_at <= clock;
}

/// Trains every model family from the matured audit documentation in
/// `cases`. A family without enough data is left empty; its outputs are then
/// NOT_APPLICABLE.
inline TrainedModels train_models(const std::vector<TaxpayerCase>& cases, int clock, const ModelConfig& cfg,
                                  const FeatureSchema& schema) {
  TrainedModels m;
  m.trained_at = clock;
  std::vector<const TaxpayerCase*> company_docs;
  std::vector<const TaxpayerCase*> company_all;
  std::vector<const TaxpayerCase*> mt_docs;
  for (const auto& c : cases) {
    if (c.kind == CaseKind::company_audit) {
      company_all.push_back(&c);
      if (documented(c, clock)) company_docs.push_back(&c);
    } else if (documented(c, clock)) {
      mt_docs.push_back(&c);
    }
  }

  if (!company_docs.empty()) {
    ClusterOptions opt;
    opt.k = cfg.k;
    opt.seed = cfg.seed;
    try {
      m.clusters = fit_clusters(company_docs, cfg.cluster_features, opt);
    } catch (const TrainingError&) {
      m.clusters.reset();
    }
  }
  if (m.clusters) {
    m.classifiers = fit_cluster_classifiers(*m.clusters, company_docs, cfg.tree);
    auto peer_features = cfg.peer_features.empty() ? schema.numeric_features() : cfg.peer_features;
    m.peers = fit_peer_stats(*m.clusters, company_all, peer_features);
  }
  if (!mt_docs.empty()) {
    try {
      m.effectiveness = fit_effectiveness(mt_docs, cfg.effectiveness_features, cfg.effectiveness_roles,
                                          cfg.effectiveness);
    } catch (const TrainingError&) {
      m.effectiveness.reset();
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// models.json
// ---------------------------------------------------------------------------

inline Json models_to_json(const TrainedModels& m) {
  Json j;
  j["format_version"] = kModelsFormatVersion;
  j["trained_at"] = m.trained_at;
  if (m.clusters) {
    Json scale = Json::array();
    for (const auto& s : m.clusters->standardization) scale.push_back({{"mean", s.mean}, {"stddev", s.stddev}});
    j["clusters"] = {{"k", m.clusters->k()},
                     {"feature_list", m.clusters->feature_list},
                     {"standardization", scale},
                     {"centroids", m.clusters->centroids}};
  } else {
    j["clusters"] = nullptr;
  }
  Json classifiers = Json::array();
  for (const auto& c : m.classifiers) {
    Json nodes = Json::array();
    for (const auto& n : c.tree.nodes) {
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right},
                       {"probability", n.probability},
                       {"samples", n.samples}});
    }
    classifiers.push_back({{"cluster_id", c.cluster_id}, {"max_depth", c.max_depth}, {"nodes", nodes}});
  }
  j["classifiers"] = classifiers;
  if (m.peers) {
    Json clusters = Json::object();
    for (const auto& [cluster, per_feature] : m.peers->clusters) {
      Json fs = Json::object();
      for (const auto& [f, s] : per_feature) fs[f] = {{"median", s.median}, {"mad", s.mad}, {"count", s.count}};
      clusters[std::to_string(cluster)] = fs;
    }
    j["peer_stats"] = {{"features", m.peers->features}, {"clusters", clusters}};
  } else {
    j["peer_stats"] = nullptr;
  }
  if (m.effectiveness) {
    const auto& e = *m.effectiveness;
    Json roles = Json::array();
    for (auto r : e.roles) roles.push_back(std::string(to_string(r)));
    Json scale = Json::array();
    for (const auto& s : e.standardization) scale.push_back({{"mean", s.mean}, {"stddev", s.stddev}});
    j["effectiveness"] = {{"feature_list", e.feature_list},
                          {"roles", roles},
                          {"standardization", scale},
                          {"weights", e.weights},
                          {"intercept", e.intercept},
                          {"qualitative_weight", e.qualitative_weight},
                          {"frequency_weight", e.frequency_weight}};
  } else {
    j["effectiveness"] = nullptr;
  }
  return j;
}

inline TrainedModels models_from_json(const Json& j) {
  try {
    if (j.at("format_version").get<int>() != kModelsFormatVersion) {
      throw DataError("unsupported models format_version " + j.at("format_version").dump());
    }
    TrainedModels m;
    m.trained_at = j.at("trained_at").get<int>();
    if (const Json& c = j.at("clusters"); !c.is_null()) {
      ClusterModel cm;
      cm.feature_list = c.at("feature_list").get<std::vector<std::string>>();
      for (const auto& s : c.at("standardization")) {
        cm.standardization.push_back({s.at("mean").get<double>(), s.at("stddev").get<double>()});
      }
      cm.centroids = c.at("centroids").get<std::vector<std::vector<double>>>();
      if (cm.standardization.size() != cm.feature_list.size()) throw DataError("clusters: standardization size");
      for (const auto& row : cm.centroids) {
        if (row.size() != cm.feature_list.size()) throw DataError("clusters: centroid dimension");
      }
      m.clusters = std::move(cm);
    }
    for (const auto& c : j.at("classifiers")) {
      ClusterClassifier clf;
      clf.cluster_id = c.at("cluster_id").get<int>();
      clf.max_depth = c.at("max_depth").get<int>();
      for (const auto& n : c.at("nodes")) {
        TreeNode node;
        node.feature = n.at("feature").get<int>();
        node.threshold = n.at("threshold").get<double>();
        node.left = n.at("left").get<int>();
        node.right = n.at("right").get<int>();
        node.probability = n.at("probability").get<double>();
        node.samples = n.at("samples").get<int>();
        clf.tree.nodes.push_back(node);
      }
      m.classifiers.push_back(std::move(clf));
    }
    if (const Json& p = j.at("peer_stats"); !p.is_null()) {
      PeerStats ps;
      ps.features = p.at("features").get<std::vector<std::string>>();
      for (const auto& [cluster, fs] : p.at("clusters").items()) {
        for (const auto& [f, s] : fs.items()) {
          ps.clusters[std::stoi(cluster)][f] = {s.at("median").get<double>(), s.at("mad").get<double>(),
                                                s.at("count").get<int>()};
        }
      }
      m.peers = std::move(ps);
    }
    if (const Json& e = j.at("effectiveness"); !e.is_null()) {
      EffectivenessModel em;
      em.feature_list = e.at("feature_list").get<std::vector<std::string>>();
      for (const auto& r : e.at("roles")) {
        auto role = parse_feature_role(r.get<std::string>());
        if (!role) throw DataError("effectiveness: unknown role " + r.dump());
        em.roles.push_back(*role);
      }
      for (const auto& s : e.at("standardization")) {
        em.standardization.push_back({s.at("mean").get<double>(), s.at("stddev").get<double>()});
      }
      em.weights = e.at("weights").get<std::vector<double>>();
      em.intercept = e.at("intercept").get<double>();
      em.qualitative_weight = e.at("qualitative_weight").get<double>();
      em.frequency_weight = e.at("frequency_weight").get<double>();
      if (em.roles.size() != em.feature_list.size() || em.weights.size() != em.feature_list.size() ||
          em.standardization.size() != em.feature_list.size()) {
        throw DataError("effectiveness: vector sizes disagree");
      }
      m.effectiveness = std::move(em);
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("models.json: ") + e.what());
  }
}

inline void save_models(const TrainedModels& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << models_to_json(m).dump(2) << '\n';
}

inline TrainedModels load_models(const std::string& path) { return models_from_json(read_json_file(path)); }

}  // namespace pacc::models
