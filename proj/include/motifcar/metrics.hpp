#pragma once

// Counterfactual quality scores and detection metrics.
//
// Realism: squared MMD (biased V-statistic, Gaussian kernel, median-heuristic
// bandwidth over the pooled set) between structural feature vectors, x100.
// Proximity: mean Euclidean feature distance to the motif donor.
// Validity: fraction a fixed reference classifier assigns to the intended class.
// Sparsity: symmetric edge difference to the motif donor, normalized by its
// edge count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "motifcar/error.hpp"
#include "motifcar/graph.hpp"

namespace motifcar {

struct FeatureOptions {
  int degree_buckets = 16;
  double node_scale = 100.0;
};

inline double mean_clustering(const Graph& g) {
  if (g.n() == 0) return 0.0;
  double total = 0;
  for (int v = 0; v < g.n(); ++v) {
    std::vector<int> nb;
    for (int u = 0; u < g.n(); ++u)
      if (g.has_edge(v, u)) nb.push_back(u);
    const auto k = nb.size();
    if (k < 2) continue;
    int links = 0;
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a + 1; b < k; ++b) links += g.has_edge(nb[a], nb[b]) ? 1 : 0;
    total += 2.0 * links / static_cast<double>(k * (k - 1));
  }
  return total / g.n();
}

/// [degree histogram (fractions, last bucket open-ended), edge density,
///  mean clustering coefficient, n / node_scale].
inline Eigen::VectorXd graph_feature_vector(const Graph& g, const FeatureOptions& opt = {}) {
  if (g.n() < 1) throw ArgumentError("graph_feature_vector: empty graph");
  const int b = opt.degree_buckets;
  Eigen::VectorXd f = Eigen::VectorXd::Zero(b + 3);
  for (int d : degree_sequence(g)) f(std::min(d, b - 1)) += 1.0 / g.n();
  f(b) = g.n() > 1 ? 2.0 * g.edge_count() / (static_cast<double>(g.n()) * (g.n() - 1)) : 0.0;
  f(b + 1) = mean_clustering(g);
  f(b + 2) = g.n() / opt.node_scale;
  return f;
}

namespace detail {

inline std::vector<Eigen::VectorXd> features_of(std::span<const Graph> gs, const FeatureOptions& opt) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(gs.size());
  for (const Graph& g : gs) out.push_back(graph_feature_vector(g, opt));
  return out;
}

}  // namespace detail

/// 100 * MMD^2 between the two sets. The biased estimator makes
/// realism(S, S) exactly 0 and stays defined for singleton sets.
inline double realism_score(std::span<const Graph> real, std::span<const Graph> cf, const FeatureOptions& opt = {}) {
  if (real.empty() || cf.empty()) throw ArgumentError("realism_score: empty set");
  const auto x = detail::features_of(real, opt);
  const auto y = detail::features_of(cf, opt);
  std::vector<Eigen::VectorXd> pooled = x;
  pooled.insert(pooled.end(), y.begin(), y.end());
  std::vector<double> dists;
  for (std::size_t i = 0; i < pooled.size(); ++i)
    for (std::size_t j = i + 1; j < pooled.size(); ++j) {
      const double d = (pooled[i] - pooled[j]).norm();
      if (d > 0) dists.push_back(d);
    }
  double sigma = 1.0;
  if (!dists.empty()) {
    std::sort(dists.begin(), dists.end());
    const std::size_t m = dists.size();
    sigma = m % 2 ? dists[m / 2] : 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
  }
  const auto k = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return std::exp(-(a - b).squaredNorm() / (2.0 * sigma * sigma));
  };
  auto mean_kernel = [&](const std::vector<Eigen::VectorXd>& a, const std::vector<Eigen::VectorXd>& b) {
    double s = 0;
    for (const auto& u : a)
      for (const auto& v : b) s += k(u, v);
    return s / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
  };
  const double mmd2 = mean_kernel(x, x) + mean_kernel(y, y) - 2.0 * mean_kernel(x, y);
  return 100.0 * std::max(0.0, mmd2);
}

struct CounterfactualPair {
  const Graph* cf = nullptr;
  const Graph* source = nullptr;
  /// node_map[v] = id in source of counterfactual node v, or -1 when v has no
  /// counterpart. Required by sparsity_score.
  std::vector<int> node_map;
};

inline double proximity_score(std::span<const CounterfactualPair> pairs, const FeatureOptions& opt = {}) {
  if (pairs.empty()) throw ArgumentError("proximity_score: no pairs");
  double total = 0;
  for (const auto& p : pairs) total += (graph_feature_vector(*p.cf, opt) - graph_feature_vector(*p.source, opt)).norm();
  return total / static_cast<double>(pairs.size());
}

/// Fraction of items whose predicted label equals the intended label.
inline double validity_score(std::span<const Graph> cfs, std::span<const int> intended,
                             const std::function<int(const Graph&)>& predict) {
  if (cfs.size() != intended.size()) throw ArgumentError("validity_score: label count mismatch");
  if (cfs.empty()) throw ArgumentError("validity_score: no counterfactuals");
  if (!predict) throw ArgumentError("validity_score: no classifier");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < cfs.size(); ++i) hits += predict(cfs[i]) == intended[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(cfs.size());
}

/// Mean of |E_cf (mapped) xor E_source| / max(1, |E_source|). Edges touching an
/// unmapped counterfactual node count as additions.
inline double sparsity_score(std::span<const CounterfactualPair> pairs) {
  if (pairs.empty()) throw ArgumentError("sparsity_score: no pairs");
  double total = 0;
  for (const auto& p : pairs) {
    const Graph& cf = *p.cf;
    const Graph& src = *p.source;
    if (static_cast<int>(p.node_map.size()) != cf.n())
      throw ArgumentError("sparsity_score: node correspondence missing (provenance required)");
    Graph mapped(src.n());
    int additions = 0;
    for (auto [u, v] : cf.edges()) {
      const int a = p.node_map[static_cast<std::size_t>(u)], b = p.node_map[static_cast<std::size_t>(v)];
      if (a < 0 || b < 0) {
        ++additions;
        continue;
      }
      if (a >= src.n() || b >= src.n()) throw ArgumentError("sparsity_score: node map out of range");
      if (!mapped.add_edge(a, b)) ++additions;  // two cf edges folded onto one source pair
    }
    int diff = additions;
    for (int i = 0; i < src.n(); ++i)
      for (int j = i + 1; j < src.n(); ++j) diff += mapped.has_edge(i, j) != src.has_edge(i, j) ? 1 : 0;
    total += diff / static_cast<double>(std::max(1, src.edge_count()));
  }
  return total / static_cast<double>(pairs.size());
}

struct DetectionMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  bool zero_division = false;
};

inline DetectionMetrics detection_metrics(std::span<const int> predicted, std::span<const int> actual, int positive) {
  if (predicted.size() != actual.size()) throw ArgumentError("detection_metrics: length mismatch");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] == positive, a = actual[i] == positive;
    tp += p && a;
    fp += p && !a;
    fn += !p && a;
  }
  DetectionMetrics m;
  if (tp + fp > 0) m.precision = tp / (tp + fp); else m.zero_division = true;
  if (tp + fn > 0) m.recall = tp / (tp + fn); else m.zero_division = true;
  if (m.precision + m.recall > 0) m.f1 = 2 * m.precision * m.recall / (m.precision + m.recall); else m.zero_division = true;
  return m;
}

struct MetricsReport {
  double realism = 0;
  double validity = 0;
  double proximity = 0;
  double sparsity = 0;
  // Same scores for the unrefined raw counterfactuals.
  double raw_realism = 0;
  double raw_validity = 0;
  double raw_proximity = 0;
  double raw_sparsity = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  bool augmentation = true;
  int counterfactuals = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string dataset;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["dataset"] = dataset;
    j["seed"] = seed;
    j["config_hash"] = config_hash;
    j["augmentation"] = augmentation;
    j["counterfactuals"] = counterfactuals;
    j["precision"] = precision;
    j["recall"] = recall;
    j["f1"] = f1;
    j["realism"] = realism;
    j["validity"] = validity;
    j["proximity"] = proximity;
    j["sparsity"] = sparsity;
    j["raw_realism"] = raw_realism;
    j["raw_validity"] = raw_validity;
    j["raw_proximity"] = raw_proximity;
    j["raw_sparsity"] = raw_sparsity;
    return j;
  }

  void validate() const {
    for (double v : {realism, validity, proximity, sparsity, raw_realism, raw_validity, raw_proximity, raw_sparsity,
                     precision, recall, f1})
      if (!std::isfinite(v)) throw NumericalError("metrics report: non-finite score");
    for (double v : {validity, raw_validity, precision, recall, f1})
      if (v < 0 || v > 1) throw NumericalError("metrics report: fraction outside [0,1]");
  }
};

inline constexpr const char* kLedgerHeader =
    "dataset,seed,config_hash,augmentation,counterfactuals,precision,recall,f1,realism,validity,proximity,sparsity,"
    "raw_realism,raw_validity,raw_proximity,raw_sparsity";

/// Appends one row; writes the header when the file is new or empty.
inline void append_ledger_row(const std::filesystem::path& path, const MetricsReport& r) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw DataError("cannot append to " + path.string());
  if (fresh) out << kLedgerHeader << '\n';
  out << std::setprecision(10) << r.dataset << ',' << r.seed << ',' << r.config_hash << ',' << (r.augmentation ? 1 : 0)
      << ',' << r.counterfactuals << ',' << r.precision << ',' << r.recall << ',' << r.f1 << ',' << r.realism << ','
      << r.validity << ',' << r.proximity << ',' << r.sparsity << ',' << r.raw_realism << ',' << r.raw_validity << ','
      << r.raw_proximity << ',' << r.raw_sparsity << '\n';
}

}  // namespace motifcar
