#pragma once

// Planted-motif graph generator and the dataset preparation steps shared by
// every pipeline (anomaly downsampling, stratified split).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "motifcar/error.hpp"
#include "motifcar/graph.hpp"
#include "motifcar/random.hpp"

namespace motifcar {

namespace motifs {

inline Graph complete(int k) {
  Graph g(k);
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) g.add_edge(i, j);
  return g;
}

inline Graph cycle(int k) {
  Graph g(k);
  for (int i = 0; i < k; ++i) g.add_edge(i, (i + 1) % k);
  return g;
}

inline Graph path(int k) {
  Graph g(k);
  for (int i = 0; i + 1 < k; ++i) g.add_edge(i, i + 1);
  return g;
}

/// Center 0 plus k - 1 leaves.
inline Graph star(int k) {
  Graph g(k);
  for (int i = 1; i < k; ++i) g.add_edge(0, i);
  return g;
}

/// Parses "K4", "C5", "P3", "S4" (complete, cycle, path, star).
inline Graph parse(const std::string& spec) {
  if (spec.size() < 2) throw ArgumentError("unknown motif '" + spec + "'");
  int k = 0;
  try {
    k = std::stoi(spec.substr(1));
  } catch (const std::exception&) {
    throw ArgumentError("unknown motif '" + spec + "'");
  }
  if (k < 1) throw ArgumentError("motif size must be positive: '" + spec + "'");
  switch (spec[0]) {
    case 'K': return complete(k);
    case 'C':
      if (k < 3) throw ArgumentError("cycle motif needs at least 3 nodes");
      return cycle(k);
    case 'P': return path(k);
    case 'S': return star(k);
    default: throw ArgumentError("unknown motif '" + spec + "'");
  }
}

}  // namespace motifs

struct PlantedClass {
  Graph motif;
  int context_min = 5;
  int context_max = 5;
  double context_p = 0.3;
};

struct PlantedMotifConfig {
  std::vector<PlantedClass> classes;
  int graphs_per_class = 10;
  int cross_edge_count = 2;
  std::uint64_t seed = 0;

  void validate() const {
    if (classes.empty()) throw ArgumentError("planted config: no classes");
    if (graphs_per_class < 1) throw ArgumentError("planted config: graphs_per_class must be >= 1");
    if (cross_edge_count < 0) throw ArgumentError("planted config: negative cross_edge_count");
    for (const auto& c : classes) {
      if (c.motif.n() < 1) throw ArgumentError("planted config: empty motif");
      if (c.context_min < 0 || c.context_min > c.context_max)
        throw ArgumentError("planted config: empty context node-count range [" + std::to_string(c.context_min) +
                            ", " + std::to_string(c.context_max) + "]");
      if (!(c.context_p >= 0.0 && c.context_p <= 1.0))
        throw ArgumentError("planted config: context edge probability outside [0,1]");
      if (static_cast<long>(cross_edge_count) > static_cast<long>(c.motif.n()) * c.context_min)
        throw ArgumentError("planted config: cross_edge_count exceeds motif x context pairs");
    }
  }
};

/// Each graph: its class motif, an Erdos-Renyi context, and exactly
/// cross_edge_count distinct motif-context edges, with node ids shuffled.
/// roles[g][v] = 1 marks planted-motif nodes.
inline LabeledDataset generate_planted_motif_dataset(const PlantedMotifConfig& cfg) {
  cfg.validate();
  LabeledDataset ds;
  ds.name = "planted";
  std::uint64_t item = 0;
  for (std::size_t c = 0; c < cfg.classes.size(); ++c) {
    const PlantedClass& cls = cfg.classes[c];
    for (int k = 0; k < cfg.graphs_per_class; ++k, ++item) {
      Rng rng(derive_seed(cfg.seed, "planted", item));
      const int m = cls.motif.n();
      const int ctx = rng.between(cls.context_min, cls.context_max);
      const int n = m + ctx;
      std::vector<int> ids(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = i;
      rng.shuffle(ids);  // position p of the construction becomes node ids[p]
      Graph g(n);
      for (auto [u, v] : cls.motif.edges()) g.add_edge(ids[u], ids[v]);
      for (int i = m; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          if (rng.bernoulli(cls.context_p)) g.add_edge(ids[i], ids[j]);
      for (std::size_t pick : rng.sample_without_replacement(static_cast<std::size_t>(m) * ctx,
                                                             static_cast<std::size_t>(cfg.cross_edge_count))) {
        const int u = static_cast<int>(pick) / ctx;
        const int v = m + static_cast<int>(pick) % ctx;
        g.add_edge(ids[u], ids[v]);
      }
      std::vector<std::uint8_t> role(static_cast<std::size_t>(n), 0);
      for (int i = 0; i < m; ++i) role[static_cast<std::size_t>(ids[i])] = 1;
      ds.graphs.push_back(std::move(g));
      ds.labels.push_back(static_cast<int>(c));
      ds.roles.push_back(std::move(role));
    }
  }
  ds.anomaly_class = 0;
  ds.put_all_in_train();
  return ds;
}

/// Binary detection label: 0 for the anomaly class, 1 otherwise.
inline int binary_label(const LabeledDataset& ds, int index) {
  return ds.labels[static_cast<std::size_t>(index)] == ds.anomaly_class ? 0 : 1;
}

/// Fraction of the anomaly class to keep so that anomalies make up 9.0% of a
/// two-class dataset or 4.7% of a multi-class one.
inline double default_anomaly_fraction(const LabeledDataset& ds, int anomaly_class) {
  const auto classes = ds.classes();
  const double rate = classes.size() <= 2 ? 0.090 : 0.047;
  double anomalies = 0, normals = 0;
  for (int l : ds.labels) (l == anomaly_class ? anomalies : normals) += 1;
  if (anomalies == 0) throw ArgumentError("anomaly class " + std::to_string(anomaly_class) + " has no graphs");
  const double keep = std::round(rate * normals / (1.0 - rate));
  return std::clamp(keep / anomalies, 1.0 / anomalies, 1.0);
}

/// Keeps round(fraction * count) graphs of the anomaly class (at least one),
/// chosen by seed, and every other graph; relative order is preserved.
inline LabeledDataset downsample_anomaly(const LabeledDataset& ds, int anomaly_class, double fraction,
                                         std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ArgumentError("anomaly fraction must lie in (0, 1]");
  std::vector<std::size_t> anomalous;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.labels[i] == anomaly_class) anomalous.push_back(i);
  if (anomalous.empty()) throw ArgumentError("anomaly class " + std::to_string(anomaly_class) + " has no graphs");
  const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(fraction * anomalous.size())));
  Rng rng(derive_seed(seed, "downsample"));
  std::vector<std::uint8_t> kept(ds.size(), 1);
  for (std::size_t i : anomalous) kept[i] = 0;
  for (std::size_t pick : rng.sample_without_replacement(anomalous.size(), keep)) kept[anomalous[pick]] = 1;

  LabeledDataset out;
  out.name = ds.name;
  out.anomaly_class = anomaly_class;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!kept[i]) continue;
    out.graphs.push_back(ds.graphs[i]);
    out.labels.push_back(ds.labels[i]);
    if (!ds.roles.empty()) out.roles.push_back(ds.roles[i]);
  }
  out.put_all_in_train();
  return out;
}

/// Train/validation/test split stratified on the binary anomaly label.
inline Split stratified_split(const LabeledDataset& ds, std::array<double, 3> ratios, std::uint64_t seed) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (!(total > 0.0) || ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0)
    throw ArgumentError("split ratios must be non-negative and not all zero");
  Rng rng(derive_seed(seed, "split"));
  Split split;
  for (int stratum : {0, 1}) {
    std::vector<int> ids;
    for (int i = 0; i < static_cast<int>(ds.size()); ++i)
      if (binary_label(ds, i) == stratum) ids.push_back(i);
    rng.shuffle(ids);
    const auto n = static_cast<double>(ids.size());
    auto n_train = static_cast<std::size_t>(std::lround(n * ratios[0] / total));
    if (n_train == 0 && ids.size() >= 3 && ratios[0] > 0) n_train = 1;
    auto n_val = std::min(ids.size() - n_train, static_cast<std::size_t>(std::lround(n * ratios[1] / total)));
    for (std::size_t k = 0; k < ids.size(); ++k) {
      auto& part = k < n_train ? split.train : (k < n_train + n_val ? split.validation : split.test);
      part.push_back(ids[k]);
    }
  }
  for (auto* part : {&split.train, &split.validation, &split.test}) std::sort(part->begin(), part->end());
  return split;
}

}  // namespace motifcar
