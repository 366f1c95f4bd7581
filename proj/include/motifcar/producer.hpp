#pragma once

// Raw counterfactual producer: merges a motif donor G with a context donor H,
// masks the merged adjacency with the graphon-derived matrix and keeps the
// motif of G plus the context of H.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "motifcar/error.hpp"
#include "motifcar/graph.hpp"
#include "motifcar/graphon.hpp"
#include "motifcar/random.hpp"

namespace motifcar {

enum class NodeRole : std::uint8_t { Context = 0, Motif = 1 };

struct Provenance {
  int motif_donor = -1;    // dataset index of G
  int context_donor = -1;  // dataset index of H
  int label = 0;           // class of G, inherited by the counterfactual
  std::uint64_t seed = 0;
  bool self_recombination = false;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// Motif nodes come first (G's aligned order), then context nodes (H's).
struct RawCounterfactual {
  Graph graph;
  std::vector<NodeRole> roles;
  std::vector<int> source_ids;          // node id in G (motif) or H (context)
  std::vector<Edge> cross_candidates;   // every (motif, context) pair
  std::vector<Edge> initial_cross_edges;
  Provenance provenance;

  int motif_count() const {
    return static_cast<int>(std::count(roles.begin(), roles.end(), NodeRole::Motif));
  }
  std::vector<int> nodes_with(NodeRole r) const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(roles.size()); ++i)
      if (roles[static_cast<std::size_t>(i)] == r) out.push_back(i);
    return out;
  }
  bool is_cross(int i, int j) const {
    return roles[static_cast<std::size_t>(i)] != roles[static_cast<std::size_t>(j)];
  }
  int cross_edge_count() const {
    int c = 0;
    for (auto [u, v] : graph.edges()) c += is_cross(u, v) ? 1 : 0;
    return c;
  }

  friend bool operator==(const RawCounterfactual&, const RawCounterfactual&) = default;
};

struct MergedGraph {
  Eigen::MatrixXi A_p;  // (n_g + n_h)^2
  Eigen::MatrixXi A_C;  // n_g x n_h cross block
};

/// Block-diagonal merge plus eta distinct, uniformly drawn cross pairs.
inline MergedGraph merge_graphs(const Graph& G, const Graph& H, int eta, std::uint64_t seed) {
  const int ng = G.n(), nh = H.n();
  if (eta < 0) throw ArgumentError("merge_graphs: eta must be >= 0");
  if (static_cast<long>(eta) > static_cast<long>(ng) * nh)
    throw ArgumentError("merge_graphs: eta = " + std::to_string(eta) + " exceeds the " +
                        std::to_string(static_cast<long>(ng) * nh) + " available cross pairs");
  MergedGraph m;
  m.A_p = Eigen::MatrixXi::Zero(ng + nh, ng + nh);
  m.A_C = Eigen::MatrixXi::Zero(ng, nh);
  m.A_p.topLeftCorner(ng, ng) = G.adjacency().cast<int>();
  m.A_p.bottomRightCorner(nh, nh) = H.adjacency().cast<int>();
  Rng rng(seed);
  for (std::size_t pick :
       rng.sample_without_replacement(static_cast<std::size_t>(ng) * nh, static_cast<std::size_t>(eta))) {
    const int i = static_cast<int>(pick) / nh, j = static_cast<int>(pick) % nh;
    m.A_C(i, j) = 1;
  }
  m.A_p.topRightCorner(ng, nh) = m.A_C;
  m.A_p.bottomLeftCorner(nh, ng) = m.A_C.transpose();
  return m;
}

/// Mask [ bin(Wg_ext), A_C ; A_C^T, |A_H - bin(Wh_ext)| ] where the graphons
/// are zero-extended to the donor sizes. Stochastic mode draws G's and H's
/// graphons from separate streams of the given seed.
inline Eigen::MatrixXi build_mask(const Graphon& Wg, const Graphon& Wh, const Eigen::MatrixXi& A_H,
                                  const Eigen::MatrixXi& A_C, int ng, int nh, const BinarizeMode& mode) {
  if (Wg.K() > ng || Wh.K() > nh) throw ArgumentError("build_mask: graphon resolution exceeds donor size");
  if (A_H.rows() != nh || A_H.cols() != nh) throw ArgumentError("build_mask: A_H dimension mismatch");
  if (A_C.rows() != ng || A_C.cols() != nh) throw ArgumentError("build_mask: A_C dimension mismatch");
  BinarizeMode mode_g = mode, mode_h = mode;
  if (const auto* s = std::get_if<StochasticBinarize>(&mode)) {
    mode_g = StochasticBinarize{derive_seed(s->seed, "mask-g")};
    mode_h = StochasticBinarize{derive_seed(s->seed, "mask-h")};
  }
  Eigen::MatrixXi wg_ext = Eigen::MatrixXi::Zero(ng, ng);
  Eigen::MatrixXi wh_ext = Eigen::MatrixXi::Zero(nh, nh);
  wg_ext.topLeftCorner(Wg.K(), Wg.K()) = binarize(Wg, mode_g);
  wh_ext.topLeftCorner(Wh.K(), Wh.K()) = binarize(Wh, mode_h);

  Eigen::MatrixXi mask(ng + nh, ng + nh);
  mask.topLeftCorner(ng, ng) = wg_ext;
  mask.topRightCorner(ng, nh) = A_C;
  mask.bottomLeftCorner(nh, ng) = A_C.transpose();
  mask.bottomRightCorner(nh, nh) = (A_H - wh_ext).cwiseAbs();
  return mask;
}

struct ProducerOptions {
  int eta = 2;
  BinarizeMode binarize = ThresholdBinarize{0.5};
};

/// Builds I_raw from donors G and H with class graphons Wg and Wh.
///
/// The masked product keeps an edge only where both mask and merged adjacency
/// are 1, so no edge absent from A_p can appear. When none of the eta sampled
/// cross edges joins a kept motif node to a kept context node, max(eta, 1)
/// fresh pairs are drawn from the cross candidates.
inline RawCounterfactual produce_raw_counterfactual(const Graph& G, const Graph& H, const Graphon& Wg,
                                                    const Graphon& Wh, const ProducerOptions& opt,
                                                    std::uint64_t seed, Provenance provenance = {}) {
  if (G.n() < 1 || H.n() < 1) throw ProducerError("producer: donor graph is empty");
  const auto part_g = partition_motif_context(G, Wg);
  const auto part_h = partition_motif_context(H, Wh);
  if (part_h.context_empty())
    throw ProducerError("producer: context donor H (index " + std::to_string(provenance.context_donor) +
                        ") has an empty context at K = " + std::to_string(Wh.K()));
  const int ng = G.n(), nh = H.n();
  const int kg = static_cast<int>(part_g.motif_nodes.size());
  const int kh = static_cast<int>(part_h.motif_nodes.size());

  const Graph Ga = permuted(G, part_g.alignment);
  const Graph Ha = permuted(H, part_h.alignment);
  const MergedGraph merged = merge_graphs(Ga, Ha, opt.eta, derive_seed(seed, "merge"));
  BinarizeMode mode = opt.binarize;
  if (const auto* s = std::get_if<StochasticBinarize>(&mode)) mode = StochasticBinarize{derive_seed(s->seed, "mask", seed)};
  const Eigen::MatrixXi mask = build_mask(Wg.truncated(ng), Wh.truncated(nh), Ha.adjacency().cast<int>(),
                                          merged.A_C, ng, nh, mode);
  const Eigen::MatrixXi masked = mask.cwiseProduct(merged.A_p);

  // Keep motif positions [0, kg) of G and context positions [kh, nh) of H.
  std::vector<int> keep;
  for (int i = 0; i < kg; ++i) keep.push_back(i);
  for (int j = kh; j < nh; ++j) keep.push_back(ng + j);

  RawCounterfactual cf;
  const int n = static_cast<int>(keep.size());
  cf.graph = Graph(n);
  for (int i = 0; i < kg; ++i) {
    cf.roles.push_back(NodeRole::Motif);
    cf.source_ids.push_back(part_g.alignment[static_cast<std::size_t>(i)]);
  }
  for (int j = kh; j < nh; ++j) {
    cf.roles.push_back(NodeRole::Context);
    cf.source_ids.push_back(part_h.alignment[static_cast<std::size_t>(j)]);
  }
  int motif_edges = 0;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (masked(keep[static_cast<std::size_t>(a)], keep[static_cast<std::size_t>(b)]) != 0) {
        cf.graph.add_edge(a, b);
        if (b < kg) ++motif_edges;
      }
  if (motif_edges == 0)
    throw ProducerError("producer: motif donor G (index " + std::to_string(provenance.motif_donor) +
                        ") yields an empty motif under its graphon");

  for (int a = 0; a < kg; ++a)
    for (int b = kg; b < n; ++b) cf.cross_candidates.emplace_back(a, b);
  for (auto [a, b] : cf.cross_candidates)
    if (cf.graph.has_edge(a, b)) cf.initial_cross_edges.emplace_back(a, b);
  if (cf.initial_cross_edges.empty()) {
    Rng rng(derive_seed(seed, "resample"));
    const auto want = std::min<std::size_t>(static_cast<std::size_t>(std::max(opt.eta, 1)), cf.cross_candidates.size());
    auto picks = rng.sample_without_replacement(cf.cross_candidates.size(), want);
    std::sort(picks.begin(), picks.end());
    for (std::size_t p : picks) {
      auto [a, b] = cf.cross_candidates[p];
      cf.graph.add_edge(a, b);
      cf.initial_cross_edges.emplace_back(a, b);
    }
  }
  provenance.seed = seed;
  provenance.self_recombination = provenance.self_recombination ||
                                  (provenance.motif_donor >= 0 && provenance.motif_donor == provenance.context_donor);
  cf.provenance = provenance;
  return cf;
}

enum class PairingPolicy { SameClass, AnyClass };

struct BatchOptions {
  ProducerOptions producer;
  PairingPolicy pairing = PairingPolicy::SameClass;
  int per_graph = 1;    // counterfactuals per motif donor
  int max_retries = 10; // fresh context donors tried after a producer error
};

struct BatchResult {
  std::vector<RawCounterfactual> items;
  std::vector<std::string> skipped;  // one message per donor slot that never succeeded
};

/// Every index in `donors` serves as motif donor `per_graph` times; context
/// donors are drawn from `donors` under the pairing policy, avoiding the motif
/// donor itself when another candidate exists. `graphon_of(i)` returns the
/// graphon that masks dataset graph i. Slot t draws from seed stream (seed, "pair", t).
template <class GraphonLookup>
BatchResult produce_batch(const LabeledDataset& ds, std::span<const int> donors, GraphonLookup&& graphon_of,
                          const BatchOptions& opt, std::uint64_t seed) {
  if (opt.per_graph < 0 || opt.max_retries < 0) throw ArgumentError("produce_batch: negative count");
  BatchResult out;
  std::uint64_t slot = 0;
  for (int g : donors) {
    const int label = ds.labels[static_cast<std::size_t>(g)];
    std::vector<int> pool;
    for (int h : donors)
      if (h != g && (opt.pairing == PairingPolicy::AnyClass || ds.labels[static_cast<std::size_t>(h)] == label))
        pool.push_back(h);
    if (pool.empty()) pool.push_back(g);
    for (int k = 0; k < opt.per_graph; ++k, ++slot) {
      Rng rng(derive_seed(seed, "pair", slot));
      std::string last_error;
      bool done = false;
      for (int attempt = 0; attempt <= opt.max_retries && !done; ++attempt) {
        const int h = pool[rng.below(pool.size())];
        Provenance prov{g, h, label, 0, g == h};
        try {
          out.items.push_back(produce_raw_counterfactual(
              ds.graphs[static_cast<std::size_t>(g)], ds.graphs[static_cast<std::size_t>(h)], graphon_of(g),
              graphon_of(h), opt.producer, rng.next(), prov));
          done = true;
        } catch (const ProducerError& e) {
          last_error = e.what();
        }
      }
      if (!done) out.skipped.push_back("motif donor " + std::to_string(g) + ": " + last_error);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence: a JSON document with one record per counterfactual, plus a
// CSV provenance manifest.

inline nlohmann::ordered_json counterfactual_to_json(const RawCounterfactual& cf) {
  nlohmann::ordered_json j;
  j["n"] = cf.graph.n();
  auto edges = nlohmann::ordered_json::array();
  for (auto [u, v] : cf.graph.edges()) edges.push_back({u, v});
  j["edges"] = std::move(edges);
  auto roles = nlohmann::ordered_json::array();
  for (auto r : cf.roles) roles.push_back(static_cast<int>(r));
  j["roles"] = std::move(roles);
  j["source_ids"] = cf.source_ids;
  auto init = nlohmann::ordered_json::array();
  for (auto [u, v] : cf.initial_cross_edges) init.push_back({u, v});
  j["initial_cross_edges"] = std::move(init);
  j["motif_donor"] = cf.provenance.motif_donor;
  j["context_donor"] = cf.provenance.context_donor;
  j["label"] = cf.provenance.label;
  j["seed"] = cf.provenance.seed;
  j["self_recombination"] = cf.provenance.self_recombination;
  return j;
}

inline RawCounterfactual counterfactual_from_json(const nlohmann::json& j) {
  try {
    RawCounterfactual cf;
    const int n = j.at("n").get<int>();
    cf.graph = Graph(n);
    for (const auto& e : j.at("edges")) cf.graph.add_edge(e.at(0).get<int>(), e.at(1).get<int>());
    for (const auto& r : j.at("roles")) cf.roles.push_back(r.get<int>() ? NodeRole::Motif : NodeRole::Context);
    cf.source_ids = j.at("source_ids").get<std::vector<int>>();
    if (static_cast<int>(cf.roles.size()) != n || static_cast<int>(cf.source_ids.size()) != n)
      throw DataError("counterfactual record: roles/source_ids length differs from n");
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (cf.roles[static_cast<std::size_t>(a)] == NodeRole::Motif && cf.roles[static_cast<std::size_t>(b)] == NodeRole::Context)
          cf.cross_candidates.emplace_back(std::min(a, b), std::max(a, b));
    std::sort(cf.cross_candidates.begin(), cf.cross_candidates.end());
    for (const auto& e : j.at("initial_cross_edges")) cf.initial_cross_edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    cf.provenance.motif_donor = j.at("motif_donor").get<int>();
    cf.provenance.context_donor = j.at("context_donor").get<int>();
    cf.provenance.label = j.at("label").get<int>();
    cf.provenance.seed = j.at("seed").get<std::uint64_t>();
    cf.provenance.self_recombination = j.at("self_recombination").get<bool>();
    return cf;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("counterfactual record: ") + e.what());
  } catch (const ArgumentError& e) {
    throw DataError(std::string("counterfactual record: ") + e.what());
  }
}

inline constexpr int kCounterfactualVersion = 1;

inline void save_counterfactuals(const std::filesystem::path& path, const std::vector<RawCounterfactual>& cfs) {
  nlohmann::ordered_json doc;
  doc["format"] = "motifcar-counterfactuals";
  doc["version"] = kCounterfactualVersion;
  auto items = nlohmann::ordered_json::array();
  for (const auto& cf : cfs) items.push_back(counterfactual_to_json(cf));
  doc["counterfactuals"] = std::move(items);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

inline std::vector<RawCounterfactual> load_counterfactuals(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open counterfactual file: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (doc.value("format", "") != "motifcar-counterfactuals" || doc.value("version", 0) != kCounterfactualVersion)
    throw DataError(path.string() + ": not a version-1 counterfactual file");
  std::vector<RawCounterfactual> out;
  for (const auto& item : doc.at("counterfactuals")) out.push_back(counterfactual_from_json(item));
  return out;
}

inline void save_manifest(const std::filesystem::path& path, const std::vector<RawCounterfactual>& cfs) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "index,motif_donor,context_donor,label,seed,self_recombination\n";
  for (std::size_t i = 0; i < cfs.size(); ++i) {
    const auto& p = cfs[i].provenance;
    out << i << ',' << p.motif_donor << ',' << p.context_donor << ',' << p.label << ',' << p.seed << ','
        << (p.self_recombination ? 1 : 0) << '\n';
  }
}

}  // namespace motifcar
