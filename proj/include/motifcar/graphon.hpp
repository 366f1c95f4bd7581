#pragma once

// Step-function graphons: align-and-average estimation, sampling,
// binarization, homomorphism densities and motif/context partitioning.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "motifcar/error.hpp"
#include "motifcar/graph.hpp"
#include "motifcar/random.hpp"

namespace motifcar {

/// K x K symmetric step function; cell i covers [i/K, (i+1)/K).
struct Graphon {
  Eigen::MatrixXd W;

  Graphon() = default;
  explicit Graphon(Eigen::MatrixXd w) : W(std::move(w)) { validate(); }

  int K() const { return static_cast<int>(W.rows()); }

  void validate() const {
    if (W.rows() < 1 || W.rows() != W.cols()) throw ArgumentError("graphon: matrix must be square with K >= 1");
    for (Eigen::Index i = 0; i < W.rows(); ++i)
      for (Eigen::Index j = 0; j < W.cols(); ++j) {
        if (!(W(i, j) >= 0.0 && W(i, j) <= 1.0)) throw ArgumentError("graphon: entry outside [0,1]");
        if (W(i, j) != W(j, i)) throw ArgumentError("graphon: matrix is not symmetric");
      }
  }

  /// Leading min(K, k) x min(K, k) block.
  Graphon truncated(int k) const {
    const int m = std::min(K(), k);
    return Graphon(Eigen::MatrixXd(W.topLeftCorner(m, m)));
  }
};

/// Node order by descending degree, ties by ascending id: order[r] is the node at rank r.
inline std::vector<int> align_nodes(const Graph& g) {
  const auto deg = degree_sequence(g);
  std::vector<int> order(static_cast<std::size_t>(g.n()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return deg[static_cast<std::size_t>(a)] > deg[static_cast<std::size_t>(b)]; });
  return order;
}

/// Mean of the top-K degree-aligned adjacency blocks; graphs with fewer than K
/// nodes contribute zero-padded blocks. K defaults to the rounded mean node count.
inline Graphon estimate_graphon(std::span<const Graph> graphs, std::optional<int> K = std::nullopt) {
  if (graphs.empty()) throw ArgumentError("estimate_graphon: empty graph list");
  int k = 0;
  if (K) {
    if (*K < 1) throw ArgumentError("estimate_graphon: K must be >= 1");
    k = *K;
  } else {
    double total = 0;
    for (const Graph& g : graphs) total += g.n();
    k = std::max(1, static_cast<int>(std::lround(total / static_cast<double>(graphs.size()))));
  }
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k, k);
  for (const Graph& g : graphs) {
    const auto order = align_nodes(g);
    const int m = std::min(k, g.n());
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        if (g.has_edge(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)])) sum(i, j) += 1.0;
  }
  return Graphon(sum / static_cast<double>(graphs.size()));
}

/// Node i falls in cell floor(i K / n); each pair i < j is an independent
/// Bernoulli draw with the cell probability.
inline Graph sample_graph(const Graphon& w, int n, std::uint64_t seed) {
  if (n < 1) throw ArgumentError("sample_graph: n must be >= 1");
  Rng rng(seed);
  Graph g(n);
  const auto cell = [&](int i) { return static_cast<int>(static_cast<long>(i) * w.K() / n); };
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() < w.W(cell(i), cell(j))) g.add_edge(i, j);
  return g;
}

struct StochasticBinarize {
  std::uint64_t seed = 0;
};
struct ThresholdBinarize {
  double threshold = 0.5;
};
using BinarizeMode = std::variant<StochasticBinarize, ThresholdBinarize>;

/// 0/1 matrix from a graphon. Stochastic mode draws each (i, j), i <= j,
/// once and mirrors it; threshold mode keeps entries >= t.
inline Eigen::MatrixXi binarize(const Graphon& w, const BinarizeMode& mode) {
  const int k = w.K();
  Eigen::MatrixXi out = Eigen::MatrixXi::Zero(k, k);
  if (const auto* t = std::get_if<ThresholdBinarize>(&mode)) {
    if (!(t->threshold >= 0.0 && t->threshold <= 1.0)) throw ArgumentError("binarize: threshold outside [0,1]");
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) out(i, j) = w.W(i, j) >= t->threshold ? 1 : 0;
    return out;
  }
  Rng rng(std::get<StochasticBinarize>(mode).seed);
  for (int i = 0; i < k; ++i)
    for (int j = i; j < k; ++j) out(i, j) = out(j, i) = rng.uniform() < w.W(i, j) ? 1 : 0;
  return out;
}

/// Graph on K nodes whose edges are the off-diagonal ones of binarize(w, threshold t).
inline Graph threshold_graph(const Graphon& w, double t = 0.5) {
  return Graph::from_matrix(binarize(w, ThresholdBinarize{t}));
}

inline constexpr int kMaxHomomorphismMotif = 5;

/// t(F, G) = hom(F, G) / n^|F| with hom counted over all vertex maps
/// (not only injective ones). Exhaustive, so |F| is capped at 5.
inline double homomorphism_density(const Graph& motif, const Graph& g) {
  if (motif.n() > kMaxHomomorphismMotif)
    throw ArgumentError("homomorphism_density: motif has " + std::to_string(motif.n()) +
                        " nodes; exhaustive enumeration supports at most 5");
  if (g.n() < 1) throw ArgumentError("homomorphism_density: target graph is empty");
  const int k = motif.n();
  const int n = g.n();
  const auto edges = motif.edges();
  std::vector<int> map(static_cast<std::size_t>(k), 0);
  double hom = 0;
  double maps = 1;
  for (int i = 0; i < k; ++i) maps *= n;
  for (double c = 0; c < maps; c += 1) {
    bool ok = true;
    for (auto [a, b] : edges)
      if (!g.has_edge(map[static_cast<std::size_t>(a)], map[static_cast<std::size_t>(b)])) {
        ok = false;
        break;
      }
    if (ok) hom += 1;
    for (int i = 0; i < k; ++i) {  // odometer increment
      if (++map[static_cast<std::size_t>(i)] < n) break;
      map[static_cast<std::size_t>(i)] = 0;
    }
  }
  return hom / maps;
}

struct MotifContextPartition {
  std::vector<int> motif_nodes;    // aligned positions 0 .. min(K, n) - 1
  std::vector<int> context_nodes;  // the rest, in alignment order
  std::vector<int> alignment;      // align_nodes(g)

  bool context_empty() const { return context_nodes.empty(); }
};

inline MotifContextPartition partition_motif_context(const Graph& g, const Graphon& w) {
  if (g.n() < 1) throw ArgumentError("partition_motif_context: empty graph");
  MotifContextPartition p;
  p.alignment = align_nodes(g);
  const auto m = static_cast<std::size_t>(std::min(w.K(), g.n()));
  p.motif_nodes.assign(p.alignment.begin(), p.alignment.begin() + static_cast<std::ptrdiff_t>(m));
  p.context_nodes.assign(p.alignment.begin() + static_cast<std::ptrdiff_t>(m), p.alignment.end());
  return p;
}

/// Text format: first line K, then K rows of K values.
inline void save_graphon(const std::filesystem::path& path, const Graphon& w) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << w.K() << '\n' << std::setprecision(17);
  for (int i = 0; i < w.K(); ++i) {
    for (int j = 0; j < w.K(); ++j) out << (j ? " " : "") << w.W(i, j);
    out << '\n';
  }
}

inline Graphon load_graphon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open graphon file: " + path.string());
  int k = 0;
  if (!(in >> k) || k < 1) throw DataError(path.string() + ": bad graphon header");
  Eigen::MatrixXd w(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      if (!(in >> w(i, j))) throw DataError(path.string() + ": truncated graphon matrix");
  try {
    return Graphon(std::move(w));
  } catch (const ArgumentError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace motifcar
