#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "motifcar/error.hpp"

namespace motifcar {

using Edge = std::pair<int, int>;

/// Undirected simple graph over dense 0-based node ids.
///
/// The adjacency is a symmetric binary n x n matrix with a zero diagonal; every
/// mutator preserves that. n = 0 is the empty-graph sentinel returned by
/// induced_subgraph on an empty node set.
class Graph {
 public:
  Graph() = default;
  explicit Graph(int n) : n_(n), adj_(static_cast<std::size_t>(n) * n, 0) {
    if (n < 0) throw ArgumentError("Graph: negative node count");
  }

  static Graph from_edges(int n, std::span<const Edge> edges) {
    Graph g(n);
    for (auto [u, v] : edges) g.add_edge(u, v);
    return g;
  }

  /// Builds from any square 0/1 matrix; entries are symmetrized (OR) and the
  /// diagonal is dropped.
  template <class Derived>
  static Graph from_matrix(const Eigen::MatrixBase<Derived>& m) {
    if (m.rows() != m.cols()) throw ArgumentError("Graph::from_matrix: matrix is not square");
    Graph g(static_cast<int>(m.rows()));
    for (int i = 0; i < g.n_; ++i)
      for (int j = i + 1; j < g.n_; ++j)
        if (m(i, j) != 0 || m(j, i) != 0) g.add_edge(i, j);
    return g;
  }

  int n() const { return n_; }
  bool empty() const { return n_ == 0; }

  bool has_edge(int i, int j) const { return adj_[index(i, j)] != 0; }

  /// Returns false (and does nothing) for self-loops and duplicates.
  bool add_edge(int i, int j) {
    check_node(i);
    check_node(j);
    if (i == j || has_edge(i, j)) return false;
    adj_[index(i, j)] = 1;
    adj_[index(j, i)] = 1;
    return true;
  }

  void remove_edge(int i, int j) {
    adj_[index(i, j)] = 0;
    adj_[index(j, i)] = 0;
  }

  int degree(int i) const {
    int d = 0;
    for (int j = 0; j < n_; ++j) d += adj_[index(i, j)];
    return d;
  }

  int edge_count() const {
    int m = 0;
    for (std::uint8_t a : adj_) m += a;
    return m / 2;
  }

  /// Edges (i, j) with i < j in row-major order.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (int i = 0; i < n_; ++i)
      for (int j = i + 1; j < n_; ++j)
        if (has_edge(i, j)) out.emplace_back(i, j);
    return out;
  }

  Eigen::MatrixXd adjacency() const {
    Eigen::MatrixXd a(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) a(i, j) = adj_[index(i, j)];
    return a;
  }

  const std::optional<Eigen::MatrixXd>& node_features() const { return features_; }
  void set_node_features(Eigen::MatrixXd f) {
    if (f.rows() != n_) throw ArgumentError("Graph: feature row count differs from node count");
    features_ = std::move(f);
  }

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.n_ == b.n_ && a.adj_ == b.adj_;
  }

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(j);
  }
  void check_node(int i) const {
    if (i < 0 || i >= n_) throw ArgumentError("Graph: node id " + std::to_string(i) + " out of range");
  }

  int n_ = 0;
  std::vector<std::uint8_t> adj_;
  std::optional<Eigen::MatrixXd> features_;
};

inline std::vector<int> degree_sequence(const Graph& g) {
  std::vector<int> d(static_cast<std::size_t>(g.n()));
  for (int i = 0; i < g.n(); ++i) d[static_cast<std::size_t>(i)] = g.degree(i);
  return d;
}

/// Restricts g to `nodes`; the k-th listed node becomes id k.
inline Graph induced_subgraph(const Graph& g, std::span<const int> nodes) {
  Graph sub(static_cast<int>(nodes.size()));
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(g.n()), 0);
  for (int v : nodes) {
    if (v < 0 || v >= g.n()) throw ArgumentError("induced_subgraph: node " + std::to_string(v) + " out of range");
    if (seen[static_cast<std::size_t>(v)]++) throw ArgumentError("induced_subgraph: node " + std::to_string(v) + " listed twice");
  }
  for (std::size_t a = 0; a < nodes.size(); ++a)
    for (std::size_t b = a + 1; b < nodes.size(); ++b)
      if (g.has_edge(nodes[a], nodes[b]))
        sub.add_edge(static_cast<int>(a), static_cast<int>(b));
  return sub;
}

/// Relabels so that new node k is old node order[k].
inline Graph permuted(const Graph& g, std::span<const int> order) {
  if (static_cast<int>(order.size()) != g.n()) throw ArgumentError("permuted: order size mismatch");
  return induced_subgraph(g, order);
}

/// One-hot degree features, degrees >= max_bucket - 1 land in the last bucket.
inline Eigen::MatrixXd degree_one_hot(std::span<const double> degrees, int max_bucket) {
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(degrees.size()), max_bucket);
  for (std::size_t i = 0; i < degrees.size(); ++i) {
    const long d = std::lround(std::max(0.0, degrees[i]));
    f(static_cast<Eigen::Index>(i), std::min<long>(d, max_bucket - 1)) = 1.0;
  }
  return f;
}

/// Node features of g: its stored features, else the one-hot degree default.
inline Eigen::MatrixXd node_features_or_default(const Graph& g, int max_bucket) {
  if (g.node_features()) return *g.node_features();
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(g.n()));
  for (int i = 0; i < g.n(); ++i) d.push_back(g.degree(i));
  return degree_one_hot(d, max_bucket);
}

struct Split {
  std::vector<int> train;
  std::vector<int> validation;
  std::vector<int> test;

  friend bool operator==(const Split&, const Split&) = default;
};

/// Graphs plus class labels, the designated anomaly class and a split.
///
/// `roles` is optional ground truth from the synthetic generator: roles[g][v]
/// is 1 when node v of graph g belongs to the planted motif.
struct LabeledDataset {
  std::string name;
  std::vector<Graph> graphs;
  std::vector<int> labels;
  int anomaly_class = 0;
  Split split;
  std::vector<std::vector<std::uint8_t>> roles;

  std::size_t size() const { return graphs.size(); }

  std::vector<int> classes() const {
    std::vector<int> c = labels;
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
    return c;
  }

  void put_all_in_train() {
    split = Split{};
    for (int i = 0; i < static_cast<int>(graphs.size()); ++i) split.train.push_back(i);
  }

  /// Throws DataError when an invariant is violated.
  void validate() const {
    if (graphs.size() != labels.size()) throw DataError("dataset: graph and label counts differ");
    if (!roles.empty() && roles.size() != graphs.size()) throw DataError("dataset: role metadata count differs");
    for (int l : labels)
      if (l < 0) throw DataError("dataset: negative class label");
    if (!graphs.empty() && std::find(labels.begin(), labels.end(), anomaly_class) == labels.end())
      throw DataError("dataset: anomaly class " + std::to_string(anomaly_class) + " absent from labels");
    std::vector<int> seen(graphs.size(), 0);
    for (const auto* part : {&split.train, &split.validation, &split.test})
      for (int i : *part) {
        if (i < 0 || i >= static_cast<int>(graphs.size())) throw DataError("dataset: split index out of range");
        if (seen[static_cast<std::size_t>(i)]++) throw DataError("dataset: split sets overlap");
      }
    for (int s : seen)
      if (s == 0) throw DataError("dataset: split does not cover every graph");
  }

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

}  // namespace motifcar
