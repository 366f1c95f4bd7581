#pragma once

// Generator state, edge relaxation and the refinement losses.
//
// Loss gradients are returned per batch item as dL/dP with every matrix entry
// treated independently (see gnn.hpp for the symmetric-pair convention).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "motifcar/error.hpp"
#include "motifcar/gnn.hpp"
#include "motifcar/graph.hpp"
#include "motifcar/graphon.hpp"
#include "motifcar/producer.hpp"
#include "motifcar/random.hpp"

namespace motifcar {

/// Learnable edge logits over a frozen raw counterfactual.
///
/// Only pairs in scaffold edges or cross candidates are trainable; every other
/// logit stays 0 and its relaxed edge is exactly 0.
struct GeneratorState {
  Eigen::MatrixXd logits;
  Eigen::MatrixXi trainable;
  double tau_g = 1e-4;
  double lambda_g = 0.8;
  int e_con_real = 0;
  RawCounterfactual scaffold;
  std::vector<int> alignment;  // align_nodes(scaffold.graph), frozen
  std::vector<int> context_nodes;

  int n() const { return scaffold.graph.n(); }
};

/// Default node similarity for initialization: 1 / (1 + |deg(i) - deg(j)|).
inline Eigen::MatrixXd structural_similarity(const Graph& g) {
  const auto d = degree_sequence(g);
  Eigen::MatrixXd s(g.n(), g.n());
  for (int i = 0; i < g.n(); ++i)
    for (int j = 0; j < g.n(); ++j)
      s(i, j) = 1.0 / (1.0 + std::abs(d[static_cast<std::size_t>(i)] - d[static_cast<std::size_t>(j)]));
  return s;
}

/// Logit 1 on motif-internal and context-internal scaffold edges,
/// gamma * lambda_g * E_con * S_ij / |C| on cross candidates, 0 elsewhere.
inline GeneratorState init_edge_logits(const RawCounterfactual& raw, double gamma, double lambda_g, int e_con_real,
                                       double tau_g = 1e-4, const Eigen::MatrixXd* similarity = nullptr) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ArgumentError("init_edge_logits: gamma must lie in [0,1]");
  if (e_con_real < 0) throw ArgumentError("init_edge_logits: E_con must be >= 0");
  if (!(tau_g > 0.0 && tau_g <= 1.0)) throw ArgumentError("init_edge_logits: tau_g must lie in (0,1]");
  if (raw.cross_candidates.empty()) throw ArgumentError("init_edge_logits: empty cross-candidate set");
  const int n = raw.graph.n();
  const Eigen::MatrixXd s = similarity ? *similarity : structural_similarity(raw.graph);
  if (s.rows() != n || s.cols() != n) throw ArgumentError("init_edge_logits: similarity size mismatch");

  GeneratorState st;
  st.tau_g = tau_g;
  st.lambda_g = lambda_g;
  st.e_con_real = e_con_real;
  st.scaffold = raw;
  st.alignment = align_nodes(raw.graph);
  st.context_nodes = raw.nodes_with(NodeRole::Context);
  st.logits = Eigen::MatrixXd::Zero(n, n);
  st.trainable = Eigen::MatrixXi::Zero(n, n);
  const double scale = gamma * lambda_g * e_con_real / static_cast<double>(raw.cross_candidates.size());
  for (auto [i, j] : raw.cross_candidates) {
    st.logits(i, j) = st.logits(j, i) = scale * s(i, j);
    st.trainable(i, j) = st.trainable(j, i) = 1;
  }
  for (auto [i, j] : raw.graph.edges()) {
    if (raw.is_cross(i, j)) continue;
    st.logits(i, j) = st.logits(j, i) = 1.0;
    st.trainable(i, j) = st.trainable(j, i) = 1;
  }
  return st;
}

/// P = sigmoid((W - X) / tau) on trainable pairs, exactly 0 elsewhere.
inline Eigen::MatrixXd relax_with_noise(const Eigen::MatrixXd& logits, const Eigen::MatrixXi& trainable,
                                        const Eigen::MatrixXd& noise, double tau) {
  const Eigen::Index n = logits.rows();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (trainable(i, j)) P(i, j) = P(j, i) = sigmoid((logits(i, j) - noise(i, j)) / tau);
  return P;
}

/// Symmetric uniform(0,1) noise, drawn on the upper triangle in row-major order.
inline Eigen::MatrixXd draw_noise(Eigen::Index n, Rng& rng) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) x(i, j) = x(j, i) = rng.uniform_open();
  return x;
}

struct Relaxed {
  Eigen::MatrixXd P;
  Eigen::MatrixXd noise;
};

inline Relaxed relax_edges(const GeneratorState& st, Rng& rng) {
  Relaxed r;
  r.noise = draw_noise(st.n(), rng);
  r.P = relax_with_noise(st.logits, st.trainable, r.noise, st.tau_g);
  return r;
}

/// Chains dL/dP (entrywise) to dL/dlogits for the symmetric logit parameters:
/// both (i, j) and (j, i) receive (G_ij + G_ji) * P_ij (1 - P_ij) / tau.
inline Eigen::MatrixXd logits_gradient(const Eigen::MatrixXd& dP, const Eigen::MatrixXd& P,
                                       const Eigen::MatrixXi& trainable, double tau) {
  const Eigen::Index n = P.rows();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (trainable(i, j)) g(i, j) = g(j, i) = (dP(i, j) + dP(j, i)) * P(i, j) * (1.0 - P(i, j)) / tau;
  return g;
}

struct BatchLoss {
  double value = 0;
  std::vector<Eigen::MatrixXd> d_P;
};

// ---------------------------------------------------------------------------
// Motif consistency

/// Batch mean of the aligned top-K blocks of P (zero padded for small graphs).
inline Eigen::MatrixXd generated_graphon(std::span<const Eigen::MatrixXd> P, std::span<const std::vector<int>> alignment,
                                         int K) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(K, K);
  for (std::size_t b = 0; b < P.size(); ++b) {
    const int m = std::min<int>(K, static_cast<int>(P[b].rows()));
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) w(i, j) += P[b](alignment[b][static_cast<std::size_t>(i)], alignment[b][static_cast<std::size_t>(j)]);
  }
  return w / static_cast<double>(P.size());
}

/// sum_ij (W_gen - W_rel)^2 with W_gen = generated_graphon(P, alignment, K).
inline BatchLoss motif_consistency_loss(std::span<const Eigen::MatrixXd> P, std::span<const std::vector<int>> alignment,
                                        const Graphon& w_rel) {
  if (P.empty() || P.size() != alignment.size()) throw ArgumentError("motif loss: empty or mismatched batch");
  const int K = w_rel.K();
  const Eigen::MatrixXd diff = generated_graphon(P, alignment, K) - w_rel.W;
  BatchLoss out;
  out.value = diff.squaredNorm();
  const double scale = 2.0 / static_cast<double>(P.size());
  for (std::size_t b = 0; b < P.size(); ++b) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(P[b].rows(), P[b].cols());
    const int m = std::min<int>(K, static_cast<int>(P[b].rows()));
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        g(alignment[b][static_cast<std::size_t>(i)], alignment[b][static_cast<std::size_t>(j)]) = scale * diff(i, j);
    out.d_P.push_back(std::move(g));
  }
  return out;
}

/// Overload estimating W_rel from the realistic graphs at resolution K.
inline BatchLoss motif_consistency_loss(std::span<const Eigen::MatrixXd> P, std::span<const std::vector<int>> alignment,
                                        std::span<const Graph> real, int K) {
  if (real.empty()) throw ArgumentError("motif loss: no realistic graphs");
  return motif_consistency_loss(P, alignment, estimate_graphon(real, K));
}

// ---------------------------------------------------------------------------
// Contextual loss

/// Normalized degree entropy -(1/ln n) sum_k p_k ln p_k with p_k = d_k / sum d.
/// Zero-degree terms contribute 0; n = 1 or sum d = 0 gives 0. When `grad` is
/// given it receives dE/dd_k (0 for zero-degree nodes).
inline double degree_entropy(std::span<const double> degrees, std::vector<double>* grad = nullptr) {
  const std::size_t n = degrees.size();
  if (grad) grad->assign(n, 0.0);
  if (n == 0) throw ArgumentError("degree_entropy: empty degree vector");
  double total = 0;
  for (double d : degrees) total += d;
  if (n == 1 || total <= 0.0) return 0.0;
  const double log_n = std::log(static_cast<double>(n));
  double plogp = 0;
  for (double d : degrees)
    if (d > 0.0) plogp += (d / total) * std::log(d / total);
  if (grad)
    for (std::size_t k = 0; k < n; ++k)
      if (degrees[k] > 0.0) (*grad)[k] = -(std::log(degrees[k] / total) - plogp) / (total * log_n);
  return -plogp / log_n;
}

inline double degree_entropy(const Graph& g) {
  std::vector<double> d;
  for (int v : degree_sequence(g)) d.push_back(v);
  return degree_entropy(d);
}

/// sum_i |E_gen^i - E_rel^i| with generated degrees taken as row sums of P
/// over the item's context nodes.
inline BatchLoss contextual_loss(std::span<const Eigen::MatrixXd> P, std::span<const std::vector<int>> context_nodes,
                                 std::span<const double> real_entropy) {
  if (P.empty() || P.size() != context_nodes.size() || P.size() != real_entropy.size())
    throw ArgumentError("contextual loss: batch lists differ in length");
  BatchLoss out;
  for (std::size_t b = 0; b < P.size(); ++b) {
    const auto& ctx = context_nodes[b];
    std::vector<double> deg(ctx.size(), 0.0);
    for (std::size_t a = 0; a < ctx.size(); ++a)
      for (int v : ctx) deg[a] += P[b](ctx[a], v);
    std::vector<double> dE;
    const double e = ctx.empty() ? 0.0 : degree_entropy(deg, &dE);
    const double diff = e - real_entropy[b];
    out.value += std::abs(diff);
    const double sign = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(P[b].rows(), P[b].cols());
    for (std::size_t a = 0; a < ctx.size(); ++a)
      for (int v : ctx) g(ctx[a], v) = sign * dE[a];
    out.d_P.push_back(std::move(g));
  }
  return out;
}

/// Overload taking the realistic context subgraphs directly.
inline BatchLoss contextual_loss(std::span<const Eigen::MatrixXd> P, std::span<const std::vector<int>> context_nodes,
                                 std::span<const Graph> real_contexts) {
  std::vector<double> e;
  for (const Graph& g : real_contexts) e.push_back(g.n() ? degree_entropy(g) : 0.0);
  return contextual_loss(P, context_nodes, e);
}

// ---------------------------------------------------------------------------
// Connection loss

/// (1/n) sum_k |lambda_g E_con^k - sum_{(i,j) in C_k} P^k_ij|, each candidate pair counted once.
inline BatchLoss connection_loss(std::span<const Eigen::MatrixXd> P, std::span<const std::vector<Edge>> candidates,
                                 double lambda_g, std::span<const int> e_con_real) {
  if (P.empty() || P.size() != candidates.size() || P.size() != e_con_real.size())
    throw ArgumentError("connection loss: batch lists differ in length");
  BatchLoss out;
  const double inv_n = 1.0 / static_cast<double>(P.size());
  for (std::size_t b = 0; b < P.size(); ++b) {
    double p_gen = 0;
    for (auto [i, j] : candidates[b]) p_gen += P[b](i, j);
    const double diff = lambda_g * e_con_real[b] - p_gen;
    out.value += inv_n * std::abs(diff);
    const double sign = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(P[b].rows(), P[b].cols());
    for (auto [i, j] : candidates[b]) g(i, j) = -sign * inv_n;
    out.d_P.push_back(std::move(g));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Combined and adversarial losses

struct LossWeights {
  double motif = 1.0;    // lambda_1
  double context = 0.9;  // lambda_2
  double connection = 0.6;  // lambda_3

  void validate() const {
    if (motif < 0 || context < 0 || connection < 0) throw ArgumentError("loss weights must be non-negative");
  }
};

inline double regularization_loss(double l_motif, double l_context, double l_con, const LossWeights& w) {
  w.validate();
  return w.motif * l_motif + w.context * l_context + w.connection * l_con;
}

inline constexpr double kBceEpsilon = 1e-7;

/// -l log p - (1 - l) log(1 - p) with p clamped to [eps, 1 - eps].
inline double bce_loss(double p, int label) {
  const double q = std::clamp(p, kBceEpsilon, 1.0 - kBceEpsilon);
  return label ? -std::log(q) : -std::log(1.0 - q);
}

/// d bce / d logit for p = sigmoid(logit); zero where the clamp is active.
inline double bce_grad_logit(double p, int label) {
  if (p < kBceEpsilon || p > 1.0 - kBceEpsilon) return 0.0;
  const double d_p = label ? -1.0 / p : 1.0 / (1.0 - p);
  return d_p * p * (1.0 - p);
}

/// Alias with the discriminator's naming.
inline double discriminator_loss(double p, int label) { return bce_loss(p, label); }

/// -log(p_gen) + reg_sign * L_reg. reg_sign = -1 reproduces the printed
/// formula; +1 (the default elsewhere) minimizes the regularizer.
inline double generator_loss(double p_gen, double l_reg, double reg_sign = -1.0) {
  return bce_loss(p_gen, 1) + reg_sign * l_reg;
}

}  // namespace motifcar
