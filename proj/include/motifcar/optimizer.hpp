#pragma once

// Adversarial refinement of raw counterfactuals: per-item generator logits,
// a shared GNN discriminator, alternating updates.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "motifcar/error.hpp"
#include "motifcar/gnn.hpp"
#include "motifcar/graph.hpp"
#include "motifcar/graphon.hpp"
#include "motifcar/losses.hpp"
#include "motifcar/producer.hpp"
#include "motifcar/random.hpp"

namespace motifcar {

struct TrainConfig {
  int steps = 500;
  int gen_steps_per_iter = 1;
  int disc_steps_per_iter = 1;
  double learning_rate = 1e-3;
  int batch_size = 8;
  LossWeights weights;
  double gamma = 0.75;
  double lambda_g = 0.8;
  double tau_g = 1e-4;
  double reg_sign = 1.0;
  bool frozen_noise = false;
  int hidden_dim = 32;
  int head_layers = 2;
  int feature_buckets = 32;
  std::uint64_t seed = 0;

  void validate() const {
    if (steps < 1 || gen_steps_per_iter < 1 || disc_steps_per_iter < 1 || batch_size < 1)
      throw ArgumentError("train config: step counts and batch size must be >= 1");
    if (!(learning_rate > 0)) throw ArgumentError("train config: learning rate must be positive");
    weights.validate();
    if (!(gamma >= 0 && gamma <= 1)) throw ArgumentError("train config: gamma must lie in [0,1]");
    if (!(lambda_g >= 0)) throw ArgumentError("train config: lambda_g must be >= 0");
    if (!(tau_g > 0 && tau_g <= 1)) throw ArgumentError("train config: tau_g must lie in (0,1]");
    if (reg_sign != 1.0 && reg_sign != -1.0) throw ArgumentError("train config: reg_sign must be +1 or -1");
    if (hidden_dim < 1 || head_layers < 1 || feature_buckets < 1) throw ArgumentError("train config: bad model shape");
  }
};

/// A raw counterfactual plus the statistics measured on its context donor H.
struct RefineItem {
  RawCounterfactual raw;
  int e_con_real = 0;              // H's motif-context edges under its partition
  double real_context_entropy = 0; // degree entropy of H's context subgraph
};

inline RefineItem make_refine_item(const RawCounterfactual& raw, const Graph& H, const Graphon& Wh) {
  RefineItem item;
  item.raw = raw;
  const auto part = partition_motif_context(H, Wh);
  for (int u : part.motif_nodes)
    for (int v : part.context_nodes) item.e_con_real += H.has_edge(u, v) ? 1 : 0;
  if (!part.context_nodes.empty()) item.real_context_entropy = degree_entropy(induced_subgraph(H, part.context_nodes));
  return item;
}

struct TraceRow {
  int step = 0;
  double l_gen = 0, l_dis = 0, l_motif = 0, l_context = 0, l_con = 0;
  double p_real_mean = 0, p_gen_mean = 0;
};

struct RefineResult {
  std::vector<RawCounterfactual> refined;
  std::vector<GeneratorState> generators;
  GnnParams discriminator;
  std::vector<TraceRow> trace;
};

namespace detail {

inline void check_finite(double v, int step, const char* component) {
  if (!std::isfinite(v))
    throw NumericalError("step " + std::to_string(step) + ": " + component + " is not finite");
}

inline std::vector<double> soft_degrees(const Eigen::MatrixXd& a) {
  std::vector<double> d(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) d[static_cast<std::size_t>(i)] = a.row(i).sum();
  return d;
}

/// Batch of distinct indices when count >= k, else sampling with replacement.
inline std::vector<std::size_t> draw_batch(Rng& rng, std::size_t count, std::size_t k) {
  if (k <= count) return rng.sample_without_replacement(count, k);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(rng.below(count));
  return out;
}

}  // namespace detail

/// One generator batch: relaxed graphs plus the per-item targets.
struct GeneratorBatch {
  std::vector<Eigen::MatrixXd> P;
  std::vector<std::vector<int>> alignment;
  std::vector<std::vector<int>> context_nodes;
  std::vector<std::vector<Edge>> candidates;
  std::vector<double> real_context_entropy;
  std::vector<int> e_con;
  // Discriminator node features; empty = degree one-hot of the rounded soft
  // degrees of P (treated as constants, no gradient).
  std::vector<Eigen::MatrixXd> features;
};

struct GeneratorObjective {
  double adversarial = 0;  // mean -log p_gen
  double l_motif = 0, l_context = 0, l_con = 0, l_reg = 0;
  double l_gen = 0;        // adversarial + reg_sign * l_reg
  double p_mean = 0;
  std::vector<Eigen::MatrixXd> d_P;  // dL_gen / dP per item, entries independent
};

inline GeneratorObjective generator_objective(const GeneratorBatch& b, const GnnParams& disc, const Graphon& w_rel,
                                              const TrainConfig& cfg) {
  const BatchLoss lm = motif_consistency_loss(b.P, b.alignment, w_rel);
  const BatchLoss lc = contextual_loss(b.P, b.context_nodes, b.real_context_entropy);
  const BatchLoss lk = connection_loss(b.P, b.candidates, cfg.lambda_g, b.e_con);
  GeneratorObjective o;
  o.l_motif = lm.value;
  o.l_context = lc.value;
  o.l_con = lk.value;
  o.l_reg = regularization_loss(lm.value, lc.value, lk.value, cfg.weights);
  const double inv_b = 1.0 / static_cast<double>(b.P.size());
  for (std::size_t k = 0; k < b.P.size(); ++k) {
    const Eigen::MatrixXd feat =
        b.features.empty() ? degree_one_hot(detail::soft_degrees(b.P[k]), cfg.feature_buckets) : b.features[k];
    const GraphForward f = forward_graph(b.P[k], feat, disc);
    o.adversarial += inv_b * bce_loss(f.prob, 1);
    o.p_mean += inv_b * f.prob;
    Eigen::MatrixXd dP = backward_graph(f, disc, inv_b * bce_grad_logit(f.prob, 1)).d_adj;
    dP += cfg.reg_sign * (cfg.weights.motif * lm.d_P[k] + cfg.weights.context * lc.d_P[k] +
                          cfg.weights.connection * lk.d_P[k]);
    o.d_P.push_back(std::move(dP));
  }
  o.l_gen = o.adversarial + cfg.reg_sign * o.l_reg;
  return o;
}

/// Edge (i, j) survives iff it is trainable and logit >= x_ij, i.e. P >= 0.5.
inline RawCounterfactual extract_refined(const GeneratorState& st, const Eigen::MatrixXd& noise) {
  RawCounterfactual out = st.scaffold;
  out.graph = Graph(st.n());
  for (int i = 0; i < st.n(); ++i)
    for (int j = i + 1; j < st.n(); ++j)
      if (st.trainable(i, j) && st.logits(i, j) - noise(i, j) >= 0.0) out.graph.add_edge(i, j);
  return out;
}

/// Alternating generator/discriminator training over `items`, with `reals`
/// as the realistic graphs and `w_rel` their graphon at the motif resolution.
inline RefineResult train_gan(std::span<const RefineItem> items, std::span<const Graph> reals, const Graphon& w_rel,
                              const TrainConfig& cfg) {
  cfg.validate();
  if (items.empty() || reals.empty()) throw ArgumentError("train_gan: no counterfactuals or no realistic graphs");

  RefineResult res;
  for (const auto& it : items)
    res.generators.push_back(init_edge_logits(it.raw, cfg.gamma, cfg.lambda_g, it.e_con_real, cfg.tau_g));
  GnnShape shape{cfg.feature_buckets, cfg.hidden_dim, 2, cfg.head_layers, false};
  res.discriminator = init_gnn(shape, derive_seed(cfg.seed, "gan-discriminator"));

  std::vector<Eigen::MatrixXd> real_adj, real_feat;
  for (const Graph& g : reals) {
    real_adj.push_back(g.adjacency());
    real_feat.push_back(node_features_or_default(g, cfg.feature_buckets));
  }

  const AdamConfig adam_cfg{cfg.learning_rate};
  std::vector<Adam> gen_opt(items.size(), Adam(adam_cfg));
  Adam dis_opt(adam_cfg);
  std::vector<Eigen::MatrixXd> frozen;
  if (cfg.frozen_noise) {
    Rng rng(derive_seed(cfg.seed, "gan-frozen-noise"));
    for (const auto& st : res.generators) frozen.push_back(draw_noise(st.n(), rng));
  }
  Rng rng(derive_seed(cfg.seed, "gan-train"));
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);

  for (int step = 0; step < cfg.steps; ++step) {
    TraceRow row;
    row.step = step;
    std::vector<Eigen::MatrixXd> P;

    for (int gs = 0; gs < cfg.gen_steps_per_iter; ++gs) {
      const auto batch = detail::draw_batch(rng, items.size(), batch_size);
      P.clear();
      std::vector<std::vector<int>> align, ctx;
      std::vector<std::vector<Edge>> cand;
      std::vector<double> real_e;
      std::vector<int> e_con;
      for (std::size_t b : batch) {
        const auto& st = res.generators[b];
        const Eigen::MatrixXd noise = cfg.frozen_noise ? frozen[b] : draw_noise(st.n(), rng);
        P.push_back(relax_with_noise(st.logits, st.trainable, noise, st.tau_g));
        align.push_back(st.alignment);
        ctx.push_back(st.context_nodes);
        cand.push_back(st.scaffold.cross_candidates);
        real_e.push_back(items[b].real_context_entropy);
        e_con.push_back(items[b].e_con_real);
      }
      GeneratorBatch gb{P, align, ctx, cand, real_e, e_con, {}};
      const GeneratorObjective obj = generator_objective(gb, res.discriminator, w_rel, cfg);
      row.l_motif = obj.l_motif;
      row.l_context = obj.l_context;
      row.l_con = obj.l_con;
      row.l_gen = obj.l_gen;
      row.p_gen_mean = obj.p_mean;
      detail::check_finite(row.l_motif, step, "l_motif");
      detail::check_finite(row.l_context, step, "l_context");
      detail::check_finite(row.l_con, step, "l_con");
      detail::check_finite(row.l_gen, step, "l_gen");

      for (std::size_t k = 0; k < batch.size(); ++k) {
        auto& st = res.generators[batch[k]];
        Eigen::MatrixXd g = logits_gradient(obj.d_P[k], P[k], st.trainable, st.tau_g);
        if (!g.allFinite()) throw NumericalError("step " + std::to_string(step) + ": generator gradient is not finite");
        gen_opt[batch[k]].step({&st.logits}, {&g});
        st.logits = st.logits.cwiseProduct(st.trainable.cast<double>());
      }
    }

    // Discriminator: realistic graphs labelled 1, the generator's last relaxed
    // batch (detached) labelled 0.
    for (int ds = 0; ds < cfg.disc_steps_per_iter; ++ds) {
      const auto real_batch = detail::draw_batch(rng, reals.size(), batch_size);
      GnnParams grad = res.discriminator.zeros_like();
      const double inv = 1.0 / static_cast<double>(real_batch.size() + P.size());
      double l_dis = 0, p_real = 0, p_gen = 0;
      for (std::size_t r : real_batch) {
        const GraphForward f = forward_graph(real_adj[r], real_feat[r], res.discriminator);
        l_dis += inv * discriminator_loss(f.prob, 1);
        p_real += f.prob / static_cast<double>(real_batch.size());
        accumulate(grad, backward_graph(f, res.discriminator, inv * bce_grad_logit(f.prob, 1)).params);
      }
      for (const auto& p : P) {
        const Eigen::MatrixXd feat = degree_one_hot(detail::soft_degrees(p), cfg.feature_buckets);
        const GraphForward f = forward_graph(p, feat, res.discriminator);
        l_dis += inv * discriminator_loss(f.prob, 0);
        p_gen += f.prob / static_cast<double>(P.size());
        accumulate(grad, backward_graph(f, res.discriminator, inv * bce_grad_logit(f.prob, 0)).params);
      }
      detail::check_finite(l_dis, step, "l_dis");
      dis_opt.step(res.discriminator, grad);
      if (ds == 0) {
        row.l_dis = l_dis;
        row.p_real_mean = p_real;
        row.p_gen_mean = p_gen;
      }
    }
    res.trace.push_back(row);
  }

  for (std::size_t i = 0; i < res.generators.size(); ++i) {
    Rng ex(derive_seed(cfg.seed, "gan-extract", i));
    res.refined.push_back(extract_refined(res.generators[i], draw_noise(res.generators[i].n(), ex)));
  }
  return res;
}

inline void write_trace_csv(const std::filesystem::path& path, std::span<const TraceRow> trace) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "step,l_gen,l_dis,l_motif,l_context,l_con,p_real_mean,p_gen_mean\n" << std::setprecision(10);
  for (const auto& r : trace)
    out << r.step << ',' << r.l_gen << ',' << r.l_dis << ',' << r.l_motif << ',' << r.l_context << ',' << r.l_con
        << ',' << r.p_real_mean << ',' << r.p_gen_mean << '\n';
}

/// Discriminator parameters followed by every generator's logits.
inline void save_gan_checkpoint(const std::filesystem::path& path, const RefineResult& res) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << kCheckpointMagic << " 1\n";
  write_gnn(out, "discriminator", res.discriminator);
  out << "generators " << res.generators.size() << '\n';
  for (std::size_t i = 0; i < res.generators.size(); ++i)
    write_tensor(out, "generator" + std::to_string(i) + ".logits", res.generators[i].logits);
}

struct GanCheckpoint {
  GnnParams discriminator;
  std::vector<Eigen::MatrixXd> logits;
};

inline GanCheckpoint load_gan_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kCheckpointMagic || version != 1)
    throw DataError(path.string() + ": not a version-1 checkpoint");
  GanCheckpoint c;
  c.discriminator = read_gnn(in);
  std::string tag;
  std::size_t count = 0;
  if (!(in >> tag >> count) || tag != "generators") throw DataError(path.string() + ": expected generators block");
  for (std::size_t i = 0; i < count; ++i) c.logits.push_back(read_tensor(in));
  return c;
}

}  // namespace motifcar
