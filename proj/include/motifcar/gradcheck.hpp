#pragma once

// Finite-difference verification of every hand-derived gradient.
//
// Each check draws random points, compares the analytic gradient with central
// differences over every coordinate, and reports the worst norm-relative
// error ||g_analytic - g_numeric|| / max(||g_analytic||, ||g_numeric||).
// Points too close to a |x| kink are redrawn.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "motifcar/gnn.hpp"
#include "motifcar/graph.hpp"
#include "motifcar/graphon.hpp"
#include "motifcar/losses.hpp"
#include "motifcar/optimizer.hpp"
#include "motifcar/producer.hpp"
#include "motifcar/random.hpp"

namespace motifcar {

struct GradcheckOptions {
  int points = 20;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
};

struct GradcheckResult {
  std::string op;
  int points = 0;
  double max_error = 0;
  bool passed = false;
};

namespace gc {

using Vec = Eigen::VectorXd;

inline double relative_error(const Vec& a, const Vec& n) {
  const double scale = std::max(a.norm(), n.norm());
  if (scale < 1e-12) return 0.0;
  return (a - n).norm() / scale;
}

inline Vec central_difference(const std::function<double(const Vec&)>& f, Vec x, double h) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double x0 = x(i);
    x(i) = x0 + h;
    const double up = f(x);
    x(i) = x0 - h;
    const double down = f(x);
    x(i) = x0;
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

/// A check instance: a point plus the value and analytic gradient at any x.
struct Problem {
  Vec x;
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
};

/// `make` returns nullopt to reject a draw (too close to a kink).
inline GradcheckResult run(const std::string& name, const GradcheckOptions& opt,
                           const std::function<std::optional<Problem>(Rng&)>& make) {
  GradcheckResult r;
  r.op = name;
  Rng rng(derive_seed(opt.seed, "gradcheck-" + name));
  int attempts = 0;
  while (r.points < opt.points) {
    if (++attempts > 50 * opt.points) throw NumericalError("gradcheck " + name + ": could not draw valid points");
    std::optional<Problem> p = make(rng);
    if (!p) continue;
    const Vec a = p->gradient(p->x);
    const Vec n = central_difference(p->value, p->x, opt.step);
    r.max_error = std::max(r.max_error, relative_error(a, n));
    ++r.points;
  }
  r.passed = r.max_error <= opt.tolerance;
  return r;
}

inline Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double lo, double hi) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = lo + (hi - lo) * rng.uniform();
  return m;
}

inline Eigen::MatrixXd random_symmetric(Rng& rng, Eigen::Index n, double lo, double hi) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) m(i, j) = m(j, i) = lo + (hi - lo) * rng.uniform();
  return m;
}

// Flatten / unflatten lists of matrices.
inline Vec flatten(const std::vector<const Eigen::MatrixXd*>& ms) {
  Eigen::Index total = 0;
  for (const auto* m : ms) total += m->size();
  Vec v(total);
  Eigen::Index k = 0;
  for (const auto* m : ms) {
    v.segment(k, m->size()) = Eigen::Map<const Vec>(m->data(), m->size());
    k += m->size();
  }
  return v;
}

inline void unflatten(const Vec& v, const std::vector<Eigen::MatrixXd*>& ms) {
  Eigen::Index k = 0;
  for (auto* m : ms) {
    Eigen::Map<Vec>(m->data(), m->size()) = v.segment(k, m->size());
    k += m->size();
  }
}

template <class T>
std::vector<const T*> as_const(const std::vector<T*>& v) {
  return {v.begin(), v.end()};
}

inline std::vector<Eigen::MatrixXd> split_matrices(const Vec& v, const std::vector<Eigen::Index>& sizes) {
  std::vector<Eigen::MatrixXd> out;
  Eigen::Index k = 0;
  for (Eigen::Index n : sizes) {
    out.push_back(Eigen::Map<const Eigen::MatrixXd>(v.data() + k, n, n));
    k += n * n;
  }
  return out;
}

inline Vec join_matrices(const std::vector<Eigen::MatrixXd>& ms) {
  std::vector<const Eigen::MatrixXd*> ptr;
  for (const auto& m : ms) ptr.push_back(&m);
  return flatten(ptr);
}

inline std::vector<int> random_permutation(Rng& rng, int n) {
  std::vector<int> p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
  rng.shuffle(p);
  return p;
}

inline GnnParams small_gnn(Rng& rng, int in, int hidden, int head_layers) {
  GnnParams p = init_gnn({in, hidden, 2, head_layers, false}, rng.next());
  // Non-zero biases so relu boundaries are not aligned with the origin.
  for (auto* group : {&p.encoder, &p.head})
    for (auto& l : *group) l.bias = random_matrix(rng, 1, l.bias.cols(), -0.3, 0.3);
  return p;
}

/// Small raw counterfactual: motif nodes first, every motif x context pair a candidate.
inline RawCounterfactual small_scaffold(Rng& rng, int motif, int context) {
  RawCounterfactual cf;
  const int n = motif + context;
  cf.graph = Graph(n);
  for (int i = 0; i < n; ++i) {
    cf.roles.push_back(i < motif ? NodeRole::Motif : NodeRole::Context);
    cf.source_ids.push_back(i);
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if ((i < motif) == (j < motif) && rng.bernoulli(0.6)) cf.graph.add_edge(i, j);
  for (int a = 0; a < motif; ++a)
    for (int b = motif; b < n; ++b) cf.cross_candidates.emplace_back(a, b);
  return cf;
}

inline std::vector<int> context_of(const RawCounterfactual& cf) { return cf.nodes_with(NodeRole::Context); }

inline double context_entropy(const Eigen::MatrixXd& P, const std::vector<int>& ctx) {
  std::vector<double> deg(ctx.size(), 0.0);
  for (std::size_t a = 0; a < ctx.size(); ++a)
    for (int v : ctx) deg[a] += P(ctx[a], v);
  return degree_entropy(deg);
}

}  // namespace gc

inline GradcheckResult gradcheck_motif_loss(const GradcheckOptions& opt) {
  return gc::run("motif_loss", opt, [](Rng& rng) -> std::optional<gc::Problem> {
    const std::vector<Eigen::Index> sizes{6, 5, 3};
    const int K = 4;
    std::vector<std::vector<int>> align;
    std::vector<Eigen::MatrixXd> P;
    for (auto n : sizes) {
      align.push_back(gc::random_permutation(rng, static_cast<int>(n)));
      P.push_back(gc::random_symmetric(rng, n, 0, 1));
    }
    Graphon w{gc::random_symmetric(rng, K, 0, 1)};
    auto value = [=](const gc::Vec& x) { return motif_consistency_loss(gc::split_matrices(x, sizes), align, w).value; };
    auto grad = [=](const gc::Vec& x) { return gc::join_matrices(motif_consistency_loss(gc::split_matrices(x, sizes), align, w).d_P); };
    return gc::Problem{gc::join_matrices(P), value, grad};
  });
}

inline GradcheckResult gradcheck_degree_entropy(const GradcheckOptions& opt) {
  return gc::run("degree_entropy", opt, [](Rng& rng) -> std::optional<gc::Problem> {
    const int n = 2 + static_cast<int>(rng.below(6));
    gc::Vec d(n);
    for (int i = 0; i < n; ++i) d(i) = 0.2 + 3.0 * rng.uniform();
    auto value = [](const gc::Vec& x) { return degree_entropy(std::span<const double>(x.data(), static_cast<std::size_t>(x.size()))); };
    auto grad = [](const gc::Vec& x) {
      std::vector<double> g;
      degree_entropy(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), &g);
      return gc::Vec(Eigen::Map<const gc::Vec>(g.data(), static_cast<Eigen::Index>(g.size())));
    };
    return gc::Problem{d, value, grad};
  });
}

inline GradcheckResult gradcheck_contextual_loss(const GradcheckOptions& opt) {
  return gc::run("contextual_loss", opt, [](Rng& rng) -> std::optional<gc::Problem> {
    const std::vector<Eigen::Index> sizes{7, 6};
    std::vector<Eigen::MatrixXd> P;
    std::vector<std::vector<int>> ctx{{2, 3, 4, 5, 6}, {1, 3, 5}};
    std::vector<double> real;
    for (std::size_t b = 0; b < sizes.size(); ++b) {
      P.push_back(gc::random_symmetric(rng, sizes[b], 0.05, 1));
      real.push_back(rng.uniform());
      if (std::abs(gc::context_entropy(P.back(), ctx[b]) - real.back()) < 1e-3) return std::nullopt;
    }
    auto value = [=](const gc::Vec& x) { return contextual_loss(gc::split_matrices(x, sizes), ctx, real).value; };
    auto grad = [=](const gc::Vec& x) { return gc::join_matrices(contextual_loss(gc::split_matrices(x, sizes), ctx, real).d_P); };
    return gc::Problem{gc::join_matrices(P), value, grad};
  });
}

inline GradcheckResult gradcheck_connection_loss(const GradcheckOptions& opt) {
  return gc::run("connection_loss", opt, [](Rng& rng) -> std::optional<gc::Problem> {
    const std::vector<Eigen::Index> sizes{6, 5};
    std::vector<Eigen::MatrixXd> P;
    std::vector<std::vector<Edge>> cand{{{0, 3}, {0, 4}, {1, 5}, {2, 3}}, {{0, 2}, {1, 3}, {1, 4}}};
    std::vector<int> e_con;
    const double lambda = 0.8;
    for (std::size_t b = 0; b < sizes.size(); ++b) {
      P.push_back(gc::random_symmetric(rng, sizes[b], 0, 1));
      e_con.push_back(static_cast<int>(rng.below(6)));
      double s = 0;
      for (auto [i, j] : cand[b]) s += P.back()(i, j);
      if (std::abs(lambda * e_con.back() - s) < 1e-3) return std::nullopt;
    }
    auto value = [=](const gc::Vec& x) { return connection_loss(gc::split_matrices(x, sizes), cand, lambda, e_con).value; };
    auto grad = [=](const gc::Vec& x) { return gc::join_matrices(connection_loss(gc::split_matrices(x, sizes), cand, lambda, e_con).d_P); };
    return gc::Problem{gc::join_matrices(P), value, grad};
  });
}

inline GradcheckResult gradcheck_encoder_params(const GradcheckOptions& opt) {
  return gc::run("encoder_params", opt, [](Rng& rng) -> std::optional<gc::Problem> {
    const int n = 6, in = 4, hidden = 5;
    const Eigen::MatrixXd adj = gc::random_symmetric(rng, n, 0, 1);
    const Eigen::MatrixXd X = gc::random_matrix(rng, n, in, -1, 1);
    const Eigen::MatrixXd R = gc::random_matrix(rng, n, hidden, -1, 1);
    const GnnParams base = gc::small_gnn(rng, in, hidden, 1);
    auto enc_tensors = [](GnnParams& p) {
      std::vector<Eigen::MatrixXd*> t;
      for (auto& l : p.encoder) {
        t.push_back(&l.weight);
        t.push_back(&l.bias);
      }
      return t;
    };
    GnnParams tmp = base;
    const gc::Vec x0 = gc::flatten(gc::as_const(enc_tensors(tmp)));
    auto value = [=](const gc::Vec& x) {
      GnnParams p = base;
      gc::unflatten(x, enc_tensors(p));
      return encode_graph(adj, X, p).cwiseProduct(R).sum();
    };
    auto grad = [=](const gc::Vec& x) {
      GnnParams p = base;
      gc::unflatten(x, enc_tensors(p));
      EncoderCache c;
      encode_graph(adj, X, p, &c);
      EncoderGrad g = encode_backward(c, p, R);
      std::vector<const Eigen::MatrixXd*> t;
      for (const auto& l : g.layers) {
        t.push_back(&l.weight);
        t.push_back(&l.bias);
      }
      return gc::flatten(t);
    };
    return gc::Problem{x0, value, grad};
  });
}

inline GradcheckResult gradcheck_encoder_adjacency(const GradcheckOptions& opt) {
  return gc::run("encoder_adjacency", opt, [](Rng& rng) -> std::optional<gc::Problem> {
    const int n = 6, in = 4, hidden = 5;
    const Eigen::MatrixXd adj = gc::random_symmetric(rng, n, 0, 1);
    const Eigen::MatrixXd X = gc::random_matrix(rng, n, in, -1, 1);
    const Eigen::MatrixXd R = gc::random_matrix(rng, n, hidden, -1, 1);
    const GnnParams p = gc::small_gnn(rng, in, hidden, 1);
    auto value = [=](const gc::Vec& x) {
      return encode_graph(Eigen::Map<const Eigen::MatrixXd>(x.data(), n, n), X, p).cwiseProduct(R).sum();
    };
    auto grad = [=](const gc::Vec& x) {
      EncoderCache c;
      encode_graph(Eigen::Map<const Eigen::MatrixXd>(x.data(), n, n), X, p, &c);
      const Eigen::MatrixXd d = encode_backward(c, p, R).d_adj;
      return gc::Vec(Eigen::Map<const gc::Vec>(d.data(), d.size()));
    };
    return gc::Problem{Eigen::Map<const gc::Vec>(adj.data(), adj.size()), value, grad};
  });
}

inline GradcheckResult gradcheck_encoder_features(const GradcheckOptions& opt) {
  return gc::run("encoder_features", opt, [](Rng& rng) -> std::optional<gc::Problem> {
    const int n = 5, in = 3, hidden = 4;
    const Eigen::MatrixXd adj = gc::random_symmetric(rng, n, 0, 1);
    const Eigen::MatrixXd X = gc::random_matrix(rng, n, in, -1, 1);
    const Eigen::MatrixXd R = gc::random_matrix(rng, n, hidden, -1, 1);
    const GnnParams p = gc::small_gnn(rng, in, hidden, 1);
    auto value = [=](const gc::Vec& x) {
      return encode_graph(adj, Eigen::Map<const Eigen::MatrixXd>(x.data(), n, in), p).cwiseProduct(R).sum();
    };
    auto grad = [=](const gc::Vec& x) {
      EncoderCache c;
      encode_graph(adj, Eigen::Map<const Eigen::MatrixXd>(x.data(), n, in), p, &c);
      const Eigen::MatrixXd d = encode_backward(c, p, R).d_features;
      return gc::Vec(Eigen::Map<const gc::Vec>(d.data(), d.size()));
    };
    return gc::Problem{Eigen::Map<const gc::Vec>(X.data(), X.size()), value, grad};
  });
}

inline GradcheckResult gradcheck_pooling(const GradcheckOptions& opt) {
  return gc::run("pooling", opt, [](Rng& rng) -> std::optional<gc::Problem> {
    const int n = 5, d = 4;
    const Eigen::MatrixXd Z = gc::random_matrix(rng, n, d, -1, 1);
    const gc::Vec R = gc::random_matrix(rng, 2 * d, 1, -1, 1);
    auto value = [=](const gc::Vec& x) {
      return graph_representation(Eigen::Map<const Eigen::MatrixXd>(x.data(), n, d)).dot(R);
    };
    auto grad = [=](const gc::Vec& x) {
      std::vector<Eigen::Index> am;
      graph_representation(Eigen::Map<const Eigen::MatrixXd>(x.data(), n, d), &am);
      const Eigen::MatrixXd g = pooling_backward(n, am, R);
      return gc::Vec(Eigen::Map<const gc::Vec>(g.data(), g.size()));
    };
    return gc::Problem{Eigen::Map<const gc::Vec>(Z.data(), Z.size()), value, grad};
  });
}

inline GradcheckResult gradcheck_mlp(const GradcheckOptions& opt) {
  return gc::run("mlp", opt, [](Rng& rng) -> std::optional<gc::Problem> {
    const int hidden = 4;
    const GnnParams base = gc::small_gnn(rng, 3, hidden, 3);
    const gc::Vec rep0 = gc::random_matrix(rng, 2 * hidden, 1, -1, 1);
    auto head_tensors = [](GnnParams& p) {
      std::vector<Eigen::MatrixXd*> t;
      for (auto& l : p.head) {
        t.push_back(&l.weight);
        t.push_back(&l.bias);
      }
      return t;
    };
    GnnParams tmp = base;
    gc::Vec x0(rep0.size() + gc::flatten(gc::as_const(head_tensors(tmp))).size());
    x0 << rep0, gc::flatten(gc::as_const(head_tensors(tmp)));
    auto unpack = [=](const gc::Vec& x, GnnParams& p) {
      gc::unflatten(x.tail(x.size() - rep0.size()), head_tensors(p));
      return gc::Vec(x.head(rep0.size()));
    };
    auto value = [=](const gc::Vec& x) {
      GnnParams p = base;
      const gc::Vec rep = unpack(x, p);
      return mlp_logit(rep, p);
    };
    auto grad = [=](const gc::Vec& x) {
      GnnParams p = base;
      const gc::Vec rep = unpack(x, p);
      MlpCache c;
      mlp_logit(rep, p, &c);
      MlpGrad g = mlp_backward(c, p, 1.0);
      std::vector<const Eigen::MatrixXd*> t;
      for (const auto& l : g.layers) {
        t.push_back(&l.weight);
        t.push_back(&l.bias);
      }
      gc::Vec out(x.size());
      out << g.d_rep, gc::flatten(t);
      return out;
    };
    return gc::Problem{x0, value, grad};
  });
}

inline GradcheckResult gradcheck_bce(const GradcheckOptions& opt) {
  return gc::run("bce", opt, [](Rng& rng) -> std::optional<gc::Problem> {
    const int label = static_cast<int>(rng.below(2));
    gc::Vec z(1);
    z(0) = -6.0 + 12.0 * rng.uniform();
    auto value = [=](const gc::Vec& x) { return bce_loss(sigmoid(x(0)), label); };
    auto grad = [=](const gc::Vec& x) {
      gc::Vec g(1);
      g(0) = bce_grad_logit(sigmoid(x(0)), label);
      return g;
    };
    return gc::Problem{z, value, grad};
  });
}

/// Discriminator end to end: BCE(sigmoid(h(pool(f(A, X))))) w.r.t. every
/// parameter and every adjacency entry.
inline GradcheckResult gradcheck_discriminator(const GradcheckOptions& opt) {
  return gc::run("discriminator", opt, [](Rng& rng) -> std::optional<gc::Problem> {
    const int n = 5, in = 4, hidden = 4;
    const int label = static_cast<int>(rng.below(2));
    const Eigen::MatrixXd adj = gc::random_symmetric(rng, n, 0, 1);
    const Eigen::MatrixXd X = gc::random_matrix(rng, n, in, -1, 1);
    const GnnParams base = gc::small_gnn(rng, in, hidden, 2);
    GnnParams tmp = base;
    const gc::Vec pv = gc::flatten(gc::as_const(tmp.tensors()));
    gc::Vec x0(pv.size() + adj.size());
    x0 << pv, Eigen::Map<const gc::Vec>(adj.data(), adj.size());
    auto unpack = [=](const gc::Vec& x, GnnParams& p) {
      gc::unflatten(x.head(pv.size()), p.tensors());
      return Eigen::MatrixXd(Eigen::Map<const Eigen::MatrixXd>(x.data() + pv.size(), n, n));
    };
    auto value = [=](const gc::Vec& x) {
      GnnParams p = base;
      const Eigen::MatrixXd a = unpack(x, p);
      return bce_loss(forward_graph(a, X, p).prob, label);
    };
    auto grad = [=](const gc::Vec& x) {
      GnnParams p = base;
      const Eigen::MatrixXd a = unpack(x, p);
      const GraphForward f = forward_graph(a, X, p);
      const GraphGrad g = backward_graph(f, p, bce_grad_logit(f.prob, label));
      gc::Vec out(x.size());
      out << gc::flatten(g.params.tensors()), Eigen::Map<const gc::Vec>(g.d_adj.data(), g.d_adj.size());
      return out;
    };
    return gc::Problem{x0, value, grad};
  });
}

/// Generator chain: symmetric logits -> relaxed P (frozen noise, moderate tau)
/// -> adversarial BCE + reg_sign * L_reg. Discriminator features are held
/// fixed, as in training. Odd points use reg_sign = -1.
inline GradcheckResult gradcheck_generator_chain(const GradcheckOptions& opt) {
  int point = 0;
  return gc::run("generator_chain", opt, [&point](Rng& rng) -> std::optional<gc::Problem> {
    TrainConfig cfg;
    cfg.tau_g = 0.5;
    cfg.feature_buckets = 4;
    cfg.reg_sign = point % 2 ? -1.0 : 1.0;
    const GnnParams disc = gc::small_gnn(rng, cfg.feature_buckets, 4, 2);
    const Graphon w{gc::random_symmetric(rng, 3, 0, 1)};
    std::vector<GeneratorState> states;
    GeneratorBatch tmpl;
    std::vector<Eigen::MatrixXd> noise;
    for (int b = 0; b < 2; ++b) {
      RawCounterfactual cf = gc::small_scaffold(rng, 3, 3 + b);
      GeneratorState st = init_edge_logits(cf, 0.75, cfg.lambda_g, 3, cfg.tau_g);
      st.logits = st.logits.cwiseProduct(gc::random_symmetric(rng, st.n(), -1, 2)).cwiseProduct(st.trainable.cast<double>());
      st.logits += gc::random_symmetric(rng, st.n(), -0.5, 0.5).cwiseProduct(st.trainable.cast<double>());
      noise.push_back(gc::random_symmetric(rng, st.n(), 0, 1));
      tmpl.alignment.push_back(st.alignment);
      tmpl.context_nodes.push_back(st.context_nodes);
      tmpl.candidates.push_back(cf.cross_candidates);
      tmpl.real_context_entropy.push_back(rng.uniform());
      tmpl.e_con.push_back(1 + static_cast<int>(rng.below(4)));
      tmpl.features.push_back(gc::random_matrix(rng, st.n(), cfg.feature_buckets, 0, 1));
      states.push_back(std::move(st));
    }
    // Parameters: the upper-triangle trainable logits of every item.
    std::vector<std::pair<int, Edge>> coords;
    for (int b = 0; b < 2; ++b)
      for (int i = 0; i < states[b].n(); ++i)
        for (int j = i + 1; j < states[b].n(); ++j)
          if (states[b].trainable(i, j)) coords.push_back({b, {i, j}});
    gc::Vec x0(static_cast<Eigen::Index>(coords.size()));
    for (std::size_t k = 0; k < coords.size(); ++k) {
      const auto& [b, e] = coords[k];
      x0(static_cast<Eigen::Index>(k)) = states[static_cast<std::size_t>(b)].logits(e.first, e.second);
    }
    auto batch_at = [=](const gc::Vec& x) {
      GeneratorBatch gb = tmpl;
      std::vector<Eigen::MatrixXd> logits;
      for (const auto& st : states) logits.push_back(Eigen::MatrixXd::Zero(st.n(), st.n()));
      for (std::size_t k = 0; k < coords.size(); ++k) {
        const auto& [b, e] = coords[k];
        logits[static_cast<std::size_t>(b)](e.first, e.second) = logits[static_cast<std::size_t>(b)](e.second, e.first) =
            x(static_cast<Eigen::Index>(k));
      }
      for (std::size_t b = 0; b < states.size(); ++b)
        gb.P.push_back(relax_with_noise(logits[b], states[b].trainable, noise[b], cfg.tau_g));
      return gb;
    };
    // Reject points near the |.| kinks of the contextual and connection losses.
    {
      const GeneratorBatch gb = batch_at(x0);
      for (std::size_t b = 0; b < gb.P.size(); ++b) {
        if (std::abs(gc::context_entropy(gb.P[b], gb.context_nodes[b]) - gb.real_context_entropy[b]) < 1e-3)
          return std::nullopt;
        double s = 0;
        for (auto [i, j] : gb.candidates[b]) s += gb.P[b](i, j);
        if (std::abs(cfg.lambda_g * gb.e_con[b] - s) < 1e-3) return std::nullopt;
      }
    }
    ++point;
    auto value = [=](const gc::Vec& x) { return generator_objective(batch_at(x), disc, w, cfg).l_gen; };
    auto grad = [=](const gc::Vec& x) {
      const GeneratorBatch gb = batch_at(x);
      const GeneratorObjective o = generator_objective(gb, disc, w, cfg);
      gc::Vec g(x.size());
      std::vector<Eigen::MatrixXd> full;
      for (std::size_t b = 0; b < states.size(); ++b)
        full.push_back(logits_gradient(o.d_P[b], gb.P[b], states[b].trainable, cfg.tau_g));
      for (std::size_t k = 0; k < coords.size(); ++k) {
        const auto& [b, e] = coords[k];
        g(static_cast<Eigen::Index>(k)) = full[static_cast<std::size_t>(b)](e.first, e.second);
      }
      return g;
    };
    return gc::Problem{x0, value, grad};
  });
}

using GradcheckOp = std::function<GradcheckResult(const GradcheckOptions&)>;

inline std::vector<GradcheckOp> gradcheck_ops() {
  return {gradcheck_motif_loss,      gradcheck_degree_entropy,   gradcheck_contextual_loss,
          gradcheck_connection_loss, gradcheck_encoder_params,   gradcheck_encoder_adjacency,
          gradcheck_encoder_features, gradcheck_pooling,         gradcheck_mlp,
          gradcheck_bce,             gradcheck_discriminator,    gradcheck_generator_chain};
}

inline std::vector<GradcheckResult> run_gradcheck_suite(const GradcheckOptions& opt = {}) {
  std::vector<GradcheckResult> out;
  for (const auto& op : gradcheck_ops()) out.push_back(op(opt));
  return out;
}

}  // namespace motifcar
