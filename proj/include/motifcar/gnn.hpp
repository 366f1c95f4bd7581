#pragma once

// Dense GCN encoder + mean/max pooling + MLP head, with hand-derived reverse
// passes. Shared by the GAN discriminator and the anomaly classifier.
//
// Every backward routine returns dL/dx treating each matrix entry as an
// independent variable. For a symmetric adjacency parameter (i, j) the total
// derivative is d_adj(i, j) + d_adj(j, i).

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "motifcar/error.hpp"
#include "motifcar/random.hpp"

namespace motifcar {

/// y = x * weight + bias, bias stored as a 1 x out row.
struct DenseLayer {
  Eigen::MatrixXd weight;
  Eigen::MatrixXd bias;

  friend bool operator==(const DenseLayer& a, const DenseLayer& b) {
    return a.weight.rows() == b.weight.rows() && a.weight.cols() == b.weight.cols() && a.bias.cols() == b.bias.cols() &&
           (a.weight.array() == b.weight.array()).all() && (a.bias.array() == b.bias.array()).all();
  }
};

struct GnnParams {
  std::vector<DenseLayer> encoder;  // message-passing layers
  std::vector<DenseLayer> head;     // L_h MLP layers, last one maps to a scalar logit

  int input_dim() const { return static_cast<int>(encoder.front().weight.rows()); }
  int hidden_dim() const { return static_cast<int>(encoder.back().weight.cols()); }

  std::vector<Eigen::MatrixXd*> tensors() {
    std::vector<Eigen::MatrixXd*> out;
    for (auto* group : {&encoder, &head})
      for (auto& l : *group) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
      }
    return out;
  }
  std::vector<const Eigen::MatrixXd*> tensors() const {
    std::vector<const Eigen::MatrixXd*> out;
    for (const auto* group : {&encoder, &head})
      for (const auto& l : *group) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
      }
    return out;
  }

  /// Zero tensors with this shape.
  GnnParams zeros_like() const {
    GnnParams z = *this;
    for (auto* t : z.tensors()) t->setZero();
    return z;
  }

  void validate() const {
    if (encoder.empty() || head.empty()) throw ArgumentError("gnn: need >= 1 encoder layer and >= 1 head layer");
    for (std::size_t l = 0; l + 1 < encoder.size(); ++l)
      if (encoder[l].weight.cols() != encoder[l + 1].weight.rows()) throw ArgumentError("gnn: encoder dims do not chain");
    if (head.front().weight.rows() != 2 * encoder.back().weight.cols())
      throw ArgumentError("gnn: head input must be 2 x hidden_dim");
    for (std::size_t l = 0; l + 1 < head.size(); ++l)
      if (head[l].weight.cols() != head[l + 1].weight.rows()) throw ArgumentError("gnn: head dims do not chain");
    if (head.back().weight.cols() != 1) throw ArgumentError("gnn: head must end in one output");
    for (const auto* group : {&encoder, &head})
      for (const auto& l : *group)
        if (l.bias.rows() != 1 || l.bias.cols() != l.weight.cols()) throw ArgumentError("gnn: bias shape mismatch");
  }

  friend bool operator==(const GnnParams&, const GnnParams&) = default;
};

struct GnnShape {
  int input_dim = 32;
  int hidden_dim = 32;
  int encoder_layers = 2;
  int head_layers = 2;  // L_h
  bool zero_head = false;  // zero the last head layer so an untrained model outputs 0.5
};

/// Glorot-uniform weights, zero biases.
inline GnnParams init_gnn(const GnnShape& shape, std::uint64_t seed) {
  if (shape.input_dim < 1 || shape.hidden_dim < 1 || shape.encoder_layers < 1 || shape.head_layers < 1)
    throw ArgumentError("gnn: all dimensions and layer counts must be >= 1");
  Rng rng(seed);
  auto layer = [&](int in, int out) {
    DenseLayer l;
    const double a = std::sqrt(6.0 / (in + out));
    l.weight.resize(in, out);
    for (int i = 0; i < in; ++i)
      for (int j = 0; j < out; ++j) l.weight(i, j) = (2.0 * rng.uniform() - 1.0) * a;
    l.bias = Eigen::MatrixXd::Zero(1, out);
    return l;
  };
  GnnParams p;
  int in = shape.input_dim;
  for (int l = 0; l < shape.encoder_layers; ++l) {
    p.encoder.push_back(layer(in, shape.hidden_dim));
    in = shape.hidden_dim;
  }
  in = 2 * shape.hidden_dim;
  for (int l = 0; l < shape.head_layers; ++l) {
    const int out = l + 1 == shape.head_layers ? 1 : shape.hidden_dim;
    p.head.push_back(layer(in, out));
    in = out;
  }
  if (shape.zero_head) {
    p.head.back().weight.setZero();
    p.head.back().bias.setZero();
  }
  return p;
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// Encoder

struct EncoderCache {
  Eigen::MatrixXd a_hat;               // D^-1/2 (A + I) D^-1/2
  Eigen::VectorXd inv_sqrt_deg;        // r_i = (1 + sum_j A_ij)^-1/2
  std::vector<Eigen::MatrixXd> input;  // Z^l
  std::vector<Eigen::MatrixXd> agg;    // A_hat Z^l
  std::vector<Eigen::MatrixXd> pre;    // A_hat Z^l W^l + b^l
};

inline Eigen::MatrixXd normalized_adjacency(const Eigen::MatrixXd& adj, Eigen::VectorXd* inv_sqrt_deg = nullptr) {
  const Eigen::Index n = adj.rows();
  Eigen::MatrixXd a = adj + Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd r = a.rowwise().sum().array().rsqrt();
  if (inv_sqrt_deg) *inv_sqrt_deg = r;
  return r.asDiagonal() * a * r.asDiagonal();
}

/// Z^{l+1} = relu(A_hat Z^l W^l + b^l) over every encoder layer.
inline Eigen::MatrixXd encode_graph(const Eigen::MatrixXd& adj, const Eigen::MatrixXd& features,
                                    const GnnParams& params, EncoderCache* cache = nullptr) {
  if (adj.rows() != adj.cols() || adj.rows() != features.rows())
    throw ArgumentError("encode_graph: adjacency/feature size mismatch");
  if (features.cols() != params.input_dim()) throw ArgumentError("encode_graph: feature dim differs from model input");
  EncoderCache local;
  EncoderCache& c = cache ? *cache : local;
  c.a_hat = normalized_adjacency(adj, &c.inv_sqrt_deg);
  c.input.assign(1, features);
  c.agg.clear();
  c.pre.clear();
  for (const auto& layer : params.encoder) {
    c.agg.push_back(c.a_hat * c.input.back());
    c.pre.push_back((c.agg.back() * layer.weight).rowwise() + layer.bias.row(0));
    c.input.push_back(c.pre.back().cwiseMax(0.0));
  }
  return c.input.back();
}

struct EncoderGrad {
  std::vector<DenseLayer> layers;
  Eigen::MatrixXd d_adj;
  Eigen::MatrixXd d_features;
};

inline EncoderGrad encode_backward(const EncoderCache& c, const GnnParams& params, const Eigen::MatrixXd& dZ) {
  EncoderGrad g;
  g.layers.resize(params.encoder.size());
  Eigen::MatrixXd d_ahat = Eigen::MatrixXd::Zero(c.a_hat.rows(), c.a_hat.cols());
  Eigen::MatrixXd d_out = dZ;
  for (std::size_t l = params.encoder.size(); l-- > 0;) {
    const Eigen::MatrixXd d_pre = d_out.cwiseProduct((c.pre[l].array() > 0.0).cast<double>().matrix());
    g.layers[l].weight = c.agg[l].transpose() * d_pre;
    g.layers[l].bias = d_pre.colwise().sum();
    const Eigen::MatrixXd d_agg = d_pre * params.encoder[l].weight.transpose();
    d_ahat += d_agg * c.input[l].transpose();
    d_out = c.a_hat.transpose() * d_agg;
  }
  g.d_features = d_out;
  // A_hat_kl = r_k (A + I)_kl r_l with r = deg^-1/2, deg_k = sum_l (A + I)_kl.
  const Eigen::VectorXd& r = c.inv_sqrt_deg;
  const Eigen::MatrixXd weighted = d_ahat.cwiseProduct(c.a_hat);
  const Eigen::VectorXd q =
      (-0.5 * r.array().square() * (weighted.rowwise().sum() + weighted.colwise().sum().transpose()).array()).matrix();
  g.d_adj = (r.asDiagonal() * d_ahat * r.asDiagonal()).colwise() + q;
  return g;
}

// ---------------------------------------------------------------------------
// Pooling

/// mean over rows concatenated with column-wise max; argmax[j] is the first
/// row attaining the max of column j.
inline Eigen::VectorXd graph_representation(const Eigen::MatrixXd& Z, std::vector<Eigen::Index>* argmax = nullptr) {
  if (Z.rows() < 1) throw ArgumentError("graph_representation: graph has no nodes");
  const Eigen::Index d = Z.cols();
  Eigen::VectorXd rep(2 * d);
  rep.head(d) = Z.colwise().mean().transpose();
  if (argmax) argmax->assign(static_cast<std::size_t>(d), 0);
  for (Eigen::Index j = 0; j < d; ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < Z.rows(); ++i)
      if (Z(i, j) > Z(best, j)) best = i;
    rep(d + j) = Z(best, j);
    if (argmax) (*argmax)[static_cast<std::size_t>(j)] = best;
  }
  return rep;
}

inline Eigen::MatrixXd pooling_backward(Eigen::Index rows, const std::vector<Eigen::Index>& argmax,
                                        const Eigen::VectorXd& d_rep) {
  const Eigen::Index d = static_cast<Eigen::Index>(argmax.size());
  Eigen::MatrixXd dZ(rows, d);
  dZ.rowwise() = (d_rep.head(d) / static_cast<double>(rows)).transpose();
  for (Eigen::Index j = 0; j < d; ++j) dZ(argmax[static_cast<std::size_t>(j)], j) += d_rep(d + j);
  return dZ;
}

// ---------------------------------------------------------------------------
// MLP head

struct MlpCache {
  std::vector<Eigen::RowVectorXd> input;
  std::vector<Eigen::RowVectorXd> pre;
};

/// relu hidden layers, linear last layer; returns the logit.
inline double mlp_logit(const Eigen::VectorXd& rep, const GnnParams& params, MlpCache* cache = nullptr) {
  if (rep.size() != params.head.front().weight.rows()) throw ArgumentError("mlp: representation size mismatch");
  MlpCache local;
  MlpCache& c = cache ? *cache : local;
  c.input.assign(1, rep.transpose());
  c.pre.clear();
  for (std::size_t l = 0; l < params.head.size(); ++l) {
    c.pre.push_back(c.input.back() * params.head[l].weight + params.head[l].bias);
    if (l + 1 < params.head.size()) c.input.push_back(c.pre.back().cwiseMax(0.0));
  }
  return c.pre.back()(0);
}

/// p_G = sigmoid(h(z_G)).
inline double discriminator_prob(const Eigen::VectorXd& rep, const GnnParams& params) {
  return sigmoid(mlp_logit(rep, params));
}

struct MlpGrad {
  std::vector<DenseLayer> layers;
  Eigen::VectorXd d_rep;
};

inline MlpGrad mlp_backward(const MlpCache& c, const GnnParams& params, double d_logit) {
  MlpGrad g;
  g.layers.resize(params.head.size());
  Eigen::RowVectorXd d_pre = Eigen::RowVectorXd::Constant(1, d_logit);
  for (std::size_t l = params.head.size(); l-- > 0;) {
    g.layers[l].weight = c.input[l].transpose() * d_pre;
    g.layers[l].bias = d_pre;
    Eigen::RowVectorXd d_in = d_pre * params.head[l].weight.transpose();
    if (l > 0) d_in = d_in.cwiseProduct((c.pre[l - 1].array() > 0.0).cast<double>().matrix());
    d_pre = d_in;
  }
  g.d_rep = d_pre.transpose();
  return g;
}

// ---------------------------------------------------------------------------
// Whole model

struct GraphForward {
  EncoderCache encoder;
  std::vector<Eigen::Index> argmax;
  MlpCache mlp;
  Eigen::Index nodes = 0;
  double logit = 0;
  double prob = 0.5;
};

inline GraphForward forward_graph(const Eigen::MatrixXd& adj, const Eigen::MatrixXd& features, const GnnParams& params) {
  GraphForward f;
  const Eigen::MatrixXd Z = encode_graph(adj, features, params, &f.encoder);
  f.nodes = Z.rows();
  const Eigen::VectorXd rep = graph_representation(Z, &f.argmax);
  f.logit = mlp_logit(rep, params, &f.mlp);
  f.prob = sigmoid(f.logit);
  return f;
}

struct GraphGrad {
  GnnParams params;
  Eigen::MatrixXd d_adj;
};

/// Reverse pass from dL/dlogit through head, pooling and encoder.
inline GraphGrad backward_graph(const GraphForward& f, const GnnParams& params, double d_logit) {
  GraphGrad g;
  MlpGrad mg = mlp_backward(f.mlp, params, d_logit);
  const Eigen::MatrixXd dZ = pooling_backward(f.nodes, f.argmax, mg.d_rep);
  EncoderGrad eg = encode_backward(f.encoder, params, dZ);
  g.params.encoder = std::move(eg.layers);
  g.params.head = std::move(mg.layers);
  g.d_adj = std::move(eg.d_adj);
  return g;
}

inline void accumulate(GnnParams& into, const GnnParams& g, double scale = 1.0) {
  auto dst = into.tensors();
  auto src = g.tensors();
  for (std::size_t i = 0; i < dst.size(); ++i) *dst[i] += scale * *src[i];
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment updates over a fixed list of tensors; moment buffers are
/// created on the first step.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(const std::vector<Eigen::MatrixXd*>& params, const std::vector<const Eigen::MatrixXd*>& grads) {
    if (params.size() != grads.size()) throw ArgumentError("adam: parameter/gradient count mismatch");
    if (m_.empty()) {
      for (auto* p : params) {
        m_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
        v_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * *grads[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i]->cwiseProduct(*grads[i]);
      *params[i] -= (cfg_.learning_rate * (m_[i] / c1).array() / ((v_[i] / c2).array().sqrt() + cfg_.epsilon)).matrix();
    }
  }

  void step(GnnParams& params, const GnnParams& grads) { step(params.tensors(), grads.tensors()); }

  long steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<Eigen::MatrixXd> m_, v_;
  long t_ = 0;
};

// ---------------------------------------------------------------------------
// Checkpoints: "MOTIFCAR-CHECKPOINT 1", then named tensors
// "tensor <name> <rows> <cols>" followed by row-major values.

inline constexpr const char* kCheckpointMagic = "MOTIFCAR-CHECKPOINT";

inline void write_tensor(std::ostream& out, const std::string& name, const Eigen::MatrixXd& t) {
  out << "tensor " << name << ' ' << t.rows() << ' ' << t.cols() << '\n' << std::setprecision(17);
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.cols(); ++j) out << (j ? " " : "") << t(i, j);
    out << '\n';
  }
}

inline Eigen::MatrixXd read_tensor(std::istream& in, std::string* name = nullptr) {
  std::string tag, nm;
  Eigen::Index r = 0, c = 0;
  if (!(in >> tag >> nm >> r >> c) || tag != "tensor" || r < 0 || c < 0) throw DataError("checkpoint: bad tensor header");
  Eigen::MatrixXd t(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j)
      if (!(in >> t(i, j))) throw DataError("checkpoint: truncated tensor " + nm);
  if (name) *name = nm;
  return t;
}

inline void write_gnn(std::ostream& out, const std::string& prefix, const GnnParams& p) {
  out << "gnn " << prefix << ' ' << p.encoder.size() << ' ' << p.head.size() << '\n';
  for (std::size_t l = 0; l < p.encoder.size(); ++l) {
    write_tensor(out, prefix + ".encoder" + std::to_string(l) + ".weight", p.encoder[l].weight);
    write_tensor(out, prefix + ".encoder" + std::to_string(l) + ".bias", p.encoder[l].bias);
  }
  for (std::size_t l = 0; l < p.head.size(); ++l) {
    write_tensor(out, prefix + ".head" + std::to_string(l) + ".weight", p.head[l].weight);
    write_tensor(out, prefix + ".head" + std::to_string(l) + ".bias", p.head[l].bias);
  }
}

inline GnnParams read_gnn(std::istream& in) {
  std::string tag, prefix;
  std::size_t enc = 0, head = 0;
  if (!(in >> tag >> prefix >> enc >> head) || tag != "gnn") throw DataError("checkpoint: expected gnn block");
  GnnParams p;
  for (std::size_t l = 0; l < enc; ++l) {
    DenseLayer d;
    d.weight = read_tensor(in);
    d.bias = read_tensor(in);
    p.encoder.push_back(std::move(d));
  }
  for (std::size_t l = 0; l < head; ++l) {
    DenseLayer d;
    d.weight = read_tensor(in);
    d.bias = read_tensor(in);
    p.head.push_back(std::move(d));
  }
  try {
    p.validate();
  } catch (const ArgumentError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  return p;
}

}  // namespace motifcar
