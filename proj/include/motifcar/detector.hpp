#pragma once

// Graph-level anomaly detector (GNN classifier: normal = 1, anomalous = 0)
// and the end-to-end augmentation pipeline.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <thread>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "motifcar/dataset_io.hpp"
#include "motifcar/error.hpp"
#include "motifcar/gnn.hpp"
#include "motifcar/graph.hpp"
#include "motifcar/graphon.hpp"
#include "motifcar/losses.hpp"
#include "motifcar/metrics.hpp"
#include "motifcar/optimizer.hpp"
#include "motifcar/producer.hpp"
#include "motifcar/random.hpp"
#include "motifcar/synthetic.hpp"

namespace motifcar {

struct ClassifierConfig {
  int epochs = 100;
  double learning_rate = 1e-3;
  int batch_size = 8;
  int hidden_dim = 32;
  int head_layers = 2;
  int feature_buckets = 32;
  bool balanced = true;  // weight each class's BCE terms by n / (2 n_class)
  int positive_class = 0;  // class scored by precision/recall/F1 (0 = anomalous)
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1 || batch_size < 1) throw ArgumentError("classifier: epochs and batch size must be >= 1");
    if (!(learning_rate > 0)) throw ArgumentError("classifier: learning rate must be positive");
    if (hidden_dim < 1 || head_layers < 1 || feature_buckets < 1) throw ArgumentError("classifier: bad model shape");
    if (positive_class != 0 && positive_class != 1) throw ArgumentError("classifier: positive_class must be 0 or 1");
  }
};

struct ClassifierModel {
  GnnParams params;
  int feature_buckets = 32;
  bool trained = false;
};

struct Prediction {
  double prob = 0.5;
  int label = 1;
};

/// Untrained model with a zeroed output layer: every prediction is exactly 0.5.
inline ClassifierModel init_classifier(const ClassifierConfig& cfg) {
  ClassifierModel m;
  m.feature_buckets = cfg.feature_buckets;
  m.params = init_gnn({cfg.feature_buckets, cfg.hidden_dim, 2, cfg.head_layers, true},
                      derive_seed(cfg.seed, "classifier-init"));
  return m;
}

/// Label 1 iff p >= 0.5.
inline Prediction predict(const ClassifierModel& m, const Graph& g) {
  if (g.n() < 1) throw ArgumentError("predict: empty graph");
  const GraphForward f = forward_graph(g.adjacency(), node_features_or_default(g, m.feature_buckets), m.params);
  return {f.prob, f.prob >= 0.5 ? 1 : 0};
}

struct ClassifierTrace {
  std::vector<double> train_loss;  // mean (weighted) BCE per epoch
  std::vector<double> val_f1;
  int best_epoch = -1;
};

/// Mini-batch Adam on BCE; keeps the epoch with the best validation F1 (ties
/// go to the lower validation loss). Without validation data the last epoch
/// is kept.
inline ClassifierModel train_classifier(std::span<const Graph> graphs, std::span<const int> labels,
                                        std::span<const Graph> val_graphs, std::span<const int> val_labels,
                                        const ClassifierConfig& cfg, ClassifierTrace* trace = nullptr) {
  cfg.validate();
  if (graphs.size() != labels.size() || val_graphs.size() != val_labels.size())
    throw ArgumentError("train_classifier: graph/label count mismatch");
  std::array<double, 2> count{0, 0};
  for (int l : labels) {
    if (l != 0 && l != 1) throw ArgumentError("train_classifier: labels must be 0 or 1");
    count[static_cast<std::size_t>(l)] += 1;
  }
  if (count[0] == 0 || count[1] == 0) throw ArgumentError("train_classifier: training set contains a single class");
  const double n = static_cast<double>(labels.size());
  const std::array<double, 2> weight = cfg.balanced ? std::array<double, 2>{n / (2 * count[0]), n / (2 * count[1])}
                                                    : std::array<double, 2>{1.0, 1.0};

  std::vector<Eigen::MatrixXd> adj, feat;
  for (const Graph& g : graphs) {
    adj.push_back(g.adjacency());
    feat.push_back(node_features_or_default(g, cfg.feature_buckets));
  }
  ClassifierModel model = init_classifier(cfg);
  Adam opt(AdamConfig{cfg.learning_rate});
  Rng rng(derive_seed(cfg.seed, "classifier-train"));
  std::vector<std::size_t> order(graphs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  ClassifierModel best = model;
  double best_f1 = -1, best_loss = 0;
  ClassifierTrace local;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      GnnParams grad = model.params.zeros_like();
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        const int y = labels[i];
        const double w = weight[static_cast<std::size_t>(y)];
        const GraphForward f = forward_graph(adj[i], feat[i], model.params);
        epoch_loss += w * bce_loss(f.prob, y) / n;
        accumulate(grad, backward_graph(f, model.params, inv * w * bce_grad_logit(f.prob, y)).params);
      }
      opt.step(model.params, grad);
    }
    if (!std::isfinite(epoch_loss)) throw NumericalError("classifier epoch " + std::to_string(epoch) + ": loss is not finite");
    model.trained = true;
    local.train_loss.push_back(epoch_loss);

    if (!val_graphs.empty()) {
      std::vector<int> pred;
      double val_loss = 0;
      for (std::size_t i = 0; i < val_graphs.size(); ++i) {
        const Prediction p = predict(model, val_graphs[i]);
        pred.push_back(p.label);
        val_loss += bce_loss(p.prob, val_labels[i]);
      }
      const double f1 = detection_metrics(pred, val_labels, cfg.positive_class).f1;
      local.val_f1.push_back(f1);
      if (f1 > best_f1 || (f1 == best_f1 && val_loss < best_loss)) {
        best_f1 = f1;
        best_loss = val_loss;
        best = model;
        local.best_epoch = epoch;
      }
    }
  }
  if (val_graphs.empty()) {
    best = model;
    local.best_epoch = cfg.epochs - 1;
  }
  if (trace) *trace = std::move(local);
  return best;
}

// ---------------------------------------------------------------------------
// Leakage guard: stage inputs carry the split they were drawn from.

enum class SplitTag { Train, Validation, Test };

inline const char* to_string(SplitTag t) {
  switch (t) {
    case SplitTag::Train: return "train";
    case SplitTag::Validation: return "validation";
    case SplitTag::Test: return "test";
  }
  return "?";
}

struct TaggedIndices {
  SplitTag tag = SplitTag::Train;
  std::vector<int> ids;
};

inline TaggedIndices split_view(const LabeledDataset& ds, SplitTag tag) {
  switch (tag) {
    case SplitTag::Train: return {tag, ds.split.train};
    case SplitTag::Validation: return {tag, ds.split.validation};
    case SplitTag::Test: return {tag, ds.split.test};
  }
  return {};
}

/// Throws LeakageError unless `in` is tagged train and every id is a training index.
inline void require_train(const LabeledDataset& ds, const TaggedIndices& in, const std::string& stage) {
  if (in.tag != SplitTag::Train)
    throw LeakageError(stage + ": received " + to_string(in.tag) + " graphs; only training graphs are allowed");
  for (int id : in.ids)
    if (!std::binary_search(ds.split.train.begin(), ds.split.train.end(), id))
      throw LeakageError(stage + ": graph " + std::to_string(id) + " is not in the training split");
}

// ---------------------------------------------------------------------------
// Pipeline

/// Runs body(0..n-1) on up to `jobs` threads. The first exception (lowest
/// index) is rethrown after all workers finish.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& body) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(jobs));
  for (std::size_t t = 0; t < workers; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

enum class GanScope { PerClass, NormalOnly };

/// Class: one graphon per class label. Cluster: training graphs of each class
/// are further split by k-means on structural features, one graphon per cluster.
enum class GraphonGrouping { Class, Cluster };

struct DataSource {
  std::string kind = "planted";  // planted | tu | file
  std::string path;              // tu: directory; file: serialized dataset
  std::string name;              // tu: dataset prefix
  std::vector<std::string> motifs{"K4", "C4"};
  int context_min = 10;
  int context_max = 12;
  double context_p = 0.25;
  int graphs_per_class = 100;
  int cross_edge_count = 2;
};

struct PipelineConfig {
  DataSource data;
  int anomaly_class = 0;
  bool downsample = true;
  double anomaly_fraction = 0;  // 0 = chosen to reach the 9.0% / 4.7% anomaly rates
  std::array<double, 3> split{2, 4, 4};
  int graphon_k = 0;  // 0 = round(mean node count / 2)
  GraphonGrouping graphon_grouping = GraphonGrouping::Class;
  int graphon_clusters = 2;  // per class, cluster grouping only
  BatchOptions producer;
  TrainConfig gan;
  GanScope gan_scope = GanScope::PerClass;
  ClassifierConfig classifier;
  bool augmentation = true;
  std::uint64_t seed = 0;
  int jobs = 1;  // worker threads for per-class GAN refinement

  void validate() const {
    if (jobs < 1) throw ArgumentError("pipeline: jobs must be >= 1");
    if (data.kind != "planted" && data.kind != "tu" && data.kind != "file")
      throw ArgumentError("pipeline: data.kind must be planted, tu or file");
    if (downsample && !(anomaly_fraction >= 0 && anomaly_fraction <= 1))
      throw ArgumentError("pipeline: anomaly fraction must lie in (0,1] (0 = automatic)");
    if (split[0] <= 0 || split[1] < 0 || split[2] <= 0) throw ArgumentError("pipeline: bad split ratios");
    if (graphon_k < 0) throw ArgumentError("pipeline: graphon K must be >= 0");
    if (graphon_clusters < 1) throw ArgumentError("pipeline: graphon_clusters must be >= 1");
    gan.validate();
    classifier.validate();
  }
};

inline LabeledDataset load_source(const DataSource& d, std::uint64_t seed) {
  if (d.kind == "tu") return load_dataset(d.path, d.name);
  if (d.kind == "file") return load_dataset_file(d.path);
  PlantedMotifConfig pc;
  for (const auto& m : d.motifs) pc.classes.push_back({motifs::parse(m), d.context_min, d.context_max, d.context_p});
  pc.graphs_per_class = d.graphs_per_class;
  pc.cross_edge_count = d.cross_edge_count;
  pc.seed = derive_seed(seed, "data");
  return generate_planted_motif_dataset(pc);
}

inline int default_graphon_k(std::span<const Graph> graphs) {
  double total = 0;
  for (const Graph& g : graphs) total += g.n();
  return std::max(1, static_cast<int>(std::lround(total / static_cast<double>(graphs.size()) / 2.0)));
}

/// Class graphons, plus cluster graphons when clustering is on. Masks and
/// partitions use a graph's cluster graphon when it has one; the GAN's motif
/// target is always the class graphon.
struct GraphonSet {
  std::map<int, Graphon> classes;
  std::map<int, Graphon> clusters;
  std::map<int, int> cluster_of;  // dataset index -> cluster id
  std::map<int, int> class_of_cluster;

  const Graphon& of_class(int c) const {
    const auto it = classes.find(c);
    if (it == classes.end()) throw DataError("no graphon for class " + std::to_string(c));
    return it->second;
  }

  const Graphon& of_graph(const LabeledDataset& ds, int i) const {
    if (const auto it = cluster_of.find(i); it != cluster_of.end()) {
      const auto w = clusters.find(it->second);
      if (w == clusters.end()) throw DataError("no graphon for cluster " + std::to_string(it->second));
      return w->second;
    }
    return of_class(ds.labels[static_cast<std::size_t>(i)]);
  }
};

/// Lloyd's k-means on graph_feature_vector with k-means++ seeding. Returns a
/// cluster index per graph, renumbered 0.. in order of first appearance so
/// empty clusters leave no gaps.
inline std::vector<int> cluster_graphs(std::span<const Graph> graphs, int k, std::uint64_t seed) {
  if (k < 1) throw ArgumentError("cluster_graphs: k must be >= 1");
  const std::size_t n = graphs.size();
  if (n == 0) return {};
  const auto x = detail::features_of(graphs, FeatureOptions{});
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), n);
  Rng rng(seed);
  std::vector<Eigen::VectorXd> centre{x[rng.below(n)]};
  while (centre.size() < kk) {
    std::vector<double> d2(n);
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centre) best = std::min(best, (x[i] - c).squaredNorm());
      d2[i] = best;
      total += best;
    }
    if (total <= 0) break;  // fewer distinct points than clusters
    double u = rng.uniform() * total;
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (u < d2[i]) {
        pick = i;
        break;
      }
      u -= d2[i];
    }
    centre.push_back(x[pick]);
  }
  std::vector<int> assign(n, -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      for (std::size_t c = 1; c < centre.size(); ++c)
        if ((x[i] - centre[c]).squaredNorm() < (x[i] - centre[static_cast<std::size_t>(best)]).squaredNorm())
          best = static_cast<int>(c);
      changed = changed || assign[i] != best;
      assign[i] = best;
    }
    if (!changed) break;
    for (std::size_t c = 0; c < centre.size(); ++c) {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(x[0].size());
      int count = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (assign[i] == static_cast<int>(c)) {
          sum += x[i];
          ++count;
        }
      if (count > 0) centre[c] = sum / count;
    }
  }
  std::map<int, int> renumber;
  for (int& a : assign) {
    const auto [it, fresh] = renumber.emplace(a, static_cast<int>(renumber.size()));
    a = it->second;
  }
  return assign;
}

/// Text layout in `dir`: graphon_<class>.txt per class; with clusters also
/// graphon_cluster_<id>.txt and clusters.csv (graph,class,cluster).
inline void save_graphon_set(const std::filesystem::path& dir, const GraphonSet& set) {
  for (const auto& [c, w] : set.classes) save_graphon(dir / ("graphon_" + std::to_string(c) + ".txt"), w);
  if (set.clusters.empty()) return;
  for (const auto& [id, w] : set.clusters) save_graphon(dir / ("graphon_cluster_" + std::to_string(id) + ".txt"), w);
  std::ofstream out(dir / "clusters.csv");
  if (!out) throw DataError("cannot write " + (dir / "clusters.csv").string());
  out << "graph,class,cluster\n";
  for (const auto& [i, id] : set.cluster_of) out << i << ',' << set.class_of_cluster.at(id) << ',' << id << '\n';
}

inline GraphonSet load_graphon_set(const std::filesystem::path& dir, const LabeledDataset& ds) {
  GraphonSet set;
  for (int c : std::set<int>(ds.labels.begin(), ds.labels.end()))
    set.classes[c] = load_graphon(dir / ("graphon_" + std::to_string(c) + ".txt"));
  const auto csv = dir / "clusters.csv";
  if (!std::filesystem::exists(csv)) return set;
  std::ifstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != "graph,class,cluster") throw DataError(csv.string() + ": bad header");
  for (int lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    std::istringstream row(line);
    int i = 0, c = 0, id = 0;
    char comma1 = 0, comma2 = 0;
    if (!(row >> i >> comma1 >> c >> comma2 >> id) || comma1 != ',' || comma2 != ',')
      throw DataError(csv.string() + ":" + std::to_string(lineno) + ": expected graph,class,cluster");
    if (i < 0 || i >= static_cast<int>(ds.size()) || ds.labels[static_cast<std::size_t>(i)] != c)
      throw DataError(csv.string() + ":" + std::to_string(lineno) + ": graph/class does not match the dataset");
    set.cluster_of[i] = id;
    set.class_of_cluster[id] = c;
  }
  for (const auto& [id, c] : set.class_of_cluster)
    set.clusters[id] = load_graphon(dir / ("graphon_cluster_" + std::to_string(id) + ".txt"));
  return set;
}

/// Everything a run produced, for dumping and inspection.
struct PipelineArtifacts {
  LabeledDataset dataset;  // after downsampling, with split
  GraphonSet graphons;
  std::vector<RawCounterfactual> raw;
  std::vector<RawCounterfactual> refined;  // same order as raw
  std::map<int, std::vector<TraceRow>> gan_traces;
  std::vector<std::string> skipped;
  ClassifierModel detector;
  ClassifierModel reference;  // real training data only
  ClassifierTrace detector_trace;
  std::vector<int> test_predicted, test_actual;
};

/// Fails with "<stage>: <message>" keeping the original error category.
template <class F>
auto run_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ProducerError& e) {
    throw ProducerError(std::string(stage) + ": " + e.what());
  } catch (const ArgumentError& e) {
    throw ArgumentError(std::string(stage) + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(stage) + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(std::string(stage) + ": " + e.what());
  }
}

inline std::vector<int> binary_labels(const LabeledDataset& ds, std::span<const int> ids) {
  std::vector<int> out;
  for (int i : ids) out.push_back(binary_label(ds, i));
  return out;
}

inline std::vector<Graph> graphs_at(const LabeledDataset& ds, std::span<const int> ids) {
  std::vector<Graph> out;
  for (int i : ids) out.push_back(ds.graphs[static_cast<std::size_t>(i)]);
  return out;
}

/// Motif nodes map to their ids in the motif donor; context nodes have none.
inline CounterfactualPair pair_with_donor(const RawCounterfactual& cf, const LabeledDataset& ds) {
  CounterfactualPair p;
  p.cf = &cf.graph;
  p.source = &ds.graphs[static_cast<std::size_t>(cf.provenance.motif_donor)];
  for (std::size_t v = 0; v < cf.roles.size(); ++v)
    p.node_map.push_back(cf.roles[v] == NodeRole::Motif ? cf.source_ids[v] : -1);
  return p;
}

// ---------------------------------------------------------------------------
// Stages. Each takes the train view explicitly so the leakage guard runs at
// every entry point, whether called from run_pipeline or from the CLI.

/// load -> downsample anomaly class -> stratified split.
inline LabeledDataset prepare_dataset(const PipelineConfig& cfg) {
  LabeledDataset ds = run_stage("load", [&] { return load_source(cfg.data, cfg.seed); });
  ds = run_stage("downsample", [&] {
    if (!cfg.downsample) {
      LabeledDataset out = ds;
      out.anomaly_class = cfg.anomaly_class;
      return out;
    }
    const double f = cfg.anomaly_fraction > 0 ? cfg.anomaly_fraction : default_anomaly_fraction(ds, cfg.anomaly_class);
    return downsample_anomaly(ds, cfg.anomaly_class, f, cfg.seed);
  });
  ds.split = run_stage("split", [&] { return stratified_split(ds, cfg.split, cfg.seed); });
  ds.validate();
  return ds;
}

struct GraphonOptions {
  int k = 0;  // 0 = default_graphon_k over all training graphs
  GraphonGrouping grouping = GraphonGrouping::Class;
  int clusters = 2;
  std::uint64_t seed = 0;
};

inline GraphonOptions graphon_options(const PipelineConfig& cfg) {
  return {cfg.graphon_k, cfg.graphon_grouping, cfg.graphon_clusters, cfg.seed};
}

/// One graphon per class from that class's training graphs, and per cluster
/// under cluster grouping. Every graphon shares one K.
inline GraphonSet estimate_graphons(const LabeledDataset& ds, const TaggedIndices& train, const GraphonOptions& opt = {}) {
  require_train(ds, train, "graphon");
  return run_stage("graphon", [&] {
    const std::vector<Graph> all = graphs_at(ds, train.ids);
    if (all.empty()) throw DataError("no training graphs");
    const int K = opt.k > 0 ? opt.k : default_graphon_k(all);
    std::map<int, std::vector<int>> by_class;
    for (int i : train.ids) by_class[ds.labels[static_cast<std::size_t>(i)]].push_back(i);
    GraphonSet out;
    int next_id = 0;
    for (const auto& [c, ids] : by_class) {
      const std::vector<Graph> gs = graphs_at(ds, ids);
      out.classes[c] = estimate_graphon(gs, K);
      if (opt.grouping != GraphonGrouping::Cluster) continue;
      const auto assign = cluster_graphs(gs, opt.clusters, derive_seed(opt.seed, "cluster", static_cast<std::uint64_t>(c)));
      std::map<int, std::vector<Graph>> members;
      for (std::size_t k = 0; k < ids.size(); ++k) {
        const int id = next_id + assign[k];
        out.cluster_of[ids[k]] = id;
        out.class_of_cluster[id] = c;
        members[id].push_back(gs[k]);
      }
      for (auto& [id, m] : members) out.clusters[id] = estimate_graphon(m, K);
      next_id += static_cast<int>(members.size());
    }
    return out;
  });
}

inline BatchResult produce_counterfactuals(const LabeledDataset& ds, const TaggedIndices& train,
                                           const GraphonSet& graphons, const BatchOptions& opt, std::uint64_t seed) {
  require_train(ds, train, "produce");
  BatchResult batch = run_stage("produce", [&] {
    return produce_batch(
        ds, train.ids, [&](int i) -> const Graphon& { return graphons.of_graph(ds, i); }, opt,
        derive_seed(seed, "produce"));
  });
  if (batch.items.empty()) throw ProducerError("produce: no raw counterfactual could be produced");
  return batch;
}

struct RefineOutput {
  std::vector<RawCounterfactual> refined;  // same order as the input; untouched items are copied
  std::map<int, RefineResult> per_class;
};

/// Per-class (or normal-only) GAN refinement. Context statistics come from
/// each item's context donor under the graphon that masked it.
inline RefineOutput refine_counterfactuals(const LabeledDataset& ds, const TaggedIndices& train,
                                           const GraphonSet& graphons,
                                           const std::vector<RawCounterfactual>& raw, const TrainConfig& gan,
                                           GanScope scope, std::uint64_t seed, int jobs) {
  require_train(ds, train, "refine");
  std::set<int> train_set(train.ids.begin(), train.ids.end());
  for (const auto& cf : raw)
    if (!train_set.count(cf.provenance.motif_donor) || !train_set.count(cf.provenance.context_donor))
      throw LeakageError("refine: counterfactual donor outside the train split");
  return run_stage("refine", [&] {
    RefineOutput out;
    out.refined = raw;
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const int c = raw[i].provenance.label;
      if (scope == GanScope::NormalOnly && c == ds.anomaly_class) continue;
      groups[c].push_back(i);
    }
    // Classes train independently on their own seed streams, so running
    // them on several threads leaves every result unchanged.
    std::vector<std::pair<int, std::vector<std::size_t>>> work(groups.begin(), groups.end());
    std::vector<RefineResult> results(work.size());
    parallel_for(work.size(), jobs, [&](std::size_t w) {
      const auto& [c, members] = work[w];
      std::vector<RefineItem> items;
      for (std::size_t i : members) {
        const auto& cf = raw[i];
        const int h = cf.provenance.context_donor;
        items.push_back(make_refine_item(cf, ds.graphs[static_cast<std::size_t>(h)], graphons.of_graph(ds, h)));
      }
      std::vector<Graph> reals;
      for (int i : train.ids)
        if (ds.labels[static_cast<std::size_t>(i)] == c) reals.push_back(ds.graphs[static_cast<std::size_t>(i)]);
      TrainConfig tc = gan;
      tc.seed = derive_seed(seed, "gan", static_cast<std::uint64_t>(c));
      results[w] = train_gan(items, reals, graphons.of_class(c), tc);
    });
    for (std::size_t w = 0; w < work.size(); ++w) {
      const auto& [c, members] = work[w];
      for (std::size_t k = 0; k < members.size(); ++k) out.refined[members[k]] = results[w].refined[k];
      out.per_class[c] = std::move(results[w]);
    }
    return out;
  });
}

/// Realism against the real training graphs, validity under `reference`,
/// proximity and sparsity against each motif donor; refined and raw.
inline void score_counterfactuals(const LabeledDataset& ds, const TaggedIndices& train,
                                  const std::vector<RawCounterfactual>& raw,
                                  const std::vector<RawCounterfactual>& refined, const ClassifierModel& reference,
                                  MetricsReport& report) {
  if (raw.size() != refined.size()) throw ArgumentError("score: raw and refined counts differ");
  if (raw.empty()) throw ArgumentError("score: no counterfactuals");
  const std::vector<Graph> train_graphs = graphs_at(ds, train.ids);
  std::vector<Graph> raw_graphs, ref_graphs;
  std::vector<int> intended;
  std::vector<CounterfactualPair> raw_pairs, ref_pairs;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw_graphs.push_back(raw[i].graph);
    ref_graphs.push_back(refined[i].graph);
    intended.push_back(raw[i].provenance.label == ds.anomaly_class ? 0 : 1);
    raw_pairs.push_back(pair_with_donor(raw[i], ds));
    ref_pairs.push_back(pair_with_donor(refined[i], ds));
  }
  const auto ref_predict = [&](const Graph& g) { return predict(reference, g).label; };
  report.counterfactuals = static_cast<int>(raw.size());
  report.realism = realism_score(train_graphs, ref_graphs);
  report.raw_realism = realism_score(train_graphs, raw_graphs);
  report.validity = validity_score(ref_graphs, intended, ref_predict);
  report.raw_validity = validity_score(raw_graphs, intended, ref_predict);
  report.proximity = proximity_score(ref_pairs);
  report.raw_proximity = proximity_score(raw_pairs);
  report.sparsity = sparsity_score(ref_pairs);
  report.raw_sparsity = sparsity_score(raw_pairs);
}

/// Precision/recall/F1 on the test split; fills predicted and actual labels.
inline DetectionMetrics evaluate_detector(const LabeledDataset& ds, const ClassifierModel& model, int positive_class,
                                          std::vector<int>* predicted = nullptr, std::vector<int>* actual = nullptr) {
  std::vector<int> pred, act = binary_labels(ds, ds.split.test);
  for (int i : ds.split.test) pred.push_back(predict(model, ds.graphs[static_cast<std::size_t>(i)]).label);
  const DetectionMetrics dm = detection_metrics(pred, act, positive_class);
  if (predicted) *predicted = std::move(pred);
  if (actual) *actual = std::move(act);
  return dm;
}

/// Counterfactuals carry their motif donor's class.
inline void append_counterfactuals(const LabeledDataset& ds, const std::vector<RawCounterfactual>& cfs,
                                   std::vector<Graph>& graphs, std::vector<int>& labels) {
  for (const auto& cf : cfs) {
    graphs.push_back(cf.graph);
    labels.push_back(cf.provenance.label == ds.anomaly_class ? 0 : 1);
  }
}

inline MetricsReport run_pipeline(const PipelineConfig& cfg, PipelineArtifacts* artifacts = nullptr) {
  cfg.validate();
  PipelineArtifacts local;
  PipelineArtifacts& a = artifacts ? *artifacts : local;

  a.dataset = prepare_dataset(cfg);
  const LabeledDataset& ds = a.dataset;
  const TaggedIndices train = split_view(ds, SplitTag::Train);
  require_train(ds, train, "classifier");
  const std::vector<Graph> train_graphs = graphs_at(ds, train.ids);
  const std::vector<int> train_labels = binary_labels(ds, train.ids);
  const std::vector<Graph> val_graphs = graphs_at(ds, ds.split.validation);
  const std::vector<int> val_labels = binary_labels(ds, ds.split.validation);

  ClassifierConfig ccfg = cfg.classifier;
  ccfg.seed = derive_seed(cfg.seed, "classifier");
  a.reference = run_stage("classifier", [&] { return train_classifier(train_graphs, train_labels, val_graphs, val_labels, ccfg); });

  MetricsReport report;
  report.dataset = ds.name;
  report.seed = cfg.seed;
  report.augmentation = cfg.augmentation;

  if (cfg.augmentation) {
    a.graphons = estimate_graphons(ds, train, graphon_options(cfg));
    BatchResult batch = produce_counterfactuals(ds, train, a.graphons, cfg.producer, cfg.seed);
    a.raw = std::move(batch.items);
    a.skipped = std::move(batch.skipped);
    RefineOutput ref = refine_counterfactuals(ds, train, a.graphons, a.raw, cfg.gan, cfg.gan_scope, cfg.seed, cfg.jobs);
    a.refined = std::move(ref.refined);
    for (auto& [c, r] : ref.per_class) a.gan_traces[c] = std::move(r.trace);
    score_counterfactuals(ds, train, a.raw, a.refined, a.reference, report);

    std::vector<Graph> aug_graphs = train_graphs;
    std::vector<int> aug_labels = train_labels;
    append_counterfactuals(ds, a.refined, aug_graphs, aug_labels);
    // Same initialization and batch-order seed as the reference model so
    // on/off runs differ only in the training data.
    a.detector = run_stage("classifier", [&] {
      return train_classifier(aug_graphs, aug_labels, val_graphs, val_labels, ccfg, &a.detector_trace);
    });
  } else {
    a.detector = a.reference;
  }

  const DetectionMetrics dm = evaluate_detector(ds, a.detector, cfg.classifier.positive_class, &a.test_predicted, &a.test_actual);
  report.precision = dm.precision;
  report.recall = dm.recall;
  report.f1 = dm.f1;
  report.validate();
  return report;
}

// ---------------------------------------------------------------------------
// Classifier persistence

inline void save_classifier(const std::filesystem::path& path, const ClassifierModel& m) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << kCheckpointMagic << " 1\nclassifier " << m.feature_buckets << ' ' << (m.trained ? 1 : 0) << '\n';
  write_gnn(out, "classifier", m.params);
}

inline ClassifierModel load_classifier(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open classifier: " + path.string());
  std::string magic, tag;
  int version = 0, trained = 0;
  ClassifierModel m;
  if (!(in >> magic >> version >> tag >> m.feature_buckets >> trained) || magic != kCheckpointMagic || version != 1 ||
      tag != "classifier")
    throw DataError(path.string() + ": not a version-1 classifier file");
  m.params = read_gnn(in);
  m.trained = trained != 0;
  if (m.params.encoder.empty() || m.params.encoder.front().weight.rows() != m.feature_buckets)
    throw DataError(path.string() + ": feature width does not match the encoder");
  return m;
}

}  // namespace motifcar
