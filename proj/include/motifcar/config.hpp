#pragma once

// Structured run configuration.
//
// The JSON layout mirrors PipelineConfig section by section. Resolution order
// is defaults, then the config file, then `--set key.path=value` overrides;
// a key that does not exist in the defaults is rejected, as is a value whose
// JSON type differs from the default's.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "motifcar/detector.hpp"
#include "motifcar/error.hpp"
#include "motifcar/gradcheck.hpp"
#include "motifcar/random.hpp"

namespace motifcar {

using Json = nlohmann::ordered_json;

inline Json to_json(const PipelineConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["augmentation"] = c.augmentation;
  j["anomaly_class"] = c.anomaly_class;
  j["downsample"] = c.downsample;
  j["anomaly_fraction"] = c.anomaly_fraction;
  j["split"] = c.split;
  j["graphon_k"] = c.graphon_k;
  j["graphon_grouping"] = c.graphon_grouping == GraphonGrouping::Class ? "class" : "cluster";
  j["graphon_clusters"] = c.graphon_clusters;
  j["gan_scope"] = c.gan_scope == GanScope::PerClass ? "per_class" : "normal_only";

  Json& d = j["data"];
  d["kind"] = c.data.kind;
  d["path"] = c.data.path;
  d["name"] = c.data.name;
  d["motifs"] = c.data.motifs;
  d["context_min"] = c.data.context_min;
  d["context_max"] = c.data.context_max;
  d["context_p"] = c.data.context_p;
  d["graphs_per_class"] = c.data.graphs_per_class;
  d["cross_edge_count"] = c.data.cross_edge_count;

  Json& p = j["producer"];
  p["eta"] = c.producer.producer.eta;
  if (const auto* t = std::get_if<ThresholdBinarize>(&c.producer.producer.binarize)) {
    p["binarize"] = "threshold";
    p["threshold"] = t->threshold;
  } else {
    p["binarize"] = "stochastic";
    p["threshold"] = 0.5;
  }
  p["pairing"] = c.producer.pairing == PairingPolicy::SameClass ? "same_class" : "any_class";
  p["per_graph"] = c.producer.per_graph;
  p["max_retries"] = c.producer.max_retries;

  Json& g = j["gan"];
  g["steps"] = c.gan.steps;
  g["gen_steps_per_iter"] = c.gan.gen_steps_per_iter;
  g["disc_steps_per_iter"] = c.gan.disc_steps_per_iter;
  g["learning_rate"] = c.gan.learning_rate;
  g["batch_size"] = c.gan.batch_size;
  g["lambda_motif"] = c.gan.weights.motif;
  g["lambda_context"] = c.gan.weights.context;
  g["lambda_connection"] = c.gan.weights.connection;
  g["gamma"] = c.gan.gamma;
  g["lambda_g"] = c.gan.lambda_g;
  g["tau_g"] = c.gan.tau_g;
  g["reg_sign"] = c.gan.reg_sign;
  g["frozen_noise"] = c.gan.frozen_noise;
  g["hidden_dim"] = c.gan.hidden_dim;
  g["head_layers"] = c.gan.head_layers;
  g["feature_buckets"] = c.gan.feature_buckets;

  Json& k = j["classifier"];
  k["epochs"] = c.classifier.epochs;
  k["learning_rate"] = c.classifier.learning_rate;
  k["batch_size"] = c.classifier.batch_size;
  k["hidden_dim"] = c.classifier.hidden_dim;
  k["head_layers"] = c.classifier.head_layers;
  k["feature_buckets"] = c.classifier.feature_buckets;
  k["balanced"] = c.classifier.balanced;
  k["positive_class"] = c.classifier.positive_class;
  return j;
}

namespace detail {

inline bool same_kind(const Json& want, const Json& got) {
  if (want.is_number()) {
    if (!got.is_number()) return false;
    // An integer key must not receive a fractional value.
    return !(want.is_number_integer() && got.is_number_float());
  }
  if (want.is_array()) return got.is_array() && got.size() == want.size();
  return want.type() == got.type();
}

inline void check_keys(const Json& defaults, const Json& given, const std::string& prefix) {
  if (!given.is_object()) throw ArgumentError("config: " + (prefix.empty() ? std::string("root") : prefix) + " must be an object");
  for (const auto& [key, value] : given.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!defaults.contains(key)) throw ArgumentError("config: unknown key '" + path + "'");
    const Json& want = defaults.at(key);
    if (want.is_object()) {
      check_keys(want, value, path);
      continue;
    }
    if (!same_kind(want, value)) throw ArgumentError("config: wrong type for '" + path + "'");
  }
}

template <class T>
void get(const Json& j, const char* key, T& out) {
  out = j.at(key).get<T>();
}

}  // namespace detail

inline PipelineConfig pipeline_from_json(const Json& given) {
  const Json defaults = to_json(PipelineConfig{});
  detail::check_keys(defaults, given, "");
  Json j = defaults;
  j.merge_patch(given);

  PipelineConfig c;
  using detail::get;
  get(j, "seed", c.seed);
  get(j, "jobs", c.jobs);
  get(j, "augmentation", c.augmentation);
  get(j, "anomaly_class", c.anomaly_class);
  get(j, "downsample", c.downsample);
  get(j, "anomaly_fraction", c.anomaly_fraction);
  get(j, "split", c.split);
  get(j, "graphon_k", c.graphon_k);
  const auto grouping = j.at("graphon_grouping").get<std::string>();
  if (grouping == "class") c.graphon_grouping = GraphonGrouping::Class;
  else if (grouping == "cluster") c.graphon_grouping = GraphonGrouping::Cluster;
  else throw ArgumentError("config: graphon_grouping must be class or cluster");
  get(j, "graphon_clusters", c.graphon_clusters);
  const auto scope = j.at("gan_scope").get<std::string>();
  if (scope == "per_class") c.gan_scope = GanScope::PerClass;
  else if (scope == "normal_only") c.gan_scope = GanScope::NormalOnly;
  else throw ArgumentError("config: gan_scope must be per_class or normal_only");

  const Json& d = j.at("data");
  get(d, "kind", c.data.kind);
  get(d, "path", c.data.path);
  get(d, "name", c.data.name);
  get(d, "motifs", c.data.motifs);
  get(d, "context_min", c.data.context_min);
  get(d, "context_max", c.data.context_max);
  get(d, "context_p", c.data.context_p);
  get(d, "graphs_per_class", c.data.graphs_per_class);
  get(d, "cross_edge_count", c.data.cross_edge_count);

  const Json& p = j.at("producer");
  get(p, "eta", c.producer.producer.eta);
  const auto mode = p.at("binarize").get<std::string>();
  if (mode == "threshold") c.producer.producer.binarize = ThresholdBinarize{p.at("threshold").get<double>()};
  else if (mode == "stochastic") c.producer.producer.binarize = StochasticBinarize{derive_seed(c.seed, "binarize")};
  else throw ArgumentError("config: producer.binarize must be threshold or stochastic");
  const auto pairing = p.at("pairing").get<std::string>();
  if (pairing == "same_class") c.producer.pairing = PairingPolicy::SameClass;
  else if (pairing == "any_class") c.producer.pairing = PairingPolicy::AnyClass;
  else throw ArgumentError("config: producer.pairing must be same_class or any_class");
  get(p, "per_graph", c.producer.per_graph);
  get(p, "max_retries", c.producer.max_retries);

  const Json& g = j.at("gan");
  get(g, "steps", c.gan.steps);
  get(g, "gen_steps_per_iter", c.gan.gen_steps_per_iter);
  get(g, "disc_steps_per_iter", c.gan.disc_steps_per_iter);
  get(g, "learning_rate", c.gan.learning_rate);
  get(g, "batch_size", c.gan.batch_size);
  get(g, "lambda_motif", c.gan.weights.motif);
  get(g, "lambda_context", c.gan.weights.context);
  get(g, "lambda_connection", c.gan.weights.connection);
  get(g, "gamma", c.gan.gamma);
  get(g, "lambda_g", c.gan.lambda_g);
  get(g, "tau_g", c.gan.tau_g);
  get(g, "reg_sign", c.gan.reg_sign);
  get(g, "frozen_noise", c.gan.frozen_noise);
  get(g, "hidden_dim", c.gan.hidden_dim);
  get(g, "head_layers", c.gan.head_layers);
  get(g, "feature_buckets", c.gan.feature_buckets);

  const Json& k = j.at("classifier");
  get(k, "epochs", c.classifier.epochs);
  get(k, "learning_rate", c.classifier.learning_rate);
  get(k, "batch_size", c.classifier.batch_size);
  get(k, "hidden_dim", c.classifier.hidden_dim);
  get(k, "head_layers", c.classifier.head_layers);
  get(k, "feature_buckets", c.classifier.feature_buckets);
  get(k, "balanced", c.classifier.balanced);
  get(k, "positive_class", c.classifier.positive_class);
  c.validate();
  return c;
}

/// Everything the CLI reads from a config file: the pipeline plus the
/// gradient-check settings, which the pipeline never uses.
struct RunConfig {
  PipelineConfig pipeline;
  GradcheckOptions gradcheck;
};

inline Json to_json(const RunConfig& r) {
  Json j = to_json(r.pipeline);
  Json& g = j["gradcheck"];
  g["points"] = r.gradcheck.points;
  g["step"] = r.gradcheck.step;
  g["tolerance"] = r.gradcheck.tolerance;
  return j;
}

/// The gradcheck seed follows the run seed.
inline RunConfig run_config_from_json(const Json& given) {
  const Json defaults = to_json(RunConfig{});
  detail::check_keys(defaults, given, "");
  Json pipeline = given;
  RunConfig r;
  Json g = defaults.at("gradcheck");
  if (pipeline.contains("gradcheck")) {
    g.merge_patch(pipeline.at("gradcheck"));
    pipeline.erase("gradcheck");
  }
  r.pipeline = pipeline_from_json(pipeline);
  detail::get(g, "points", r.gradcheck.points);
  detail::get(g, "step", r.gradcheck.step);
  detail::get(g, "tolerance", r.gradcheck.tolerance);
  if (r.gradcheck.points < 1) throw ArgumentError("config: gradcheck.points must be >= 1");
  if (!(r.gradcheck.step > 0)) throw ArgumentError("config: gradcheck.step must be positive");
  if (!(r.gradcheck.tolerance > 0)) throw ArgumentError("config: gradcheck.tolerance must be positive");
  r.gradcheck.seed = r.pipeline.seed;
  return r;
}

inline Json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("config: cannot open " + path.string());
  try {
    return Json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("config: " + path.string() + ": " + e.what());
  }
}

/// Applies "a.b.c=value" to a JSON object. The value is parsed as JSON when
/// possible, otherwise taken as a string.
inline void apply_override(Json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ArgumentError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    value = raw;
  }
  Json* node = &j;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ArgumentError("override '" + assignment + "' has an empty key segment");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (!node->is_null() && !node->is_object()) throw ArgumentError("override '" + assignment + "' descends into a value");
    start = dot + 1;
  }
}

/// 16 hex digits of FNV-1a over the compact dump, with the seed removed so
/// runs that differ only by seed share a hash.
inline std::string config_hash(const PipelineConfig& c) {
  Json j = to_json(c);
  j.erase("seed");
  j.erase("jobs");
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << detail::fnv1a(j.dump());
  return s.str();
}

}  // namespace motifcar
