// motifcar command-line driver.
//
// Exit codes: 0 ok, 1 usage/argument error, 2 data/format error, 3 numerical
// failure. Failures print one line to stderr:
//   motifcar-error code=<n> kind=<usage|data|numerical> message="<text>"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "motifcar.hpp"

namespace fs = std::filesystem;
using namespace motifcar;

namespace {

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

int fail(int code, const char* kind, const std::string& message) {
  std::cerr << "motifcar-error code=" << code << " kind=" << kind << " message=\"" << one_line(message) << "\"\n";
  return code;
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
}


/// Dataset file with a stored split; an absent split is an input error.
LabeledDataset load_split_dataset(const fs::path& path) {
  LabeledDataset ds = load_dataset_file(path);
  if (ds.split.train.empty()) throw DataError(path.string() + ": dataset has no train split (produce it with `synth`)");
  ds.validate();
  return ds;
}

std::string fixed(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << v;
  return s.str();
}

void write_summary(const fs::path& path, const MetricsReport& r, const PipelineArtifacts& a) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "dataset " << r.dataset << "  seed " << r.seed << "  config " << r.config_hash << '\n';
  out << "graphs " << a.dataset.graphs.size() << "  train " << a.dataset.split.train.size() << "  validation "
      << a.dataset.split.validation.size() << "  test " << a.dataset.split.test.size() << '\n';
  out << "augmentation " << (r.augmentation ? "on" : "off") << "  counterfactuals " << r.counterfactuals
      << "  skipped donors " << a.skipped.size() << '\n';
  out << "precision " << fixed(r.precision) << "  recall " << fixed(r.recall) << "  f1 " << fixed(r.f1) << '\n';
  if (r.augmentation) {
    out << "            realism  validity  proximity  sparsity\n";
    out << "refined     " << fixed(r.realism) << "   " << fixed(r.validity) << "    " << fixed(r.proximity) << "    "
        << fixed(r.sparsity) << '\n';
    out << "raw         " << fixed(r.raw_realism) << "   " << fixed(r.raw_validity) << "    " << fixed(r.raw_proximity)
        << "    " << fixed(r.raw_sparsity) << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MotifCAR: motif-aware counterfactual augmentation for graph anomaly detection"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  std::string config_file;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool print_config = false;
  auto* seed_opt = app.add_option("--seed", seed, "Master seed (config key: seed)");
  auto* jobs_opt = app.add_option("--jobs", jobs, "Worker threads for per-class stages (config key: jobs)")->check(CLI::PositiveNumber);
  app.add_option("--config", config_file, "JSON config file (see docs/config.md)");
  app.add_option("--set", overrides, "Override a config key, e.g. --set gan.steps=200 (repeatable)");
  app.add_flag("--print-config", print_config, "Print the resolved configuration and exit");

  // synth
  auto* synth = app.add_subcommand("synth", "Build the configured dataset (downsampled and split) and save it");
  std::string synth_out, synth_tu;
  synth->add_option("--out", synth_out, "Dataset file")->required();
  synth->add_option("--tu-dir", synth_tu, "Also write TU-format files into this directory");

  // estimate-graphon
  auto* est = app.add_subcommand("estimate-graphon", "Estimate class graphons (and cluster graphons if configured) from the train split");
  std::string est_dataset, est_out;
  est->add_option("--dataset", est_dataset, "Dataset file")->required();
  est->add_option("--out-dir", est_out, "Directory for graphon_<class>.txt, graphon_cluster_<id>.txt and clusters.csv")->required();

  // produce
  auto* prod = app.add_subcommand("produce", "Produce raw counterfactuals from train-split donors");
  std::string prod_dataset, prod_graphons, prod_out, prod_manifest;
  prod->add_option("--dataset", prod_dataset, "Dataset file")->required();
  prod->add_option("--graphon-dir", prod_graphons, "Directory with graphon_<class>.txt")->required();
  prod->add_option("--out", prod_out, "Raw counterfactuals (JSON)")->required();
  prod->add_option("--manifest", prod_manifest, "Provenance manifest (CSV)");

  // refine
  auto* ref = app.add_subcommand("refine", "Refine raw counterfactuals with per-class GANs");
  std::string ref_dataset, ref_graphons, ref_raw, ref_out, ref_dir;
  ref->add_option("--dataset", ref_dataset, "Dataset file")->required();
  ref->add_option("--graphon-dir", ref_graphons, "Directory with graphon_<class>.txt")->required();
  ref->add_option("--raw", ref_raw, "Raw counterfactuals (JSON)")->required();
  ref->add_option("--out", ref_out, "Refined counterfactuals (JSON)")->required();
  ref->add_option("--artifact-dir", ref_dir, "Directory for trace_<class>.csv and checkpoint_<class>.txt");

  // train
  auto* train = app.add_subcommand("train", "Train the GNN detector on the train split");
  std::string train_dataset, train_out, train_augment;
  train->add_option("--dataset", train_dataset, "Dataset file")->required();
  train->add_option("--out", train_out, "Model file")->required();
  train->add_option("--augment", train_augment, "Counterfactuals (JSON) added to the training set");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Score a detector on the test split, and optionally counterfactual quality");
  std::string eval_dataset, eval_model, eval_out, eval_raw, eval_refined, eval_reference;
  eval->add_option("--dataset", eval_dataset, "Dataset file")->required();
  eval->add_option("--model", eval_model, "Model file")->required();
  eval->add_option("--out", eval_out, "Report (JSON)")->required();
  eval->add_option("--raw", eval_raw, "Raw counterfactuals (JSON)");
  eval->add_option("--refined", eval_refined, "Refined counterfactuals (JSON), same order as --raw");
  eval->add_option("--reference", eval_reference, "Reference classifier for validity (default: --model)");

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Run every stage end to end");
  std::string pipe_out, pipe_ledger;
  pipe->add_option("--out-dir", pipe_out, "Output directory")->required();
  pipe->add_option("--ledger", pipe_ledger, "Append one CSV row to this run ledger");

  // gradcheck
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every analytic gradient");
  std::string grad_out;
  int grad_points = 0;
  double grad_tolerance = 0;
  auto* points_opt = grad->add_option("--points", grad_points, "Random points per op (config key: gradcheck.points)")
                         ->check(CLI::PositiveNumber);
  auto* tolerance_opt =
      grad->add_option("--tolerance", grad_tolerance, "Maximum norm-relative error (config key: gradcheck.tolerance)");
  grad->add_option("--out", grad_out, "Results (JSON)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail(1, "usage", e.what());
  }

  try {
    Json given = Json::object();
    if (!config_file.empty()) given = read_config_file(config_file);
    for (const auto& o : overrides) apply_override(given, o);
    if (*seed_opt) given["seed"] = seed;
    if (*jobs_opt) given["jobs"] = jobs;
    if (*points_opt) given["gradcheck"]["points"] = grad_points;
    if (*tolerance_opt) given["gradcheck"]["tolerance"] = grad_tolerance;
    const RunConfig run = run_config_from_json(given);
    const PipelineConfig& cfg = run.pipeline;

    if (print_config) {
      std::cout << to_json(run).dump(2) << '\n';
      return 0;
    }
    if (app.get_subcommands().empty()) return fail(1, "usage", "no subcommand given (see --help)");

    if (*synth) {
      const LabeledDataset ds = prepare_dataset(cfg);
      save_dataset(synth_out, ds);
      if (!synth_tu.empty()) {
        ensure_dir(synth_tu);
        write_tu_dataset(ds, synth_tu);
      }
      std::cout << "graphs " << ds.graphs.size() << " train " << ds.split.train.size() << " validation "
                << ds.split.validation.size() << " test " << ds.split.test.size() << '\n';
    } else if (*est) {
      const LabeledDataset ds = load_split_dataset(est_dataset);
      const GraphonSet graphons = estimate_graphons(ds, split_view(ds, SplitTag::Train), graphon_options(cfg));
      ensure_dir(est_out);
      save_graphon_set(est_out, graphons);
      for (const auto& [c, w] : graphons.classes) std::cout << "class " << c << " K " << w.K() << '\n';
      for (const auto& [id, w] : graphons.clusters)
        std::cout << "cluster " << id << " class " << graphons.class_of_cluster.at(id) << '\n';
    } else if (*prod) {
      const LabeledDataset ds = load_split_dataset(prod_dataset);
      const GraphonSet graphons = load_graphon_set(prod_graphons, ds);
      const BatchResult batch = produce_counterfactuals(ds, split_view(ds, SplitTag::Train), graphons, cfg.producer, cfg.seed);
      save_counterfactuals(prod_out, batch.items);
      if (!prod_manifest.empty()) save_manifest(prod_manifest, batch.items);
      std::cout << "produced " << batch.items.size() << " skipped " << batch.skipped.size() << '\n';
      for (const auto& s : batch.skipped) std::cerr << "skipped: " << s << '\n';
    } else if (*ref) {
      const LabeledDataset ds = load_split_dataset(ref_dataset);
      const GraphonSet graphons = load_graphon_set(ref_graphons, ds);
      const auto raw = load_counterfactuals(ref_raw);
      const RefineOutput r = refine_counterfactuals(ds, split_view(ds, SplitTag::Train), graphons, raw, cfg.gan,
                                                    cfg.gan_scope, cfg.seed, cfg.jobs);
      save_counterfactuals(ref_out, r.refined);
      if (!ref_dir.empty()) {
        ensure_dir(ref_dir);
        for (const auto& [c, res] : r.per_class) {
          write_trace_csv(fs::path(ref_dir) / ("trace_" + std::to_string(c) + ".csv"), res.trace);
          save_gan_checkpoint(fs::path(ref_dir) / ("checkpoint_" + std::to_string(c) + ".txt"), res);
        }
      }
      std::cout << "refined " << r.refined.size() << '\n';
    } else if (*train) {
      const LabeledDataset ds = load_split_dataset(train_dataset);
      const TaggedIndices tr = split_view(ds, SplitTag::Train);
      require_train(ds, tr, "classifier");
      std::vector<Graph> graphs = graphs_at(ds, tr.ids);
      std::vector<int> labels = binary_labels(ds, tr.ids);
      if (!train_augment.empty()) append_counterfactuals(ds, load_counterfactuals(train_augment), graphs, labels);
      ClassifierConfig ccfg = cfg.classifier;
      ccfg.seed = derive_seed(cfg.seed, "classifier");
      ClassifierTrace trace;
      const ClassifierModel m = run_stage("classifier", [&] {
        return train_classifier(graphs, labels, graphs_at(ds, ds.split.validation), binary_labels(ds, ds.split.validation),
                                ccfg, &trace);
      });
      save_classifier(train_out, m);
      std::cout << "trained on " << graphs.size() << " graphs, best epoch " << trace.best_epoch << '\n';
    } else if (*eval) {
      const LabeledDataset ds = load_split_dataset(eval_dataset);
      const ClassifierModel model = load_classifier(eval_model);
      MetricsReport report;
      report.dataset = ds.name;
      report.seed = cfg.seed;
      report.config_hash = config_hash(cfg);
      report.augmentation = !eval_refined.empty();
      if (eval_raw.empty() != eval_refined.empty()) throw ArgumentError("evaluate: --raw and --refined go together");
      if (!eval_raw.empty()) {
        const ClassifierModel reference = eval_reference.empty() ? model : load_classifier(eval_reference);
        score_counterfactuals(ds, split_view(ds, SplitTag::Train), load_counterfactuals(eval_raw),
                              load_counterfactuals(eval_refined), reference, report);
      }
      const DetectionMetrics dm = evaluate_detector(ds, model, cfg.classifier.positive_class);
      report.precision = dm.precision;
      report.recall = dm.recall;
      report.f1 = dm.f1;
      report.validate();
      write_json(eval_out, report.to_json());
      std::cout << "f1 " << fixed(report.f1) << '\n';
    } else if (*pipe) {
      ensure_dir(pipe_out);
      const fs::path dir = pipe_out;
      write_json(dir / "config.json", to_json(cfg));
      PipelineArtifacts a;
      MetricsReport report;
      try {
        report = run_pipeline(cfg, &a);
      } catch (...) {
        // Flush what exists for debugging, then report the original error.
        if (!a.raw.empty()) save_counterfactuals(dir / "raw.partial.json", a.raw);
        if (!a.refined.empty()) save_counterfactuals(dir / "refined.partial.json", a.refined);
        throw;
      }
      report.config_hash = config_hash(cfg);
      write_json(dir / "report.json", report.to_json());
      write_summary(dir / "summary.txt", report, a);
      save_dataset(dir / "dataset.txt", a.dataset);
      save_classifier(dir / "detector.txt", a.detector);
      if (cfg.augmentation) {
        save_counterfactuals(dir / "raw.json", a.raw);
        save_counterfactuals(dir / "refined.json", a.refined);
        save_manifest(dir / "manifest.csv", a.refined);
        save_classifier(dir / "reference.txt", a.reference);
        save_graphon_set(dir, a.graphons);
        for (const auto& [c, t] : a.gan_traces) write_trace_csv(dir / ("trace_" + std::to_string(c) + ".csv"), t);
      }
      if (!pipe_ledger.empty()) append_ledger_row(pipe_ledger, report);
      std::ifstream summary(dir / "summary.txt");
      std::cout << summary.rdbuf();
    } else if (*grad) {
      const GradcheckOptions& gopt = run.gradcheck;
      std::vector<GradcheckResult> results;
      const std::vector<GradcheckOp> ops = gradcheck_ops();
      results.resize(ops.size());
      parallel_for(ops.size(), cfg.jobs, [&](std::size_t i) { results[i] = ops[i](gopt); });
      bool ok = true;
      Json out = Json::array();
      for (const auto& r : results) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << std::left << std::setw(20) << r.op << " points " << r.points
                  << "  max_rel_error " << std::scientific << std::setprecision(3) << r.max_error << std::defaultfloat
                  << '\n';
        out.push_back({{"op", r.op}, {"points", r.points}, {"max_rel_error", r.max_error}, {"passed", r.passed}});
        ok = ok && r.passed;
      }
      if (!grad_out.empty()) write_json(grad_out, out);
      if (!ok) return fail(3, "numerical", "gradcheck: at least one op exceeds tolerance " + std::to_string(gopt.tolerance));
    }
    return 0;
  } catch (const ArgumentError& e) {
    return fail(1, "usage", e.what());
  } catch (const DataError& e) {
    return fail(2, "data", e.what());
  } catch (const LeakageError& e) {
    return fail(2, "data", e.what());
  } catch (const NumericalError& e) {
    return fail(3, "numerical", e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(2, "data", e.what());
  } catch (const std::exception& e) {
    return fail(2, "data", e.what());
  }
}
