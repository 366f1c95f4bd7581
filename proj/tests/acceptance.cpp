// Acceptance checks. One PASS/FAIL line per criterion; exit status 0 iff the
// selected criteria all pass. Tolerances are fixed here, not on the command line.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "motifcar.hpp"

using namespace motifcar;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(prec);
  s << v;
  return s.str();
}

std::string sci(double v) {
  std::ostringstream s;
  s.precision(2);
  s << std::scientific << v;
  return s.str();
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Desk fixture: two planted classes (K5 anomalous, C5 normal), 50 graphs each,
// 15-17 nodes, paper defaults everywhere else.
PipelineConfig desk_config(std::uint64_t seed) {
  PipelineConfig c;
  c.data.motifs = {"K5", "C5"};
  c.data.context_min = 10;
  c.data.context_max = 12;
  c.data.context_p = 0.15;
  c.data.graphs_per_class = 50;
  c.data.cross_edge_count = 2;
  c.seed = seed;
  return c;
}

constexpr int kSeeds = 5;

const std::vector<std::pair<PipelineArtifacts, MetricsReport>>& desk_runs() {
  static const auto runs = [] {
    std::vector<std::pair<PipelineArtifacts, MetricsReport>> out;
    for (int s = 0; s < kSeeds; ++s) {
      PipelineArtifacts a;
      MetricsReport r = run_pipeline(desk_config(static_cast<std::uint64_t>(s)), &a);
      out.emplace_back(std::move(a), std::move(r));
    }
    return out;
  }();
  return runs;
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  const auto results = run_gradcheck_suite(GradcheckOptions{20, 1e-5, 1e-4, 0});
  Outcome o{true, ""};
  double worst = 0;
  std::string worst_op;
  for (const auto& r : results) {
    if (!r.passed || r.points != 20) {
      o.pass = false;
      o.detail += r.op + " failed (" + sci(r.max_error) + "); ";
    }
    if (r.max_error >= worst) {
      worst = r.max_error;
      worst_op = r.op;
    }
  }
  o.detail += std::to_string(results.size()) + " ops x 20 points, worst " + worst_op + " " + sci(worst) + " <= 1e-4";
  return o;
}

Outcome criterion2() {
  // 70/30 blocks: degree alignment cannot separate equal blocks.
  const int n = 40, big = 28;
  Rng rng(derive_seed(2, "sbm"));
  std::vector<Graph> gs;
  for (int s = 0; s < 200; ++s) {
    Graph g(n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng.uniform() < ((i < big) == (j < big) ? 0.9 : 0.1)) g.add_edge(i, j);
    gs.push_back(g);
  }
  const Graphon w = estimate_graphon(gs, n);
  double sum[2][2] = {{0, 0}, {0, 0}}, cnt[2][2] = {{0, 0}, {0, 0}};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const int a = i < big ? 0 : 1, b = j < big ? 0 : 1;
      sum[a][b] += w.W(i, j);
      cnt[a][b] += 1;
    }
  const double truth[2][2] = {{0.9, 0.1}, {0.1, 0.9}};
  double worst = 0;
  std::string detail;
  for (int a = 0; a < 2; ++a)
    for (int b = a; b < 2; ++b) {
      const double est = sum[a][b] / cnt[a][b];
      worst = std::max(worst, std::abs(est - truth[a][b]));
      detail += "block" + std::to_string(a) + std::to_string(b) + "=" + fmt(est, 3) + " ";
    }
  return {worst <= 0.1, detail + "max error " + fmt(worst, 4) + " <= 0.1"};
}

Outcome criterion3() {
  const PipelineConfig cfg = desk_config(0);
  const LabeledDataset ds = load_source(cfg.data, cfg.seed);
  Outcome o{true, ""};
  int checked = 0;
  for (int c = 0; c < static_cast<int>(cfg.data.motifs.size()); ++c) {
    std::vector<Graph> gs;
    double nodes = 0;
    for (std::size_t i = 0; i < ds.graphs.size(); ++i)
      if (ds.labels[i] == c) {
        gs.push_back(ds.graphs[i]);
        nodes += ds.graphs[i].n();
      }
    const Graph motif = motifs::parse(cfg.data.motifs[static_cast<std::size_t>(c)]);
    const Graphon w = estimate_graphon(gs, default_graphon_k(gs));
    const double t_bin = homomorphism_density(motif, threshold_graph(w));
    const int n = static_cast<int>(std::lround(nodes / static_cast<double>(gs.size())));
    std::vector<double> t;
    for (int s = 0; s < 50; ++s)
      t.push_back(homomorphism_density(motif, sample_graph(w, n, derive_seed(3, "sample", static_cast<std::uint64_t>(c * 50 + s)))));
    std::sort(t.begin(), t.end());
    const double median = 0.5 * (t[24] + t[25]);
    const std::string name = cfg.data.motifs[static_cast<std::size_t>(c)];
    if (t_bin == 0) {
      // The thresholded graphon holds no copy of the motif; nothing to compare.
      o.detail += name + ": motif absent from the thresholded graphon (vacuous, median " + fmt(median, 5) + "); ";
      continue;
    }
    ++checked;
    const bool ok = median >= 0.5 * t_bin;
    o.pass = o.pass && ok;
    o.detail += name + ": median " + fmt(median, 5) + " vs 0.5 x " + fmt(t_bin, 5) + " (ratio " +
                fmt(median / t_bin, 3) + ")" + (ok ? "" : " FAIL") + "; ";
  }
  if (checked == 0) o.pass = false;
  return o;
}

// The mask algebra restated: motif pairs keep G's edges the thresholded graphon
// predicts, context pairs keep H's edges it does not predict, cross pairs are
// the recorded initial cross edges.
bool decomposition_holds(const RawCounterfactual& cf, const Graph& G, const Graph& H, const Graphon& Wg,
                         const Graphon& Wh) {
  const int kg = cf.motif_count();
  const int kh = std::min(Wh.K(), H.n());
  const auto bin = [](const Graphon& w, int i, int j) { return i < w.K() && j < w.K() && w.W(i, j) >= 0.5; };
  const std::set<Edge> cross(cf.initial_cross_edges.begin(), cf.initial_cross_edges.end());
  for (int a = 0; a < cf.graph.n(); ++a)
    for (int b = a + 1; b < cf.graph.n(); ++b) {
      const bool am = a < kg, bm = b < kg;
      bool want;
      if (am && bm)
        want = G.has_edge(cf.source_ids[static_cast<std::size_t>(a)], cf.source_ids[static_cast<std::size_t>(b)]) &&
               bin(Wg, a, b);
      else if (!am && !bm)
        want = H.has_edge(cf.source_ids[static_cast<std::size_t>(a)], cf.source_ids[static_cast<std::size_t>(b)]) &&
               !bin(Wh, kh + a - kg, kh + b - kg);
      else
        want = cross.count({a, b}) > 0;
      if (cf.graph.has_edge(a, b) != want) return false;
    }
  return true;
}

Outcome criterion4() {
  const PipelineConfig cfg = desk_config(0);
  const LabeledDataset ds = load_source(cfg.data, cfg.seed);
  std::map<int, std::vector<Graph>> by_class;
  for (std::size_t i = 0; i < ds.graphs.size(); ++i) by_class[ds.labels[i]].push_back(ds.graphs[i]);
  std::map<int, Graphon> w;
  for (auto& [c, gs] : by_class) w[c] = estimate_graphon(gs, default_graphon_k(gs));

  Rng rng(derive_seed(4, "pairs"));
  int produced = 0, skipped = 0, bad_decomp = 0, no_cross = 0, bad_merge = 0;
  for (int t = 0; t < 100; ++t) {
    const int gi = static_cast<int>(rng.below(ds.graphs.size()));
    const int hi = static_cast<int>(rng.below(ds.graphs.size()));
    const Graph& G = ds.graphs[static_cast<std::size_t>(gi)];
    const Graph& H = ds.graphs[static_cast<std::size_t>(hi)];
    const int eta = t % 5;
    const MergedGraph m = merge_graphs(G, H, eta, derive_seed(4, "merge", static_cast<std::uint64_t>(t)));
    if (m.A_p.sum() / 2 != G.edge_count() + H.edge_count() + eta) ++bad_merge;
    const Graphon& Wg = w.at(ds.labels[static_cast<std::size_t>(gi)]);
    const Graphon& Wh = w.at(ds.labels[static_cast<std::size_t>(hi)]);
    try {
      const RawCounterfactual cf = produce_raw_counterfactual(G, H, Wg, Wh, ProducerOptions{eta, ThresholdBinarize{0.5}},
                                                              derive_seed(4, "cf", static_cast<std::uint64_t>(t)),
                                                              Provenance{gi, hi, ds.labels[static_cast<std::size_t>(gi)], 0, gi == hi});
      ++produced;
      if (!decomposition_holds(cf, G, H, Wg, Wh)) ++bad_decomp;
      if (cf.cross_edge_count() < 1) ++no_cross;
    } catch (const ProducerError&) {
      ++skipped;
    }
  }
  const bool ok = produced > 0 && bad_decomp == 0 && no_cross == 0 && bad_merge == 0;
  return {ok, std::to_string(produced) + " produced, " + std::to_string(skipped) + " skipped (empty motif/context), " +
                  std::to_string(bad_decomp) + " decomposition violations, " + std::to_string(no_cross) +
                  " without cross edge, " + std::to_string(bad_merge) + " merge-count mismatches"};
}

Outcome criterion5() {
  const auto& [a, r] = desk_runs().front();
  const PipelineConfig cfg = desk_config(0);
  double cross = 0, raw_cross = 0, target = 0;
  for (std::size_t i = 0; i < a.raw.size(); ++i) {
    const int h = a.raw[i].provenance.context_donor;
    const RefineItem item = make_refine_item(a.raw[i], a.dataset.graphs[static_cast<std::size_t>(h)],
                                             a.graphons.of_graph(a.dataset, h));
    target += cfg.gan.lambda_g * item.e_con_real;
    cross += a.refined[i].cross_edge_count();
    raw_cross += a.raw[i].cross_edge_count();
  }
  const double n = static_cast<double>(a.raw.size());
  cross /= n;
  raw_cross /= n;
  target /= n;
  const double ratio = cross / target;
  return {std::abs(ratio - 1.0) <= 0.3, "refined cross edges " + fmt(cross, 3) + " (raw " + fmt(raw_cross, 3) +
                                            ") vs lambda_g*E_con " + fmt(target, 3) + ", ratio " + fmt(ratio, 3) +
                                            " in [0.7, 1.3]"};
}

Outcome criterion6() {
  const auto& a = desk_runs().front().first;
  Outcome o{true, ""};
  for (const auto& [c, trace] : a.gan_traces) {
    bool finite = true;
    for (const auto& t : trace)
      for (double v : {t.l_gen, t.l_dis, t.l_motif, t.l_context, t.l_con, t.p_real_mean, t.p_gen_mean})
        finite = finite && std::isfinite(v);
    const std::size_t m = std::max<std::size_t>(1, trace.size() / 10);
    double lead = 0, trail = 0;
    for (std::size_t k = 0; k < m; ++k) {
      lead += trace[k].l_motif / static_cast<double>(m);
      trail += trace[trace.size() - 1 - k].l_motif / static_cast<double>(m);
    }
    const bool ok = finite && trail < lead;
    o.pass = o.pass && ok;
    o.detail += "class " + std::to_string(c) + ": L_motif " + fmt(lead) + " -> " + fmt(trail) +
                (finite ? "" : ", non-finite loss") + "; ";
  }
  if (a.gan_traces.empty()) o = {false, "no GAN trace"};
  return o;
}

Outcome criterion7() {
  std::vector<double> rl, rrl, sp, rsp;
  for (const auto& [a, r] : desk_runs()) {
    rl.push_back(r.realism);
    rrl.push_back(r.raw_realism);
    sp.push_back(r.sparsity);
    rsp.push_back(r.raw_sparsity);
  }
  const bool real_ok = mean(rl) < mean(rrl), sparse_ok = mean(sp) < mean(rsp);
  return {real_ok && sparse_ok, "realism refined " + fmt(mean(rl), 3) + " vs raw " + fmt(mean(rrl), 3) +
                                    (real_ok ? "" : " FAIL") + "; sparsity refined " + fmt(mean(sp), 4) + " vs raw " +
                                    fmt(mean(rsp), 4) + (sparse_ok ? "" : " FAIL") + " (5 seeds)"};
}

Outcome criterion8() {
  std::vector<double> on, off;
  std::string per;
  for (int s = 0; s < kSeeds; ++s) {
    on.push_back(desk_runs()[static_cast<std::size_t>(s)].second.f1);
    PipelineConfig c = desk_config(static_cast<std::uint64_t>(s));
    c.augmentation = false;
    off.push_back(run_pipeline(c).f1);
    per += fmt(on.back(), 3) + "/" + fmt(off.back(), 3) + " ";
  }
  const double gain = mean(on) - mean(off);
  return {gain >= 0.02 && mean(on) >= 0.85, "F1 on " + fmt(mean(on), 4) + " off " + fmt(mean(off), 4) + " gain " +
                                                fmt(gain, 4) + " (need >= 0.02, on >= 0.85); per seed on/off " + per};
}

Outcome criterion9() {
  std::vector<double> v, rv;
  for (const auto& [a, r] : desk_runs()) {
    v.push_back(r.validity);
    rv.push_back(r.raw_validity);
  }
  return {mean(v) >= 0.8 && mean(v) > mean(rv),
          "validity refined " + fmt(mean(v), 4) + " (need >= 0.8) vs raw " + fmt(mean(rv), 4) + " (5 seeds)"};
}

// ---------------------------------------------------------------------------

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
  return rc == -1 ? -1 : WEXITSTATUS(rc);
}

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

Outcome criterion10(const std::string& cli) {
  if (cli.empty() || !fs::exists(cli)) return {false, "CLI binary not found: " + cli};
  const fs::path root = fs::absolute("acceptance_determinism");
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path config = root / "config.json";
  {
    std::ofstream out(config);
    out << R"({"data": {"motifs": ["K4", "C4"], "graphs_per_class": 30, "context_min": 8, "context_max": 10},
 "gan": {"steps": 30, "hidden_dim": 16, "feature_buckets": 16},
 "classifier": {"epochs": 8, "hidden_dim": 16, "feature_buckets": 16}})";
  }
  const std::string base = quote(cli) + " --seed 7 --config " + quote(config) + " ";
  const std::string quiet = " > /dev/null 2>&1";

  // Each subcommand and the files it writes, relative to its run directory.
  struct Step {
    std::string name;
    std::function<std::string(const fs::path&)> args;
    std::vector<std::string> outputs;
  };
  const std::vector<Step> steps{
      {"synth", [](const fs::path& d) { return "synth --out " + quote(d / "dataset.txt"); }, {"dataset.txt"}},
      {"estimate-graphon",
       [](const fs::path& d) { return "estimate-graphon --dataset " + quote(d / "dataset.txt") + " --out-dir " + quote(d / "graphons"); },
       {"graphons/graphon_0.txt", "graphons/graphon_1.txt"}},
      {"produce",
       [](const fs::path& d) {
         return "produce --dataset " + quote(d / "dataset.txt") + " --graphon-dir " + quote(d / "graphons") + " --out " +
                quote(d / "raw.json") + " --manifest " + quote(d / "manifest.csv");
       },
       {"raw.json", "manifest.csv"}},
      {"refine",
       [](const fs::path& d) {
         return "refine --dataset " + quote(d / "dataset.txt") + " --graphon-dir " + quote(d / "graphons") + " --raw " +
                quote(d / "raw.json") + " --out " + quote(d / "refined.json") + " --artifact-dir " + quote(d / "gan");
       },
       {"refined.json", "gan/trace_0.csv", "gan/trace_1.csv", "gan/checkpoint_0.txt", "gan/checkpoint_1.txt"}},
      {"train",
       [](const fs::path& d) {
         return "train --dataset " + quote(d / "dataset.txt") + " --out " + quote(d / "model.txt") + " --augment " +
                quote(d / "refined.json");
       },
       {"model.txt"}},
      {"evaluate",
       [](const fs::path& d) {
         return "evaluate --dataset " + quote(d / "dataset.txt") + " --model " + quote(d / "model.txt") + " --out " +
                quote(d / "report.json") + " --raw " + quote(d / "raw.json") + " --refined " + quote(d / "refined.json");
       },
       {"report.json"}},
      {"pipeline", [](const fs::path& d) { return "pipeline --out-dir " + quote(d / "pipeline"); },
       {"pipeline/report.json", "pipeline/config.json", "pipeline/dataset.txt", "pipeline/detector.txt",
        "pipeline/reference.txt", "pipeline/raw.json", "pipeline/refined.json", "pipeline/manifest.csv",
        "pipeline/summary.txt", "pipeline/graphon_0.txt", "pipeline/trace_0.csv"}},
      {"gradcheck", [](const fs::path& d) { return "gradcheck --points 3 --out " + quote(d / "gradcheck.json"); },
       {"gradcheck.json"}},
  };

  Outcome o{true, ""};
  for (const auto& step : steps) {
    bool ok = true;
    std::string why;
    for (const char* run_dir : {"a", "b"}) {
      const fs::path d = root / run_dir;
      fs::create_directories(d);
      const int rc = run(base + step.args(d) + quiet);
      if (rc != 0) {
        ok = false;
        why = std::string(" exit ") + std::to_string(rc) + " in run " + run_dir;
      }
    }
    for (const auto& f : step.outputs) {
      if (!ok) break;
      const fs::path pa = root / "a" / f, pb = root / "b" / f;
      if (!fs::exists(pa) || !fs::exists(pb)) {
        ok = false;
        why = " missing " + f;
      } else if (read_file(pa) != read_file(pb)) {
        ok = false;
        why = " differs: " + f;
      }
    }
    o.pass = o.pass && ok;
    o.detail += step.name + (ok ? " ok" : why) + "; ";
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MotifCAR acceptance checks"};
  std::vector<int> criteria;
  std::string cli;
  app.add_option("--criterion", criteria, "Criterion number(s), 1-10; default all")->check(CLI::Range(1, 10));
  app.add_option("--cli", cli, "Path to the motifcar CLI binary (criterion 10)");
  CLI11_PARSE(app, argc, argv);
  if (criteria.empty())
    for (int c = 1; c <= 10; ++c) criteria.push_back(c);

  const std::map<int, std::pair<std::string, std::function<Outcome()>>> table{
      {1, {"gradient suite", criterion1}},
      {2, {"graphon recovery", criterion2}},
      {3, {"motif persistence", criterion3}},
      {4, {"producer algebra", criterion4}},
      {5, {"sparsity control", criterion5}},
      {6, {"motif consistency trains", criterion6}},
      {7, {"quality-metric ordering", criterion7}},
      {8, {"augmentation helps", criterion8}},
      {9, {"validity", criterion9}},
      {10, {"determinism", [&] { return criterion10(cli); }}},
  };
  const std::map<int, double> budget_s{{1, 60}, {2, 10}, {3, 30}, {4, 10}, {5, 300}, {8, 900}};

  bool all = true;
  for (int c : criteria) {
    const auto& [name, fn] = table.at(c);
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (const auto b = budget_s.find(c); b != budget_s.end() && secs > b->second) {
      o.pass = false;
      o.detail += " (over the " + fmt(b->second, 0) + " s budget)";
    }
    all = all && o.pass;
    std::cout << "criterion " << c << " " << (o.pass ? "PASS" : "FAIL") << " " << name << ": " << o.detail << " ["
              << fmt(secs, 1) << " s]" << std::endl;
  }
  return all ? 0 : 1;
}
