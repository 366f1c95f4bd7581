#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "motifcar/graphon.hpp"
#include "motifcar/optimizer.hpp"
#include "motifcar/synthetic.hpp"

using namespace motifcar;

namespace {

struct Fixture {
  LabeledDataset ds;
  Graphon w;
  std::vector<RefineItem> items;
  std::vector<Graph> reals;
};

// One class of K4-planted graphs, its graphon, and a handful of raw
// counterfactuals built from pairs within the class.
Fixture small_fixture() {
  PlantedMotifConfig pc;
  pc.classes = {{motifs::complete(4), 6, 7, 0.3}};
  pc.graphs_per_class = 12;
  pc.seed = 11;
  Fixture f;
  f.ds = generate_planted_motif_dataset(pc);
  f.reals = f.ds.graphs;
  f.w = estimate_graphon(f.reals, 5);
  for (int i = 0; i + 1 < 12 && f.items.size() < 6; ++i) {
    const Graph& G = f.ds.graphs[static_cast<std::size_t>(i)];
    const Graph& H = f.ds.graphs[static_cast<std::size_t>(i + 1)];
    try {
      const auto raw = produce_raw_counterfactual(G, H, f.w, f.w, ProducerOptions{2, ThresholdBinarize{0.5}},
                                                  derive_seed(3, "pair", static_cast<std::uint64_t>(i)),
                                                  Provenance{i, i + 1, 0, 0, false});
      f.items.push_back(make_refine_item(raw, H, f.w));
    } catch (const ProducerError&) {
    }
  }
  return f;
}

TrainConfig small_config() {
  TrainConfig c;
  c.steps = 25;
  c.batch_size = 4;
  c.hidden_dim = 8;
  c.feature_buckets = 8;
  c.tau_g = 0.5;
  c.learning_rate = 0.01;
  c.seed = 7;
  return c;
}

}  // namespace

TEST(RefineItem, MeasuresDonorContextStatistics) {
  // K4 on 0..3 plus pendant 4 on node 3. Degrees 3,3,3,4,1; alignment 3,0,1,2,4.
  Graph H(5);
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) H.add_edge(i, j);
  H.add_edge(3, 4);
  const Graphon w(Eigen::MatrixXd::Ones(2, 2));
  const RefineItem item = make_refine_item(RawCounterfactual{}, H, w);
  // Motif {3, 0}, context {1, 2, 4}: edges 3-1, 3-2, 3-4, 0-1, 0-2.
  EXPECT_EQ(item.e_con_real, 5);
  // Context subgraph has the single edge 1-2: degrees (1, 1, 0), entropy ln 2 / ln 3.
  EXPECT_NEAR(item.real_context_entropy, std::log(2.0) / std::log(3.0), 1e-12);
}

TEST(ExtractRefined, KeepsTrainablePairsAtOrAboveNoise) {
  GeneratorState st;
  st.scaffold.graph = Graph(3);
  st.scaffold.roles = {NodeRole::Motif, NodeRole::Context, NodeRole::Context};
  st.logits = Eigen::MatrixXd::Zero(3, 3);
  st.trainable = Eigen::MatrixXi::Zero(3, 3);
  st.logits(0, 1) = st.logits(1, 0) = 0.4;
  st.logits(0, 2) = st.logits(2, 0) = 0.4;
  st.logits(1, 2) = st.logits(2, 1) = 0.9;
  st.trainable(0, 1) = st.trainable(1, 0) = 1;
  st.trainable(0, 2) = st.trainable(2, 0) = 1;
  const Eigen::MatrixXd noise = Eigen::MatrixXd::Constant(3, 3, 0.5);
  const RawCounterfactual out = extract_refined(st, noise);
  EXPECT_FALSE(out.graph.has_edge(0, 1));
  EXPECT_FALSE(out.graph.has_edge(1, 2));  // above the noise but not trainable
  st.logits(0, 2) = st.logits(2, 0) = 0.5;
  EXPECT_TRUE(extract_refined(st, noise).graph.has_edge(0, 2));
}

TEST(TrainGan, TraceLengthAndFiniteLosses) {
  const Fixture f = small_fixture();
  ASSERT_GE(f.items.size(), 3u);
  const TrainConfig cfg = small_config();
  const RefineResult r = train_gan(f.items, f.reals, f.w, cfg);
  ASSERT_EQ(r.trace.size(), static_cast<std::size_t>(cfg.steps));
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    const TraceRow& t = r.trace[i];
    EXPECT_EQ(t.step, static_cast<int>(i));
    for (double v : {t.l_gen, t.l_dis, t.l_motif, t.l_context, t.l_con, t.p_real_mean, t.p_gen_mean})
      EXPECT_TRUE(std::isfinite(v));
  }
  EXPECT_EQ(r.refined.size(), f.items.size());
}

TEST(TrainGan, RefinedGraphsRespectTheScaffold) {
  const Fixture f = small_fixture();
  const RefineResult r = train_gan(f.items, f.reals, f.w, small_config());
  for (std::size_t i = 0; i < r.refined.size(); ++i) {
    const RawCounterfactual& raw = f.items[i].raw;
    const RawCounterfactual& ref = r.refined[i];
    EXPECT_EQ(ref.roles, raw.roles);
    EXPECT_EQ(ref.source_ids, raw.source_ids);
    EXPECT_EQ(ref.provenance, raw.provenance);
    ASSERT_EQ(ref.graph.n(), raw.graph.n());
    const auto& st = r.generators[i];
    for (auto [u, v] : ref.graph.edges()) EXPECT_EQ(st.trainable(u, v), 1) << u << "," << v;
  }
}

TEST(TrainGan, SameSeedSameResult) {
  const Fixture f = small_fixture();
  const RefineResult a = train_gan(f.items, f.reals, f.w, small_config());
  const RefineResult b = train_gan(f.items, f.reals, f.w, small_config());
  EXPECT_EQ(a.refined, b.refined);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    EXPECT_EQ(a.trace[i].l_gen, b.trace[i].l_gen);
    EXPECT_EQ(a.trace[i].l_dis, b.trace[i].l_dis);
  }
  for (std::size_t i = 0; i < a.generators.size(); ++i) EXPECT_EQ(a.generators[i].logits, b.generators[i].logits);
}

TEST(TrainGan, RejectsEmptyInputsAndBadConfig) {
  const Fixture f = small_fixture();
  EXPECT_THROW(train_gan({}, f.reals, f.w, small_config()), ArgumentError);
  EXPECT_THROW(train_gan(f.items, {}, f.w, small_config()), ArgumentError);
  TrainConfig bad = small_config();
  bad.tau_g = 0;
  EXPECT_THROW(train_gan(f.items, f.reals, f.w, bad), ArgumentError);
  bad = small_config();
  bad.reg_sign = 0.5;
  EXPECT_THROW(train_gan(f.items, f.reals, f.w, bad), ArgumentError);
}

TEST(TrainGan, NonFiniteLossAbortsWithStep) {
  EXPECT_NO_THROW(detail::check_finite(1.0, 3, "l_motif"));
  try {
    detail::check_finite(std::nan(""), 17, "l_con");
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("step 17"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("l_con"), std::string::npos);
  }
}

TEST(GanCheckpoint, RoundTrip) {
  const Fixture f = small_fixture();
  TrainConfig cfg = small_config();
  cfg.steps = 3;
  const RefineResult r = train_gan(f.items, f.reals, f.w, cfg);
  const auto path = std::filesystem::temp_directory_path() / "motifcar_gan_ckpt.txt";
  save_gan_checkpoint(path, r);
  const GanCheckpoint c = load_gan_checkpoint(path);
  EXPECT_TRUE(c.discriminator == r.discriminator);
  ASSERT_EQ(c.logits.size(), r.generators.size());
  for (std::size_t i = 0; i < c.logits.size(); ++i) EXPECT_EQ(c.logits[i], r.generators[i].logits);
  std::filesystem::remove(path);
}

TEST(GanCheckpoint, WrongMagicIsDataError) {
  const auto path = std::filesystem::temp_directory_path() / "motifcar_bad_ckpt.txt";
  {
    std::ofstream out(path);
    out << "NOT-A-CHECKPOINT 1\n";
  }
  EXPECT_THROW(load_gan_checkpoint(path), DataError);
  std::filesystem::remove(path);
}

TEST(TraceCsv, HeaderAndRows) {
  const std::vector<TraceRow> rows{{0, 1, 2, 3, 4, 5, 0.5, 0.25}, {1, 1, 2, 3, 4, 5, 0.5, 0.25}};
  const auto path = std::filesystem::temp_directory_path() / "motifcar_trace.csv";
  write_trace_csv(path, rows);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "step,l_gen,l_dis,l_motif,l_context,l_con,p_real_mean,p_gen_mean");
  std::getline(in, line);
  EXPECT_EQ(line, "0,1,2,3,4,5,0.5,0.25");
  std::filesystem::remove(path);
}
