#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "motifcar/metrics.hpp"
#include "motifcar/synthetic.hpp"

using namespace motifcar;

namespace {

std::vector<int> identity_map(int n) {
  std::vector<int> m(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) m[static_cast<std::size_t>(i)] = i;
  return m;
}

}  // namespace

TEST(Features, TriangleVector) {
  const Eigen::VectorXd f = graph_feature_vector(motifs::complete(3), FeatureOptions{4, 100});
  ASSERT_EQ(f.size(), 7);
  EXPECT_DOUBLE_EQ(f(2), 1.0);  // every node has degree 2
  EXPECT_DOUBLE_EQ(f(0) + f(1) + f(3), 0.0);
  EXPECT_DOUBLE_EQ(f(4), 1.0);   // density
  EXPECT_DOUBLE_EQ(f(5), 1.0);   // clustering
  EXPECT_DOUBLE_EQ(f(6), 0.03);  // 3 / 100
}

TEST(Features, OpenEndedLastBucketAndStarClustering) {
  const Eigen::VectorXd f = graph_feature_vector(motifs::star(6), FeatureOptions{3, 100});
  // Centre has degree 5, clamped into bucket 2; five leaves in bucket 1.
  EXPECT_NEAR(f(1), 5.0 / 6.0, 1e-12);
  EXPECT_NEAR(f(2), 1.0 / 6.0, 1e-12);
  EXPECT_DOUBLE_EQ(f(4), 0.0);
}

TEST(Realism, IdenticalSetsScoreZero) {
  const std::vector<Graph> s{motifs::cycle(5), motifs::complete(4), motifs::path(6)};
  EXPECT_DOUBLE_EQ(realism_score(s, s), 0.0);
}

TEST(Realism, DifferentSetsScorePositive) {
  const std::vector<Graph> a{motifs::cycle(5), motifs::cycle(6), motifs::cycle(7)};
  const std::vector<Graph> b{motifs::complete(5), motifs::complete(6), motifs::complete(7)};
  const double r = realism_score(a, b);
  EXPECT_GT(r, 0.0);
  EXPECT_LE(r, 200.0);  // MMD^2 with a bounded kernel is at most 2
  EXPECT_DOUBLE_EQ(r, realism_score(b, a));
}

TEST(Realism, CloserSetScoresLower) {
  const std::vector<Graph> real{motifs::cycle(6), motifs::cycle(7), motifs::cycle(8)};
  const std::vector<Graph> near{motifs::cycle(6), motifs::path(7), motifs::cycle(8)};
  const std::vector<Graph> far{motifs::complete(6), motifs::star(7), motifs::complete(8)};
  EXPECT_LT(realism_score(real, near), realism_score(real, far));
}

TEST(Realism, EmptySetRejected) {
  const std::vector<Graph> s{motifs::cycle(5)};
  EXPECT_THROW(realism_score(s, {}), ArgumentError);
}

TEST(Proximity, IdenticalGraphsZeroAndAveraging) {
  const Graph a = motifs::cycle(5), b = motifs::complete(5);
  std::vector<CounterfactualPair> same{{&a, &a, {}}};
  EXPECT_DOUBLE_EQ(proximity_score(same), 0.0);
  const double d = (graph_feature_vector(a) - graph_feature_vector(b)).norm();
  std::vector<CounterfactualPair> mixed{{&a, &a, {}}, {&b, &a, {}}};
  EXPECT_NEAR(proximity_score(mixed), d / 2, 1e-12);
}

TEST(Sparsity, OneRemovedEdgeOfFive) {
  const Graph src = motifs::cycle(5);
  Graph cf(5);
  for (auto [u, v] : src.edges())
    if (!(u == 0 && v == 1)) cf.add_edge(u, v);
  std::vector<CounterfactualPair> p{{&cf, &src, identity_map(5)}};
  EXPECT_DOUBLE_EQ(sparsity_score(p), 0.2);
}

TEST(Sparsity, UnmappedNodesCountAsAdditions) {
  const Graph src = motifs::complete(2);
  Graph cf(3);
  cf.add_edge(0, 1);
  cf.add_edge(0, 2);
  cf.add_edge(1, 2);
  std::vector<CounterfactualPair> p{{&cf, &src, {0, 1, -1}}};
  EXPECT_DOUBLE_EQ(sparsity_score(p), 2.0);
}

TEST(Sparsity, RelabelledCopyIsZero) {
  const Graph src = motifs::path(4);  // 0-1-2-3
  Graph cf(4);                        // same path, nodes listed in reverse
  cf.add_edge(3, 2);
  cf.add_edge(2, 1);
  cf.add_edge(1, 0);
  std::vector<CounterfactualPair> p{{&cf, &src, {0, 1, 2, 3}}};
  EXPECT_DOUBLE_EQ(sparsity_score(p), 0.0);
  std::vector<CounterfactualPair> r{{&cf, &src, {3, 2, 1, 0}}};
  EXPECT_DOUBLE_EQ(sparsity_score(r), 0.0);
}

TEST(Sparsity, MissingCorrespondenceRejected) {
  const Graph g = motifs::cycle(4);
  std::vector<CounterfactualPair> p{{&g, &g, {}}};
  EXPECT_THROW(sparsity_score(p), ArgumentError);
  std::vector<CounterfactualPair> q{{&g, &g, {0, 1, 2, 9}}};
  EXPECT_THROW(sparsity_score(q), ArgumentError);
}

TEST(Validity, PerfectAndConstantClassifiers) {
  const std::vector<Graph> gs{motifs::cycle(4), motifs::complete(4), motifs::cycle(5), motifs::complete(5)};
  const std::vector<int> intended{1, 0, 1, 0};
  const auto oracle = [](const Graph& g) { return g.edge_count() == g.n() ? 1 : 0; };
  EXPECT_DOUBLE_EQ(validity_score(gs, intended, oracle), 1.0);
  EXPECT_DOUBLE_EQ(validity_score(gs, intended, [](const Graph&) { return 0; }), 0.5);
}

TEST(Validity, MismatchedInputsRejected) {
  const std::vector<Graph> gs{motifs::cycle(4)};
  const std::vector<int> two{0, 1};
  EXPECT_THROW(validity_score(gs, two, [](const Graph&) { return 0; }), ArgumentError);
  EXPECT_THROW(validity_score({}, {}, [](const Graph&) { return 0; }), ArgumentError);
}

TEST(Detection, KnownCounts) {
  // Positive class 0: tp 1, fp 1, fn 0.
  const std::vector<int> pred{0, 0, 1, 1}, act{0, 1, 1, 1};
  const DetectionMetrics m = detection_metrics(pred, act, 0);
  EXPECT_DOUBLE_EQ(m.precision, 0.5);
  EXPECT_DOUBLE_EQ(m.recall, 1.0);
  EXPECT_NEAR(m.f1, 2.0 / 3.0, 1e-12);
  EXPECT_FALSE(m.zero_division);
}

TEST(Detection, NoPositivePredictionsFlagged) {
  const std::vector<int> pred{1, 1, 1}, act{0, 1, 1};
  const DetectionMetrics m = detection_metrics(pred, act, 0);
  EXPECT_DOUBLE_EQ(m.precision, 0.0);
  EXPECT_DOUBLE_EQ(m.recall, 0.0);
  EXPECT_DOUBLE_EQ(m.f1, 0.0);
  EXPECT_TRUE(m.zero_division);
}

TEST(Report, RejectsOutOfRangeFractions) {
  MetricsReport r;
  r.validity = 1.0;
  EXPECT_NO_THROW(r.validate());
  r.f1 = 1.5;
  EXPECT_THROW(r.validate(), NumericalError);
  r.f1 = std::nan("");
  EXPECT_THROW(r.validate(), NumericalError);
}

TEST(Ledger, HeaderWrittenOnce) {
  const auto path = std::filesystem::temp_directory_path() / "motifcar_ledger_test.csv";
  std::filesystem::remove(path);
  MetricsReport r;
  r.dataset = "toy";
  r.seed = 4;
  r.f1 = 0.75;
  append_ledger_row(path, r);
  append_ledger_row(path, r);
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], kLedgerHeader);
  EXPECT_EQ(lines[1], lines[2]);
  EXPECT_EQ(lines[1].rfind("toy,4,", 0), 0u);
  std::filesystem::remove(path);
}

TEST(Report, JsonKeyOrder) {
  const auto j = MetricsReport{}.to_json();
  std::string keys;
  for (const auto& [k, v] : j.items()) keys += k + ",";
  EXPECT_EQ(keys.rfind("dataset,seed,config_hash,augmentation,counterfactuals,precision,recall,f1,", 0), 0u);
}
