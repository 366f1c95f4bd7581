#include <gtest/gtest.h>

#include <filesystem>
#include <numeric>
#include <set>

#include "motifcar/producer.hpp"
#include "motifcar/synthetic.hpp"

using namespace motifcar;

namespace {

Graphon k_clique_graphon(int k) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Ones(k, k);
  w.diagonal().setZero();
  return Graphon(w);
}

// Independent restatement of the mask algebra: motif pairs keep G's edges the
// thresholded graphon predicts, context pairs keep H's edges it does not
// predict, cross pairs come from the recorded initial cross edges only.
void expect_decomposition(const RawCounterfactual& cf, const Graph& G, const Graph& H, const Graphon& Wg,
                          const Graphon& Wh) {
  const int kg = cf.motif_count();
  const int kh = std::min(Wh.K(), H.n());
  const auto pos_h = [&](int v) { return kh + (v - kg); };
  const auto bin = [](const Graphon& w, int i, int j) { return i < w.K() && j < w.K() && w.W(i, j) >= 0.5; };
  std::set<Edge> cross(cf.initial_cross_edges.begin(), cf.initial_cross_edges.end());
  for (int a = 0; a < cf.graph.n(); ++a)
    for (int b = a + 1; b < cf.graph.n(); ++b) {
      const bool am = a < kg, bm = b < kg;
      bool want;
      if (am && bm) {
        want = G.has_edge(cf.source_ids[a], cf.source_ids[b]) && bin(Wg, a, b);
      } else if (!am && !bm) {
        want = H.has_edge(cf.source_ids[a], cf.source_ids[b]) && !bin(Wh, pos_h(a), pos_h(b));
      } else {
        want = cross.count({a, b}) > 0;
      }
      EXPECT_EQ(cf.graph.has_edge(a, b), want) << "pair " << a << "," << b;
    }
}

Graph random_graph(int n, double p, Rng& rng) {
  Graph g(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() < p) g.add_edge(i, j);
  return g;
}

}  // namespace

TEST(Merge, EdgeCountIsSumPlusEta) {
  const Graph G = motifs::complete(4), H = motifs::cycle(5);
  const MergedGraph m = merge_graphs(G, H, 7, 3);
  EXPECT_EQ(m.A_p.sum() / 2, 6 + 5 + 7);
  EXPECT_EQ(m.A_C.sum(), 7);
  EXPECT_EQ(m.A_p, m.A_p.transpose());
}

TEST(Merge, EtaAboveCrossPairsRejected) {
  EXPECT_THROW(merge_graphs(motifs::complete(2), motifs::complete(3), 7, 0), ArgumentError);
  EXPECT_NO_THROW(merge_graphs(motifs::complete(2), motifs::complete(3), 6, 0));
}

TEST(Mask, GraphonEdgeAbsentFromHNeverMaterializes) {
  // H has no edges; Wh predicts the edge 0-1.
  Eigen::MatrixXi A_H(2, 2);
  A_H << 0, 0, 0, 0;
  Eigen::MatrixXd wh(2, 2);
  wh << 0, 1, 1, 0;
  const Eigen::MatrixXi A_C = Eigen::MatrixXi::Zero(2, 2);
  const Eigen::MatrixXi mask = build_mask(Graphon(Eigen::MatrixXd::Zero(2, 2)), Graphon(wh), A_H, A_C, 2, 2,
                                          ThresholdBinarize{0.5});
  // |0 - 1| = 1 in the context block...
  EXPECT_EQ(mask(2, 3), 1);
  // ...but A_p has no such edge, so the product is 0.
  Eigen::MatrixXi A_p = Eigen::MatrixXi::Zero(4, 4);
  EXPECT_EQ(mask.cwiseProduct(A_p)(2, 3), 0);
}

TEST(Producer, TriangleMotifWithCycleContext) {
  // G: triangle 0-1-2 with pendants 3, 4 on node 0.
  Graph G(5);
  for (auto [u, v] : std::vector<Edge>{{0, 1}, {0, 2}, {1, 2}, {0, 3}, {0, 4}}) G.add_edge(u, v);
  // H: hub 0 joined to 1, plus the 4-cycle 1-2-3-4.
  Graph H(5);
  for (auto [u, v] : std::vector<Edge>{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 1}}) H.add_edge(u, v);
  const Graphon Wg = k_clique_graphon(3);
  const Graphon Wh(Eigen::MatrixXd::Zero(1, 1));
  const RawCounterfactual cf = produce_raw_counterfactual(G, H, Wg, Wh, {4, ThresholdBinarize{0.5}}, 17);
  ASSERT_EQ(cf.motif_count(), 3);
  const std::vector<int> motif{0, 1, 2};
  EXPECT_EQ(induced_subgraph(cf.graph, motif).edge_count(), 3);
  // H's top node (1) leaves; the context 0, 2, 3, 4 keeps its two path edges 2-3, 3-4.
  std::vector<int> ctx = cf.nodes_with(NodeRole::Context);
  EXPECT_EQ(induced_subgraph(cf.graph, ctx).edge_count(), 2);
  EXPECT_GE(cf.cross_edge_count(), 1);
  expect_decomposition(cf, G, H, Wg, Wh);
}

TEST(Producer, DecompositionHoldsOnRandomPairs) {
  Rng rng(8);
  int produced = 0;
  for (int t = 0; t < 20; ++t) {
    const Graph G = random_graph(6 + static_cast<int>(rng.below(6)), 0.4, rng);
    const Graph H = random_graph(6 + static_cast<int>(rng.below(6)), 0.4, rng);
    const std::vector<Graph> gs{G}, hs{H};
    const Graphon Wg = estimate_graphon(gs, 4), Wh = estimate_graphon(hs, 4);
    try {
      const RawCounterfactual cf = produce_raw_counterfactual(G, H, Wg, Wh, {3, ThresholdBinarize{0.5}}, rng.next());
      expect_decomposition(cf, G, H, Wg, Wh);
      EXPECT_GE(cf.cross_edge_count(), 1);
      ++produced;
    } catch (const ProducerError&) {
      // empty motif under the graphon; covered separately
    }
  }
  EXPECT_GE(produced, 15);
}

TEST(Producer, ZeroEtaStillYieldsOneCrossEdge) {
  const RawCounterfactual cf = produce_raw_counterfactual(motifs::complete(4), motifs::cycle(6), k_clique_graphon(4),
                                                          Graphon(Eigen::MatrixXd::Zero(2, 2)), {0, ThresholdBinarize{0.5}}, 1);
  EXPECT_EQ(cf.cross_edge_count(), 1);
}

TEST(Producer, EmptyContextIsProducerError) {
  EXPECT_THROW(produce_raw_counterfactual(motifs::complete(4), motifs::cycle(3), k_clique_graphon(3),
                                          k_clique_graphon(3), {}, 1),
               ProducerError);
}

TEST(Producer, EmptyMotifIsProducerError) {
  EXPECT_THROW(produce_raw_counterfactual(motifs::complete(4), motifs::cycle(6), Graphon(Eigen::MatrixXd::Zero(3, 3)),
                                          k_clique_graphon(2), {}, 1),
               ProducerError);
}

TEST(Producer, SameSeedSameOutput) {
  const Graph G = motifs::complete(5), H = motifs::cycle(7);
  const Graphon Wg = k_clique_graphon(4), Wh = k_clique_graphon(2);
  EXPECT_EQ(produce_raw_counterfactual(G, H, Wg, Wh, {}, 5), produce_raw_counterfactual(G, H, Wg, Wh, {}, 5));
}

TEST(Batch, LabelsFollowMotifDonorAndPairingIsSameClass) {
  PlantedMotifConfig pc;
  pc.classes = {{motifs::complete(4), 6, 8, 0.25}, {motifs::cycle(4), 6, 8, 0.25}};
  pc.graphs_per_class = 10;
  LabeledDataset ds = generate_planted_motif_dataset(pc);
  std::map<int, Graphon> w;
  for (int c : {0, 1}) {
    std::vector<Graph> gs;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (ds.labels[i] == c) gs.push_back(ds.graphs[i]);
    w[c] = estimate_graphon(gs, 4);
  }
  std::vector<int> donors(ds.size());
  std::iota(donors.begin(), donors.end(), 0);
  BatchOptions opt;
  opt.per_graph = 2;
  const auto lookup = [&](int i) -> const Graphon& { return w.at(ds.labels[static_cast<std::size_t>(i)]); };
  const BatchResult r = produce_batch(ds, donors, lookup, opt, 4);
  EXPECT_EQ(r.items.size() + r.skipped.size(), 40u);
  for (const auto& cf : r.items) {
    EXPECT_EQ(cf.provenance.label, ds.labels[static_cast<std::size_t>(cf.provenance.motif_donor)]);
    EXPECT_EQ(ds.labels[static_cast<std::size_t>(cf.provenance.context_donor)], cf.provenance.label);
    EXPECT_NE(cf.provenance.motif_donor, cf.provenance.context_donor);
  }
}

TEST(CounterfactualIo, JsonRoundTrip) {
  const RawCounterfactual cf = produce_raw_counterfactual(motifs::complete(4), motifs::cycle(6), k_clique_graphon(4),
                                                          Graphon(Eigen::MatrixXd::Zero(2, 2)), {2, ThresholdBinarize{0.5}}, 9,
                                                          {3, 5, 1, 0, false});
  const auto path = std::filesystem::temp_directory_path() / "motifcar_test_cf.json";
  save_counterfactuals(path, {cf, cf});
  const auto back = load_counterfactuals(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], cf);
}
