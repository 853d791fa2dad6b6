#include "dcu/data.hpp"
#include "dcu/graphs.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

namespace {

using dcu::Graph;
using dcu::KernelMatrix;

Graph complete_graph(int n) {
  std::vector<Graph::Edge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) edges.emplace_back(i, j);
  return Graph::from_edges(n, edges);
}

// All-pairs shortest paths on the class-induced subgraphs; -1 for infinite.
int floyd_warshall_diameter(const Graph& g, const std::vector<int>& labels) {
  const int n = g.vertex_count();
  const int inf = std::numeric_limits<int>::max() / 4;
  std::vector<std::vector<int>> d(static_cast<size_t>(n), std::vector<int>(static_cast<size_t>(n), inf));
  for (int i = 0; i < n; ++i) d[i][i] = 0;
  for (auto [a, b] : g.edges())
    if (labels[a] == labels[b]) d[a][b] = d[b][a] = 1;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (labels[i] == labels[k] && labels[k] == labels[j])
          d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  int best = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (labels[i] == labels[j]) {
        if (d[i][j] >= inf) return -1;
        best = std::max(best, d[i][j]);
      }
  return best;
}

TEST(GraphType, CanonicalizesAndRejectsSelfLoops) {
  const Graph g = Graph::from_edges(4, {{2, 1}, {1, 2}, {0, 3}, {3, 2}});
  const std::vector<Graph::Edge> expected{{0, 3}, {1, 2}, {2, 3}};
  EXPECT_EQ(g.edges(), expected);
  EXPECT_TRUE(g.has_edge(3, 2));
  EXPECT_FALSE(g.has_edge(0, 1));
  EXPECT_EQ(g.neighbors(2), (std::vector<int>{1, 3}));
  EXPECT_ANY_THROW(Graph::from_edges(3, {{1, 1}}));
  EXPECT_ANY_THROW(Graph::from_edges(3, {{0, 3}}));

  std::ostringstream os;
  g.write_edge_list(os);
  EXPECT_EQ(os.str(), "0 3\n1 2\n2 3\n");
}

TEST(AugmentationGraph, ZeroRadiusConnectsOnlyDuplicates) {
  dcu::Dataset ds;
  ds.samples.resize(4, 2);
  ds.samples << 0, 0, 1, 0, 0, 0, 1, 1e-12;
  const Graph g = dcu::augmentation_graph(ds, {dcu::AugmentationKind::UniformBall, 0.0});
  EXPECT_EQ(g.edges(), (std::vector<Graph::Edge>{{0, 2}}));
}

TEST(AugmentationGraph, ClosedBallBoundary) {
  dcu::Dataset ds;
  ds.samples.resize(2, 1);
  ds.samples << 0.0, 1.0;
  EXPECT_EQ(dcu::augmentation_graph(ds, {dcu::AugmentationKind::UniformBall, 0.5}).edge_count(), 1u);
  EXPECT_EQ(dcu::augmentation_graph(ds, {dcu::AugmentationKind::UniformBall, 0.4999999}).edge_count(), 0u);
}

TEST(AugmentationGraph, MatchesPairwiseOverlapOracle) {
  const dcu::Dataset ds = dcu::make_gaussian_mixture(3, 20, 4, 2.0, 5);
  for (double r : {0.3, 0.8, 1.5}) {
    const dcu::AugmentationSpec aug{dcu::AugmentationKind::UniformBall, r};
    const Graph g = dcu::augmentation_graph(ds, aug);
    for (int i = 0; i < ds.size(); ++i)
      for (int j = i + 1; j < ds.size(); ++j) {
        const bool oracle = (ds.samples.row(i) - ds.samples.row(j)).norm() <= 2 * r;
        ASSERT_EQ(g.has_edge(i, j), oracle) << i << "," << j << " r=" << r;
      }
  }
}

TEST(AugmentationGraph, DistinctBitsDisconnectEverything) {
  dcu::Dataset base = dcu::make_gaussian_mixture(2, 30, 2, 1.0, 6);
  base.samples.setZero();  // every feature pair overlaps
  dcu::Dataset bits = dcu::make_randbits(base, 20, 7);
  EXPECT_EQ(dcu::augmentation_graph(base, {dcu::AugmentationKind::UniformBall, 5.0}).edge_count(),
            60u * 59u / 2u);
  size_t same_pattern_pairs = 0;
  for (int i = 0; i < bits.size(); ++i)
    for (int j = i + 1; j < bits.size(); ++j)
      same_pattern_pairs += bits.bits.row(i) == bits.bits.row(j);
  EXPECT_EQ(dcu::augmentation_graph(bits, {dcu::AugmentationKind::UniformBall, 5.0}).edge_count(),
            same_pattern_pairs);
}

TEST(AugmentationGraph, PermutationEquivariance) {
  const dcu::Dataset ds = dcu::make_gaussian_mixture(2, 15, 3, 2.0, 8);
  std::vector<int> perm(static_cast<size_t>(ds.size()));
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(9);
  std::shuffle(perm.begin(), perm.end(), rng);
  const dcu::AugmentationSpec aug{dcu::AugmentationKind::UniformBall, 0.9};
  const Graph g = dcu::augmentation_graph(ds, aug);
  const Graph h = dcu::augmentation_graph(ds.subset(perm), aug);
  ASSERT_EQ(g.edge_count(), h.edge_count());
  for (auto [a, b] : h.edges()) EXPECT_TRUE(g.has_edge(perm[a], perm[b]));
}

TEST(KernelGraph, Examples) {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 0.9, 0.9, 1.0;
  const KernelMatrix k(m);
  EXPECT_EQ(dcu::epsilon_kernel_graph(k, 0.05).edge_count(), 0u);
  EXPECT_EQ(dcu::epsilon_kernel_graph(k, 0.1).edge_count(), 1u);

  Eigen::MatrixXd blocks = Eigen::MatrixXd::Zero(4, 4);
  blocks.topLeftCorner(2, 2).setOnes();
  blocks.bottomRightCorner(2, 2).setOnes();
  blocks(0, 3) = blocks(3, 0) = 0.3;
  EXPECT_EQ(dcu::epsilon_kernel_graph(KernelMatrix(blocks), 0.0).edges(),
            (std::vector<Graph::Edge>{{0, 1}, {2, 3}}));
  EXPECT_EQ(dcu::epsilon_kernel_graph(KernelMatrix(blocks), 1.0).edge_count(), 6u);
}

TEST(KernelGraph, MonotoneInEpsilon) {
  std::mt19937_64 rng(10);
  const KernelMatrix k = dcu::build_kernel_matrix(dcu_test::gaussian_matrix(30, 3, rng), {dcu::KernelKind::Rbf, 1.0});
  Graph previous = dcu::epsilon_kernel_graph(k, 0.0);
  for (double eps : {0.05, 0.1, 0.3, 0.6, 1.0}) {
    const Graph g = dcu::epsilon_kernel_graph(k, eps);
    for (auto [a, b] : previous.edges()) ASSERT_TRUE(g.has_edge(a, b));
    previous = g;
  }
  EXPECT_EQ(previous.edge_count(), 30u * 29u / 2u);
}

TEST(UnionGraph, Examples) {
  const Graph a = Graph::from_edges(4, {{0, 1}, {2, 3}});
  const Graph b = Graph::from_edges(4, {{1, 2}});
  EXPECT_EQ(dcu::union_graph(a, Graph(4)).edges(), a.edges());
  EXPECT_EQ(dcu::union_graph(a, a).edges(), a.edges());
  EXPECT_EQ(dcu::union_graph(a, b).edge_count(), 3u);
  EXPECT_ANY_THROW(dcu::union_graph(a, Graph(5)));
}

TEST(Connectivity, Examples) {
  const std::vector<int> labels{0, 0, 1, 1, 1};
  const auto full = dcu::class_connectivity(complete_graph(5), labels);
  EXPECT_TRUE(full.all_connected());
  EXPECT_EQ(full.max_intra_class_diameter.hops, 1);

  const auto empty = dcu::class_connectivity(Graph(5), labels);
  EXPECT_FALSE(empty.all_connected());
  EXPECT_TRUE(empty.max_intra_class_diameter.is_infinite());
  EXPECT_EQ(empty.component_counts.at(1), 3);

  const auto path = dcu::class_connectivity(Graph::from_edges(3, {{0, 1}, {1, 2}}), std::vector<int>{4, 4, 4});
  EXPECT_TRUE(path.per_class_connected.at(4));
  EXPECT_EQ(path.max_intra_class_diameter.hops, 2);
}

TEST(Connectivity, CrossClassEdgesDoNotConnect) {
  // 0 - 2 - 1 with vertex 2 in another class: class 0 stays split.
  const auto r = dcu::class_connectivity(Graph::from_edges(3, {{0, 2}, {1, 2}}), std::vector<int>{0, 0, 1});
  EXPECT_FALSE(r.per_class_connected.at(0));
  EXPECT_EQ(r.component_counts.at(0), 2);
}

TEST(Diameter, Examples) {
  const std::vector<int> one(6, 0);
  EXPECT_EQ(dcu::intra_class_diameter(Graph::from_edges(6, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}}), one).hops, 2);
  EXPECT_EQ(dcu::intra_class_diameter(
                Graph::from_edges(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 0}}), one).hops, 3);
  EXPECT_TRUE(dcu::intra_class_diameter(Graph::from_edges(6, {{0, 1}}), one).is_infinite());
}

TEST(Diameter, BfsMatchesFloydWarshall) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 4 + trial % 61;
    const double p = 0.05 + 0.5 * u(rng);
    std::vector<Graph::Edge> edges;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (u(rng) < p) edges.emplace_back(i, j);
    std::vector<int> labels(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) labels[static_cast<size_t>(i)] = i % (1 + trial % 3);
    const Graph g = Graph::from_edges(n, edges);
    const int oracle = floyd_warshall_diameter(g, labels);
    const auto d = dcu::intra_class_diameter(g, labels);
    if (oracle < 0) {
      EXPECT_TRUE(d.is_infinite()) << trial;
    } else {
      EXPECT_EQ(d.hops, oracle) << trial;
    }
    EXPECT_EQ(d, dcu::class_connectivity(g, labels).max_intra_class_diameter);
  }
}

TEST(EpsilonStar, Examples) {
  // Intra-class gaps: (0,1) = 0.1, (0,2) = 0.3, (1,2) = 0.7; vertex 3 is alone.
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(4, 4);
  m(0, 1) = m(1, 0) = 0.9;
  m(0, 2) = m(2, 0) = 0.7;
  m(1, 2) = m(2, 1) = 0.3;
  m(0, 3) = m(3, 0) = 0.99;
  const KernelMatrix k(m);
  const std::vector<int> labels{0, 0, 0, 1};
  EXPECT_NEAR(dcu::epsilon_star(k, labels, 2), 0.3, 1e-15);
  EXPECT_NEAR(dcu::epsilon_star(k, labels, 1), 0.1, 1e-15);
  EXPECT_ANY_THROW(dcu::epsilon_star(k, labels, 4));

  const Graph exclude = Graph::from_edges(4, {{0, 1}});
  EXPECT_NEAR(dcu::epsilon_star(k, labels, 1, &exclude), 0.3, 1e-15);

  Eigen::MatrixXd dup = Eigen::MatrixXd::Identity(3, 3);
  dup(0, 1) = dup(1, 0) = 1.0;
  EXPECT_EQ(dcu::epsilon_star(KernelMatrix(dup), std::vector<int>{0, 0, 0}, 1), 0.0);

  Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(4, 4, 0.6);
  flat.diagonal().setOnes();
  for (int m_edges : {1, 3, 6})
    EXPECT_NEAR(dcu::epsilon_star(KernelMatrix(flat), std::vector<int>{1, 1, 1, 1}, m_edges), 0.4, 1e-15);
}

TEST(EpsilonStar, IsTheMinimalSufficientEpsilon) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 40;
    const KernelMatrix k = dcu::build_kernel_matrix(dcu_test::gaussian_matrix(n, 2, rng), {dcu::KernelKind::Rbf, 1.0});
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) labels[static_cast<size_t>(i)] = i % 2;
    const int m = 5 + trial * 7;
    const double eps = dcu::epsilon_star(k, labels, m);
    auto intra_edges = [&](double e) {
      const Graph g = dcu::epsilon_kernel_graph(k, e);
      int count = 0;
      for (auto [a, b] : g.edges()) count += labels[a] == labels[b];
      return count;
    };
    EXPECT_GE(intra_edges(eps), m);
    EXPECT_LT(intra_edges(std::nextafter(eps, -1.0)), m);
  }
}

TEST(KernelQuality, BlockKernelIsPerfect) {
  const std::vector<int> labels{0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2};
  Eigen::MatrixXd m(12, 12);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j) m(i, j) = labels[i] == labels[j] ? 1.0 : 0.0;
  EXPECT_EQ(dcu::kernel_quality(KernelMatrix(m), labels, 2), 1.0);
  EXPECT_ANY_THROW(dcu::kernel_quality(KernelMatrix(m), labels, 12));
}

TEST(KernelQuality, TiesBreakByIndex) {
  // All off-diagonal entries equal: the neighbours of i are the k smallest other indices.
  const int n = 8;
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(n, n, 0.5);
  m.diagonal().setOnes();
  const std::vector<int> labels{0, 1, 0, 1, 0, 1, 0, 1};
  const int k = 3;
  double oracle = 0.0;
  for (int i = 0; i < n; ++i) {
    int seen = 0, same = 0;
    for (int j = 0; j < n && seen < k; ++j) {
      if (j == i) continue;
      ++seen;
      same += labels[j] == labels[i];
    }
    oracle += double(same) / k;
  }
  oracle /= n;
  const double first = dcu::kernel_quality(KernelMatrix(m), labels, k);
  EXPECT_DOUBLE_EQ(first, oracle);
  EXPECT_EQ(dcu::kernel_quality(KernelMatrix(m), labels, k), first);
}

TEST(KernelQuality, ShuffledLabelsNearChance) {
  // Monte Carlo over label shuffles: each neighbour shares the class with
  // probability (n/C - 1)/(n - 1) when labels are a uniform permutation.
  const int n = 300, classes = 3, k = 10;
  std::mt19937_64 rng(13);
  const KernelMatrix kern = dcu::build_kernel_matrix(dcu_test::gaussian_matrix(n, 4, rng), {dcu::KernelKind::Rbf, 1.0});
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[static_cast<size_t>(i)] = i % classes;
  std::vector<double> values;
  for (int rep = 0; rep < 20; ++rep) {
    std::shuffle(labels.begin(), labels.end(), rng);
    values.push_back(dcu::kernel_quality(kern, labels, k));
  }
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double se = std::sqrt(var / (values.size() - 1) / values.size());
  const double expected = (double(n) / classes - 1) / (n - 1);
  EXPECT_NEAR(mean, expected, 3 * se + 1e-3);
}

}  // namespace
