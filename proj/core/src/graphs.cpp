#include "dcu/graphs.hpp"

#include "dcu/data.hpp"
#include "dcu/loss.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

namespace dcu {

Graph::Graph(int vertex_count)
    : vertex_count_(vertex_count), adjacency_(static_cast<size_t>(std::max(0, vertex_count))) {
  if (vertex_count < 0) throw std::invalid_argument("graph: negative vertex count");
}

Graph Graph::from_edges(int vertex_count, std::vector<Edge> edges) {
  Graph g(vertex_count);
  for (auto& [a, b] : edges) {
    if (a < 0 || b < 0 || a >= vertex_count || b >= vertex_count)
      throw std::out_of_range("graph: edge endpoint out of range");
    if (a == b) throw std::invalid_argument("graph: self-loop at " + std::to_string(a));
    if (a > b) std::swap(a, b);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  g.edges_ = std::move(edges);
  for (const auto& [a, b] : g.edges_) {
    g.adjacency_[static_cast<size_t>(a)].push_back(b);
    g.adjacency_[static_cast<size_t>(b)].push_back(a);
  }
  for (auto& adj : g.adjacency_) std::sort(adj.begin(), adj.end());
  return g;
}

bool Graph::has_edge(int a, int b) const {
  if (a > b) std::swap(a, b);
  return std::binary_search(edges_.begin(), edges_.end(), Edge{a, b});
}

void Graph::write_edge_list(std::ostream& os) const {
  for (const auto& [a, b] : edges_) os << a << ' ' << b << '\n';
}

Graph augmentation_graph(const Dataset& dataset, const AugmentationSpec& aug) {
  aug.validate();
  const int n = dataset.size();
  std::vector<Graph::Edge> edges;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd xi = dataset.samples.row(i).transpose();
    for (int j = i + 1; j < n; ++j) {
      if (dataset.bit_count() > 0 && dataset.bits.row(i) != dataset.bits.row(j)) continue;
      if (supports_overlap(xi, dataset.samples.row(j).transpose(), aug)) edges.emplace_back(i, j);
    }
  }
  return Graph::from_edges(n, std::move(edges));
}

namespace {
double gap(const KernelMatrix& k, int i, int j) { return std::max(k(i, i), k(j, j)) - k(i, j); }
}  // namespace

Graph epsilon_kernel_graph(const KernelMatrix& kernel, double eps) {
  const int n = kernel.size();
  std::vector<Graph::Edge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (gap(kernel, i, j) <= eps) edges.emplace_back(i, j);
  return Graph::from_edges(n, std::move(edges));
}

Graph union_graph(const Graph& a, const Graph& b) {
  if (a.vertex_count() != b.vertex_count())
    throw std::invalid_argument("union_graph: vertex counts differ (" +
                                std::to_string(a.vertex_count()) + " vs " +
                                std::to_string(b.vertex_count()) + ")");
  std::vector<Graph::Edge> edges;
  edges.reserve(a.edge_count() + b.edge_count());
  std::set_union(a.edges().begin(), a.edges().end(), b.edges().begin(), b.edges().end(),
                 std::back_inserter(edges));
  return Graph::from_edges(a.vertex_count(), std::move(edges));
}

bool GraphReport::all_connected() const {
  return std::all_of(per_class_connected.begin(), per_class_connected.end(),
                     [](const auto& kv) { return kv.second; });
}

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(int n) : parent_(static_cast<size_t>(n)), rank_(static_cast<size_t>(n), 0) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[static_cast<size_t>(x)] != x) {
      parent_[static_cast<size_t>(x)] = parent_[static_cast<size_t>(parent_[static_cast<size_t>(x)])];
      x = parent_[static_cast<size_t>(x)];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[static_cast<size_t>(a)] < rank_[static_cast<size_t>(b)]) std::swap(a, b);
    parent_[static_cast<size_t>(b)] = a;
    if (rank_[static_cast<size_t>(a)] == rank_[static_cast<size_t>(b)]) ++rank_[static_cast<size_t>(a)];
  }

 private:
  std::vector<int> parent_;
  std::vector<int> rank_;
};

void check_labels(const Graph& g, std::span<const int> labels) {
  if (static_cast<int>(labels.size()) != g.vertex_count())
    throw std::invalid_argument("labels size " + std::to_string(labels.size()) +
                                " does not match vertex count " + std::to_string(g.vertex_count()));
}

// Longest shortest path from `source` staying inside its class; -1 if some
// class member is unreachable.
int class_eccentricity(const Graph& g, std::span<const int> labels, int source, int class_size) {
  const int y = labels[static_cast<size_t>(source)];
  std::vector<int> dist(static_cast<size_t>(g.vertex_count()), -1);
  std::deque<int> queue{source};
  dist[static_cast<size_t>(source)] = 0;
  int reached = 1;
  int far = 0;
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    for (int w : g.neighbors(v)) {
      if (labels[static_cast<size_t>(w)] != y || dist[static_cast<size_t>(w)] >= 0) continue;
      dist[static_cast<size_t>(w)] = dist[static_cast<size_t>(v)] + 1;
      far = std::max(far, dist[static_cast<size_t>(w)]);
      ++reached;
      queue.push_back(w);
    }
  }
  return reached == class_size ? far : -1;
}

}  // namespace

GraphReport class_connectivity(const Graph& graph, std::span<const int> labels) {
  check_labels(graph, labels);
  const int n = graph.vertex_count();
  DisjointSets sets(n);
  for (const auto& [a, b] : graph.edges())
    if (labels[static_cast<size_t>(a)] == labels[static_cast<size_t>(b)]) sets.unite(a, b);

  std::map<int, std::vector<int>> roots;
  for (int v = 0; v < n; ++v) roots[labels[static_cast<size_t>(v)]].push_back(sets.find(v));

  GraphReport report;
  for (auto& [y, r] : roots) {
    std::sort(r.begin(), r.end());
    const int components = static_cast<int>(std::unique(r.begin(), r.end()) - r.begin());
    report.component_counts[y] = components;
    report.per_class_connected[y] = components == 1;
  }
  report.max_intra_class_diameter =
      report.all_connected() ? intra_class_diameter(graph, labels) : Diameter::infinite();
  return report;
}

Diameter intra_class_diameter(const Graph& graph, std::span<const int> labels) {
  check_labels(graph, labels);
  std::map<int, int> class_size;
  for (int y : labels) ++class_size[y];
  int worst = 0;
  for (int v = 0; v < graph.vertex_count(); ++v) {
    const int ecc = class_eccentricity(graph, labels, v, class_size[labels[static_cast<size_t>(v)]]);
    if (ecc < 0) return Diameter::infinite();
    worst = std::max(worst, ecc);
  }
  return Diameter{worst};
}

double epsilon_star(const KernelMatrix& kernel, std::span<const int> labels, int m,
                    const Graph* exclude) {
  const int n = kernel.size();
  if (static_cast<int>(labels.size()) != n)
    throw std::invalid_argument("epsilon_star: labels size mismatch");
  if (m < 1) throw std::invalid_argument("epsilon_star: m must be >= 1");
  if (exclude && exclude->vertex_count() != n)
    throw std::invalid_argument("epsilon_star: exclude graph size mismatch");
  std::vector<double> gaps;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (labels[static_cast<size_t>(i)] != labels[static_cast<size_t>(j)]) continue;
      if (exclude && exclude->has_edge(i, j)) continue;
      gaps.push_back(gap(kernel, i, j));
    }
  if (static_cast<int>(gaps.size()) < m)
    throw std::invalid_argument("epsilon_star: only " + std::to_string(gaps.size()) +
                                " candidate intra-class pairs for m = " + std::to_string(m));
  auto nth = gaps.begin() + (m - 1);
  std::nth_element(gaps.begin(), nth, gaps.end());
  return *nth;
}

double kernel_quality(const KernelMatrix& kernel, std::span<const int> labels, int k) {
  const int n = kernel.size();
  if (static_cast<int>(labels.size()) != n)
    throw std::invalid_argument("kernel_quality: labels size mismatch");
  if (k < 1 || k >= n)
    throw std::invalid_argument("kernel_quality: need 1 <= k < n (k = " + std::to_string(k) +
                                ", n = " + std::to_string(n) + ")");
  std::vector<std::pair<double, int>> cand(static_cast<size_t>(n - 1));
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    size_t c = 0;
    for (int j = 0; j < n; ++j)
      if (j != i) cand[c++] = {kernel_distance(kernel, i, j), j};
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    int same = 0;
    for (int r = 0; r < k; ++r)
      if (labels[static_cast<size_t>(cand[static_cast<size_t>(r)].second)] == labels[static_cast<size_t>(i)]) ++same;
    total += static_cast<double>(same) / k;
  }
  return total / n;
}

}  // namespace dcu
