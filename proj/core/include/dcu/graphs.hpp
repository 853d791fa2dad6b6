#pragma once

#include "dcu/kernels.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace dcu {

struct Dataset;
struct AugmentationSpec;

/// Undirected simple graph over sample indices. Edges are stored once as
/// (i, j) with i < j, sorted lexicographically.
class Graph {
 public:
  using Edge = std::pair<int, int>;

  explicit Graph(int vertex_count = 0);
  /// Canonicalizes, sorts and de-duplicates. Self-loops are rejected.
  static Graph from_edges(int vertex_count, std::vector<Edge> edges);

  int vertex_count() const { return vertex_count_; }
  const std::vector<Edge>& edges() const { return edges_; }
  size_t edge_count() const { return edges_.size(); }
  const std::vector<int>& neighbors(int v) const { return adjacency_[static_cast<size_t>(v)]; }
  bool has_edge(int a, int b) const;

  /// One "i j" line per edge, 0-based, sorted.
  void write_edge_list(std::ostream& os) const;

 private:
  int vertex_count_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adjacency_;
};

/// Edge iff the augmentation supports of the two samples intersect.
Graph augmentation_graph(const Dataset& dataset, const AugmentationSpec& aug);

/// Edge iff max(K_ii, K_jj) - K_ij <= eps.
Graph epsilon_kernel_graph(const KernelMatrix& kernel, double eps);

Graph union_graph(const Graph& a, const Graph& b);

/// Intra-class diameter in hops; empty means infinite (some class disconnected).
struct Diameter {
  std::optional<int> hops;

  static Diameter infinite() { return {}; }
  bool is_infinite() const { return !hops.has_value(); }
  friend bool operator==(const Diameter&, const Diameter&) = default;
};

struct GraphReport {
  std::map<int, bool> per_class_connected;
  std::map<int, int> component_counts;
  Diameter max_intra_class_diameter;

  bool all_connected() const;
};

/// Connectivity of each class-induced subgraph (union-find) plus the maximal
/// intra-class diameter.
GraphReport class_connectivity(const Graph& graph, std::span<const int> labels);

/// Max over classes of the BFS diameter of the class-induced subgraph.
Diameter intra_class_diameter(const Graph& graph, std::span<const int> labels);

/// m-th smallest gap max(K_ii, K_jj) - K_ij over intra-class pairs, optionally
/// skipping pairs that are already edges of `exclude`.
double epsilon_star(const KernelMatrix& kernel, std::span<const int> labels, int m,
                    const Graph* exclude = nullptr);

/// Mean fraction of each vertex's k nearest neighbours (kernel distance, ties
/// to the smaller index, self excluded) that share its label.
double kernel_quality(const KernelMatrix& kernel, std::span<const int> labels, int k = 10);

}  // namespace dcu
