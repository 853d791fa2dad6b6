#pragma once

#include "dcu/kernels.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace dcu {

/// n anchors x V views of unit-norm embeddings, stored anchor-major:
/// row a*V + v holds view v of anchor a.
struct EmbeddingBatch {
  Eigen::MatrixXd vectors;  // (n*V) x d
  int anchors = 0;
  int views = 0;

  static EmbeddingBatch from_rows(Eigen::MatrixXd rows, int anchors, int views);

  int dim() const { return static_cast<int>(vectors.cols()); }
  int anchor_of(int row) const { return row / views; }
  auto view(int anchor, int v) const { return vectors.row(anchor * views + v); }

  /// Throws unless n >= 2, V >= 1, shapes agree and every row has unit norm
  /// within `norm_tol`.
  void validate(double norm_tol = 1e-6) const;
};

enum class CentroidSource { ViewAverage, KernelEstimate, Free };

/// Per-anchor centroids plus what is needed to chain gradients back to views.
struct Centroids {
  Eigen::MatrixXd mu;  // n x d
  CentroidSource source = CentroidSource::Free;
  double lambda = 0.0;
  int views = 0;                           // 0 when not derived from a batch
  std::optional<Eigen::MatrixXd> mixing;   // A for KernelEstimate, held constant

  static Centroids free(Eigen::MatrixXd mu);
  int size() const { return static_cast<int>(mu.rows()); }
  int dim() const { return static_cast<int>(mu.cols()); }
};

/// F_i = (1/V) sum_v f(x_i^(v)).
Centroids view_average_centroids(const EmbeddingBatch& batch);

/// mu_hat = A F with A treated as a constant.
Centroids kernel_centroids(const EmbeddingBatch& batch, const CentroidWeights& weights);

struct LossReport {
  double value = 0.0;
  Eigen::MatrixXd grad_mu;        // n x d
  Eigen::MatrixXd grad_views;     // (n*V) x d, empty for free centroids
  Eigen::MatrixXd pair_weights;   // w_{k,j}, zero diagonal
  Eigen::VectorXd anchor_weights; // w_k = sum_j w_{k,j}
};

enum class DistanceMethod { Auto, Direct, Gram };

/// Squared Euclidean distances between rows. Auto uses the Gram expansion
/// ||a||^2 + ||b||^2 - 2 a.b only for n > 64.
Eigen::MatrixXd pairwise_sq_distances(const Eigen::MatrixXd& rows,
                                      DistanceMethod method = DistanceMethod::Auto);

/// log( 1/(n(n-1)) sum_{i != j} exp(-t ||mu_i - mu_j||^2) ) with gradients.
///
/// grad_mu[k] = -4t sum_{j != k} w_{k,j} (mu_k - mu_j). grad_views divides by V
/// and, for kernel centroids, first multiplies by A^T.
LossReport decoupled_uniformity_loss(const Centroids& centroids, double temperature,
                                     DistanceMethod method = DistanceMethod::Auto);

/// log sum_{i,j} p_i p_j exp(-t ||mu_i - mu_j||^2), diagonal included: the
/// uniformity loss of the probability measure placing mass p_i on mu_i.
double population_uniformity_loss(const Eigen::MatrixXd& mu, std::span<const double> mass,
                                  double temperature = 1.0);

/// Mass 1/(C n_y) on each anchor of class y; classes count equally.
std::vector<double> class_balanced_mass(std::span<const int> labels);

/// log( 1/C^2 sum_{y,y'} exp(-t ||mu_y - mu_y'||^2) ) over class-mean centroids,
/// y = y' included, classes weighted uniformly.
double supervised_decoupled_loss(const Centroids& centroids, std::span<const int> labels,
                                 double temperature = 1.0);

/// Mean over anchors of the mean over unordered view pairs of ||f(x) - f(x')||^2.
double alignment_metric(const EmbeddingBatch& batch);

/// max over anchors and view pairs of ||f(x) - f(x')||.
double weak_alignment_epsilon(const EmbeddingBatch& batch);

struct VarianceBoundTerms {
  double var_term = 0.0;        // 2 * sum_j Var(mu^j | y*)
  double mean_dist_term = 0.0;  // 4 * E_{x,x' | y*} ||mu_x - mu_x'||
  int worst_class = -1;         // y* = argmax_y sum_j Var(mu^j | y)
};

VarianceBoundTerms variance_bound_terms(const Centroids& centroids,
                                        std::span<const int> labels);

/// Dense relabeling: returns class ids in ascending order and, per anchor,
/// the index of its class. Throws on negative ids or size mismatch.
struct ClassIndex {
  std::vector<int> classes;
  std::vector<int> slot;  // per anchor
  std::vector<int> counts;
};
ClassIndex index_classes(std::span<const int> labels, int expected_size);

}  // namespace dcu
