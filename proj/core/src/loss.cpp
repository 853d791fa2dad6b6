#include "dcu/loss.hpp"

#include "dcu/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

namespace dcu {

EmbeddingBatch EmbeddingBatch::from_rows(Eigen::MatrixXd rows, int anchors, int views) {
  EmbeddingBatch b;
  b.vectors = std::move(rows);
  b.anchors = anchors;
  b.views = views;
  if (b.vectors.rows() != static_cast<Eigen::Index>(anchors) * views)
    throw std::invalid_argument("embedding batch: expected " + std::to_string(anchors * views) +
                                " rows, got " + std::to_string(b.vectors.rows()));
  return b;
}

void EmbeddingBatch::validate(double norm_tol) const {
  if (anchors < 2) throw std::invalid_argument("embedding batch needs n >= 2 anchors");
  if (views < 1) throw std::invalid_argument("embedding batch needs V >= 1 views");
  if (vectors.rows() != static_cast<Eigen::Index>(anchors) * views)
    throw std::invalid_argument("embedding batch: row count does not match n*V");
  for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
    const double norm = vectors.row(r).norm();
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > norm_tol)
      throw std::invalid_argument("embedding row " + std::to_string(r) + " is not unit norm");
  }
}

Centroids Centroids::free(Eigen::MatrixXd mu) {
  Centroids c;
  c.mu = std::move(mu);
  c.source = CentroidSource::Free;
  return c;
}

namespace {

Eigen::MatrixXd view_means(const EmbeddingBatch& batch) {
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(batch.anchors, batch.dim());
  for (int a = 0; a < batch.anchors; ++a) {
    for (int v = 0; v < batch.views; ++v) f.row(a) += batch.view(a, v);
    f.row(a) /= static_cast<double>(batch.views);
  }
  return f;
}

}  // namespace

Centroids view_average_centroids(const EmbeddingBatch& batch) {
  Centroids c;
  c.mu = view_means(batch);
  c.source = CentroidSource::ViewAverage;
  c.views = batch.views;
  return c;
}

Centroids kernel_centroids(const EmbeddingBatch& batch, const CentroidWeights& weights) {
  if (weights.size() != batch.anchors)
    throw std::invalid_argument("kernel_centroids: weights are " + std::to_string(weights.size()) +
                                "x" + std::to_string(weights.size()) + " but batch has " +
                                std::to_string(batch.anchors) + " anchors");
  Centroids c;
  c.mu = weights.weights * view_means(batch);
  c.source = CentroidSource::KernelEstimate;
  c.lambda = weights.lambda;
  c.views = batch.views;
  c.mixing = weights.weights;
  return c;
}

Eigen::MatrixXd pairwise_sq_distances(const Eigen::MatrixXd& rows, DistanceMethod method) {
  const Eigen::Index n = rows.rows();
  if (method == DistanceMethod::Auto) method = n > 64 ? DistanceMethod::Gram : DistanceMethod::Direct;
  Eigen::MatrixXd d(n, n);
  if (method == DistanceMethod::Gram) {
    const Eigen::MatrixXd gram = rows * rows.transpose();
    const Eigen::VectorXd sq = gram.diagonal();
    for (Eigen::Index i = 0; i < n; ++i) {
      d(i, i) = 0.0;
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double v = std::max(0.0, sq(i) + sq(j) - 2.0 * gram(i, j));
        d(i, j) = v;
        d(j, i) = v;
      }
    }
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      d(i, i) = 0.0;
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double v = (rows.row(i) - rows.row(j)).squaredNorm();
        d(i, j) = v;
        d(j, i) = v;
      }
    }
  }
  return d;
}

LossReport decoupled_uniformity_loss(const Centroids& centroids, double temperature,
                                     DistanceMethod method) {
  const int n = centroids.size();
  if (n < 2) throw std::invalid_argument("decoupled uniformity loss needs n >= 2 centroids");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (!centroids.mu.allFinite()) throw NumericalError("non-finite centroid");

  const Eigen::MatrixXd dist = pairwise_sq_distances(centroids.mu, method);
  double shift = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) shift = std::max(shift, -temperature * dist(i, j));

  LossReport out;
  out.pair_weights = Eigen::MatrixXd::Zero(n, n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double e = std::exp(-temperature * dist(i, j) - shift);
      out.pair_weights(i, j) = e;
      total += e;
    }
  }
  out.pair_weights /= total;
  out.value = shift + std::log(total) - std::log(static_cast<double>(n) * (n - 1));
  out.anchor_weights = out.pair_weights.rowwise().sum();

  // sum_j w_kj (mu_k - mu_j) = w_k mu_k - (W mu)_k
  out.grad_mu = -4.0 * temperature *
                (out.anchor_weights.asDiagonal() * centroids.mu - out.pair_weights * centroids.mu);

  if (centroids.views > 0) {
    const Eigen::MatrixXd grad_f =
        centroids.mixing ? Eigen::MatrixXd(centroids.mixing->transpose() * out.grad_mu)
                         : out.grad_mu;
    const int v = centroids.views;
    out.grad_views.resize(static_cast<Eigen::Index>(n) * v, centroids.dim());
    for (int a = 0; a < n; ++a)
      for (int k = 0; k < v; ++k) out.grad_views.row(a * v + k) = grad_f.row(a) / v;
  }
  return out;
}

double population_uniformity_loss(const Eigen::MatrixXd& mu, std::span<const double> mass,
                                  double temperature) {
  const Eigen::Index n = mu.rows();
  if (static_cast<Eigen::Index>(mass.size()) != n)
    throw std::invalid_argument("population_uniformity_loss: mass size mismatch");
  if (n == 0) throw std::invalid_argument("population_uniformity_loss: empty");
  const Eigen::MatrixXd dist = pairwise_sq_distances(mu, DistanceMethod::Direct);
  // Terms are exp(-t d) <= 1 and the diagonal contributes exp(0), so no shift is needed
  // unless every off-diagonal term underflows; the diagonal keeps the sum positive.
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      total += mass[static_cast<size_t>(i)] * mass[static_cast<size_t>(j)] *
               std::exp(-temperature * dist(i, j));
  return std::log(total);
}

ClassIndex index_classes(std::span<const int> labels, int expected_size) {
  if (static_cast<int>(labels.size()) != expected_size)
    throw std::invalid_argument("labels: expected " + std::to_string(expected_size) +
                                " entries, got " + std::to_string(labels.size()));
  std::map<int, int> counts;
  for (int y : labels) {
    if (y < 0) throw std::invalid_argument("labels must be non-negative");
    ++counts[y];
  }
  ClassIndex out;
  std::map<int, int> slot_of;
  for (auto [y, c] : counts) {
    slot_of[y] = static_cast<int>(out.classes.size());
    out.classes.push_back(y);
    out.counts.push_back(c);
  }
  out.slot.reserve(labels.size());
  for (int y : labels) out.slot.push_back(slot_of[y]);
  return out;
}

std::vector<double> class_balanced_mass(std::span<const int> labels) {
  const ClassIndex idx = index_classes(labels, static_cast<int>(labels.size()));
  const double c = static_cast<double>(idx.classes.size());
  std::vector<double> mass(labels.size());
  for (size_t i = 0; i < labels.size(); ++i)
    mass[i] = 1.0 / (c * idx.counts[static_cast<size_t>(idx.slot[i])]);
  return mass;
}

namespace {

Eigen::MatrixXd class_means(const Eigen::MatrixXd& mu, const ClassIndex& idx) {
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(idx.classes.size()), mu.cols());
  for (Eigen::Index i = 0; i < mu.rows(); ++i) means.row(idx.slot[static_cast<size_t>(i)]) += mu.row(i);
  for (size_t c = 0; c < idx.classes.size(); ++c)
    means.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(idx.counts[c]);
  return means;
}

}  // namespace

double supervised_decoupled_loss(const Centroids& centroids, std::span<const int> labels,
                                 double temperature) {
  const ClassIndex idx = index_classes(labels, centroids.size());
  if (idx.classes.empty()) throw std::invalid_argument("supervised loss: no classes");
  const Eigen::MatrixXd means = class_means(centroids.mu, idx);
  const std::vector<double> uniform(idx.classes.size(), 1.0 / static_cast<double>(idx.classes.size()));
  return population_uniformity_loss(means, uniform, temperature);
}

double alignment_metric(const EmbeddingBatch& batch) {
  if (batch.views < 2) throw std::invalid_argument("alignment metric needs V >= 2 views");
  const int v = batch.views;
  const double pairs = 0.5 * v * (v - 1);
  double total = 0.0;
  for (int a = 0; a < batch.anchors; ++a) {
    double acc = 0.0;
    for (int p = 0; p < v; ++p)
      for (int q = p + 1; q < v; ++q) acc += (batch.view(a, p) - batch.view(a, q)).squaredNorm();
    total += acc / pairs;
  }
  return total / batch.anchors;
}

double weak_alignment_epsilon(const EmbeddingBatch& batch) {
  if (batch.views < 2) throw std::invalid_argument("weak alignment needs V >= 2 views");
  double worst = 0.0;
  for (int a = 0; a < batch.anchors; ++a)
    for (int p = 0; p < batch.views; ++p)
      for (int q = p + 1; q < batch.views; ++q)
        worst = std::max(worst, (batch.view(a, p) - batch.view(a, q)).norm());
  return worst;
}

VarianceBoundTerms variance_bound_terms(const Centroids& centroids, std::span<const int> labels) {
  const ClassIndex idx = index_classes(labels, centroids.size());
  const Eigen::MatrixXd means = class_means(centroids.mu, idx);
  const size_t c = idx.classes.size();

  std::vector<double> variance(c, 0.0);
  for (Eigen::Index i = 0; i < centroids.mu.rows(); ++i) {
    const int s = idx.slot[static_cast<size_t>(i)];
    variance[static_cast<size_t>(s)] += (centroids.mu.row(i) - means.row(s)).squaredNorm();
  }
  for (size_t s = 0; s < c; ++s) variance[s] /= static_cast<double>(idx.counts[s]);

  const auto worst = static_cast<int>(std::max_element(variance.begin(), variance.end()) - variance.begin());

  std::vector<Eigen::Index> members;
  for (Eigen::Index i = 0; i < centroids.mu.rows(); ++i)
    if (idx.slot[static_cast<size_t>(i)] == worst) members.push_back(i);
  double dist = 0.0;
  for (Eigen::Index a : members)
    for (Eigen::Index b : members) dist += (centroids.mu.row(a) - centroids.mu.row(b)).norm();
  dist /= static_cast<double>(members.size() * members.size());

  VarianceBoundTerms out;
  out.var_term = 2.0 * variance[static_cast<size_t>(worst)];
  out.mean_dist_term = 4.0 * dist;
  out.worst_class = idx.classes[static_cast<size_t>(worst)];
  return out;
}

}  // namespace dcu
