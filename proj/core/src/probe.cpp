#include "dcu/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <string>

namespace dcu {

namespace {

Eigen::MatrixXd with_bias(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out(x.rows(), x.cols() + 1);
  out.leftCols(x.cols()) = x;
  out.col(x.cols()).setOnes();
  return out;
}

void softmax_rows(Eigen::MatrixXd& logits) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - m).exp().matrix();
    logits.row(i) /= logits.row(i).sum();
  }
}

}  // namespace

std::vector<int> SoftmaxModel::predict(const Eigen::MatrixXd& features) const {
  const Eigen::MatrixXd scores = with_bias(features) * weights;
  std::vector<int> out(static_cast<size_t>(features.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    scores.row(i).maxCoeff(&best);
    out[static_cast<size_t>(i)] = classes[static_cast<size_t>(best)];
  }
  return out;
}

SoftmaxModel fit_softmax(const Eigen::MatrixXd& features, std::span<const int> labels,
                         double penalty, int max_iterations, double gradient_tolerance) {
  if (static_cast<Eigen::Index>(labels.size()) != features.rows())
    throw std::invalid_argument("probe: feature/label count mismatch");
  SoftmaxModel model;
  const std::set<int> distinct(labels.begin(), labels.end());
  model.classes.assign(distinct.begin(), distinct.end());
  if (model.classes.size() < 2) throw std::invalid_argument("probe: training set has a single class");

  const Eigen::MatrixXd x = with_bias(features);
  const auto n = static_cast<double>(x.rows());
  const auto c = static_cast<Eigen::Index>(model.classes.size());
  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(x.rows(), c);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto it = std::lower_bound(model.classes.begin(), model.classes.end(), labels[static_cast<size_t>(i)]);
    onehot(i, it - model.classes.begin()) = 1.0;
  }

  // Softmax cross-entropy Hessian is bounded by 0.5 * X^T X / n per class block.
  const Eigen::MatrixXd gram = x.transpose() * x / n;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const double lipschitz = 0.5 * eig.eigenvalues().maxCoeff() + penalty;
  const double step = 1.0 / lipschitz;

  auto gradient = [&](const Eigen::MatrixXd& w) {
    Eigen::MatrixXd p = x * w;
    softmax_rows(p);
    Eigen::MatrixXd g = x.transpose() * (p - onehot) / n;
    g.topRows(g.rows() - 1) += penalty * w.topRows(w.rows() - 1);
    return g;
  };

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(x.cols(), c);
  Eigen::MatrixXd w_prev = w;
  for (int it = 0; it < max_iterations; ++it) {
    const double beta = static_cast<double>(it) / (it + 3);
    const Eigen::MatrixXd look = w + beta * (w - w_prev);
    const Eigen::MatrixXd g = gradient(look);
    if (g.norm() <= gradient_tolerance) {
      w = look;
      break;
    }
    w_prev = w;
    w = look - step * g;
  }
  model.weights = std::move(w);
  return model;
}

namespace {

double accuracy_of(const SoftmaxModel& model, const Eigen::MatrixXd& x, std::span<const int> y) {
  const auto pred = model.predict(x);
  size_t hits = 0;
  for (size_t i = 0; i < pred.size(); ++i) hits += pred[i] == y[i];
  return pred.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(pred.size());
}

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& x, const std::vector<int>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(idx[r]);
  return out;
}

std::vector<int> labels_of(std::span<const int> y, const std::vector<int>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(y[static_cast<size_t>(i)]);
  return out;
}

}  // namespace

ProbeResult linear_probe(const Eigen::MatrixXd& train_features, std::span<const int> train_labels,
                         const Eigen::MatrixXd& test_features, std::span<const int> test_labels,
                         const ProbeOptions& options) {
  if (train_features.cols() != test_features.cols())
    throw std::invalid_argument("probe: train and test feature widths differ");
  if (static_cast<Eigen::Index>(test_labels.size()) != test_features.rows())
    throw std::invalid_argument("probe: test feature/label count mismatch");
  if (options.penalties.empty()) throw std::invalid_argument("probe: empty penalty grid");
  if (options.folds < 2) throw std::invalid_argument("probe: need at least 2 folds");
  if (std::set<int>(train_labels.begin(), train_labels.end()).size() < 2)
    throw std::invalid_argument("probe: training set has a single class");

  const int n = static_cast<int>(train_features.rows());
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(options.seed);
  std::shuffle(order.begin(), order.end(), rng);

  ProbeResult result;
  result.cv_accuracy.assign(options.penalties.size(), 0.0);
  for (size_t p = 0; p < options.penalties.size(); ++p) {
    int used = 0;
    for (int f = 0; f < options.folds; ++f) {
      std::vector<int> fit_idx, val_idx;
      for (int r = 0; r < n; ++r) (r % options.folds == f ? val_idx : fit_idx).push_back(order[static_cast<size_t>(r)]);
      const auto fit_y = labels_of(train_labels, fit_idx);
      if (val_idx.empty() || std::set<int>(fit_y.begin(), fit_y.end()).size() < 2) continue;
      const SoftmaxModel m = fit_softmax(rows_of(train_features, fit_idx), fit_y, options.penalties[p],
                                         options.max_iterations, options.gradient_tolerance);
      const auto val_y = labels_of(train_labels, val_idx);
      result.cv_accuracy[p] += accuracy_of(m, rows_of(train_features, val_idx), val_y);
      ++used;
    }
    if (used > 0) result.cv_accuracy[p] /= used;
  }
  // First best in grid order wins ties.
  const auto best = std::max_element(result.cv_accuracy.begin(), result.cv_accuracy.end()) -
                    result.cv_accuracy.begin();
  result.chosen_penalty = options.penalties[static_cast<size_t>(best)];

  const SoftmaxModel model = fit_softmax(train_features, train_labels, result.chosen_penalty,
                                         options.max_iterations, options.gradient_tolerance);
  result.classes = model.classes;
  const auto pred = model.predict(test_features);
  const auto c = static_cast<Eigen::Index>(model.classes.size());
  result.confusion = Eigen::MatrixXi::Zero(c, c);
  std::map<int, int> seen, hit;
  size_t hits = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const int y = test_labels[i];
    ++seen[y];
    if (pred[i] == y) {
      ++hit[y];
      ++hits;
    }
    const auto row = std::lower_bound(model.classes.begin(), model.classes.end(), y);
    if (row != model.classes.end() && *row == y) {
      const auto col = std::lower_bound(model.classes.begin(), model.classes.end(), pred[i]);
      ++result.confusion(row - model.classes.begin(), col - model.classes.begin());
    }
  }
  result.accuracy = pred.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(pred.size());
  for (auto [y, count] : seen) result.per_class_accuracy[y] = static_cast<double>(hit[y]) / count;
  return result;
}

}  // namespace dcu
