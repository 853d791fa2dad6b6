#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace dcu {

struct ProbeOptions {
  std::vector<double> penalties{0.0, 1e-2, 1e-3, 1e-4, 1e-5};
  int folds = 5;
  int max_iterations = 10000;
  double gradient_tolerance = 1e-8;
  std::uint64_t seed = 0;
};

struct ProbeResult {
  double accuracy = 0.0;
  double chosen_penalty = 0.0;
  std::map<int, double> per_class_accuracy;
  std::vector<double> cv_accuracy;            // per penalty, grid order
  std::vector<int> classes;                   // training classes, ascending
  Eigen::MatrixXi confusion;                  // rows: true class, cols: predicted
};

/// Multinomial logistic regression on frozen features with bias. Minimizes
/// mean cross-entropy + penalty/2 * ||W||^2 by accelerated full-batch gradient
/// descent with step 1/L; stops at ||grad|| <= tolerance or the iteration cap.
struct SoftmaxModel {
  Eigen::MatrixXd weights;  // (d + 1) x C, last row is the bias
  std::vector<int> classes;

  std::vector<int> predict(const Eigen::MatrixXd& features) const;
};

SoftmaxModel fit_softmax(const Eigen::MatrixXd& features, std::span<const int> labels,
                         double penalty, int max_iterations, double gradient_tolerance);

/// Cross-validates the penalty grid (k folds, seeded split), refits on the
/// whole training set and scores the test set.
ProbeResult linear_probe(const Eigen::MatrixXd& train_features, std::span<const int> train_labels,
                         const Eigen::MatrixXd& test_features, std::span<const int> test_labels,
                         const ProbeOptions& options = {});

}  // namespace dcu
