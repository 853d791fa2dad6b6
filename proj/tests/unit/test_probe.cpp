#include "dcu/probe.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace {

struct Labeled {
  Eigen::MatrixXd x;
  std::vector<int> y;
};

Labeled separable(int per_class, int classes, int dim, double margin, std::mt19937_64& rng) {
  Labeled out;
  out.x = dcu_test::gaussian_matrix(per_class * classes, dim, rng) * 0.3;
  for (int i = 0; i < per_class * classes; ++i) {
    const int c = i % classes;
    out.x(i, c) += margin;
    out.y.push_back(c * 10);  // non-contiguous ids
  }
  return out;
}

// Mean cross-entropy gradient written out directly, penalty excluded from the bias row.
Eigen::MatrixXd softmax_gradient(const Eigen::MatrixXd& w, const Eigen::MatrixXd& x,
                                 const std::vector<int>& slot, double penalty) {
  const int n = static_cast<int>(x.rows());
  Eigen::MatrixXd xb(n, x.cols() + 1);
  xb << x, Eigen::VectorXd::Ones(n);
  Eigen::MatrixXd p = xb * w;
  for (int i = 0; i < n; ++i) {
    p.row(i).array() -= p.row(i).maxCoeff();
    p.row(i) = p.row(i).array().exp().matrix();
    p.row(i) /= p.row(i).sum();
    p(i, slot[static_cast<size_t>(i)]) -= 1.0;
  }
  Eigen::MatrixXd g = xb.transpose() * p / n;
  g.topRows(x.cols()) += penalty * w.topRows(x.cols());
  return g;
}

TEST(Softmax, ConvergesToAStationaryPoint) {
  std::mt19937_64 rng(1);
  Labeled d = separable(40, 3, 4, 0.5, rng);  // overlapping, so the optimum is finite
  const double penalty = 1e-2;
  const auto model = dcu::fit_softmax(d.x, d.y, penalty, 20000, 1e-9);
  std::vector<int> slot;
  for (int y : d.y) slot.push_back(y / 10);
  EXPECT_EQ(model.classes, (std::vector<int>{0, 10, 20}));
  EXPECT_LE(softmax_gradient(model.weights, d.x, slot, penalty).norm(), 1e-8);
}

TEST(Softmax, PenaltyShrinksWeights) {
  std::mt19937_64 rng(2);
  Labeled d = separable(30, 2, 3, 1.0, rng);
  const auto loose = dcu::fit_softmax(d.x, d.y, 1e-4, 5000, 1e-9);
  const auto tight = dcu::fit_softmax(d.x, d.y, 1.0, 5000, 1e-9);
  EXPECT_LT(tight.weights.topRows(3).norm(), loose.weights.topRows(3).norm());
}

TEST(Probe, SeparableDataIsPerfect) {
  std::mt19937_64 rng(3);
  const Labeled train = separable(50, 2, 3, 3.0, rng);
  const Labeled test = separable(50, 2, 3, 3.0, rng);
  const auto r = dcu::linear_probe(train.x, train.y, test.x, test.y);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(dcu::linear_probe(train.x, train.y, train.x, train.y).accuracy, 1.0);
  EXPECT_NE(std::find(r.cv_accuracy.begin(), r.cv_accuracy.end(), 1.0), r.cv_accuracy.end());
  const std::vector<double> grid{0.0, 1e-2, 1e-3, 1e-4, 1e-5};
  EXPECT_NE(std::find(grid.begin(), grid.end(), r.chosen_penalty), grid.end());
}

TEST(Probe, ShuffledLabelsAreNearChance) {
  std::mt19937_64 rng(4);
  const int classes = 4;
  Labeled train = separable(100, classes, 6, 2.0, rng);
  Labeled test = separable(250, classes, 6, 2.0, rng);
  std::shuffle(train.y.begin(), train.y.end(), rng);
  const auto r = dcu::linear_probe(train.x, train.y, test.x, test.y);
  const double p = 1.0 / classes;
  const double sigma = std::sqrt(p * (1 - p) / test.y.size());
  EXPECT_NEAR(r.accuracy, p, 3 * sigma);
}

TEST(Probe, ConfusionAgreesWithAccuracy) {
  std::mt19937_64 rng(5);
  const Labeled train = separable(60, 3, 3, 0.8, rng);
  const Labeled test = separable(60, 3, 3, 0.8, rng);
  const auto r = dcu::linear_probe(train.x, train.y, test.x, test.y);
  ASSERT_EQ(r.confusion.rows(), 3);
  EXPECT_EQ(r.confusion.sum(), 180);
  EXPECT_DOUBLE_EQ(r.accuracy, r.confusion.diagonal().sum() / 180.0);
  for (int c = 0; c < 3; ++c)
    EXPECT_DOUBLE_EQ(r.per_class_accuracy.at(c * 10), r.confusion(c, c) / double(r.confusion.row(c).sum()));
  EXPECT_LT(r.accuracy, 1.0);
  EXPECT_GT(r.accuracy, 0.5);
}

TEST(Probe, DeterministicAndRotationInvariant) {
  std::mt19937_64 rng(6);
  const Labeled train = separable(80, 3, 5, 1.0, rng);
  const Labeled test = separable(80, 3, 5, 1.0, rng);
  dcu::ProbeOptions opts;
  opts.seed = 17;
  const auto a = dcu::linear_probe(train.x, train.y, test.x, test.y, opts);
  const auto b = dcu::linear_probe(train.x, train.y, test.x, test.y, opts);
  EXPECT_EQ(a.accuracy, b.accuracy);
  EXPECT_EQ(a.cv_accuracy, b.cv_accuracy);

  for (int trial = 0; trial < 3; ++trial) {
    const Eigen::MatrixXd q = dcu_test::random_orthogonal(5, rng);
    const auto rot = dcu::linear_probe(train.x * q, train.y, test.x * q, test.y, opts);
    EXPECT_NEAR(rot.accuracy, a.accuracy, 0.005);
  }
}

TEST(Probe, RejectsBadInputs) {
  std::mt19937_64 rng(7);
  const Labeled d = separable(10, 2, 3, 1.0, rng);
  EXPECT_ANY_THROW(dcu::linear_probe(d.x, std::vector<int>(20, 1), d.x, d.y));
  EXPECT_ANY_THROW(dcu::linear_probe(d.x, d.y, Eigen::MatrixXd::Ones(4, 2), std::vector<int>(4, 0)));
  EXPECT_ANY_THROW(dcu::linear_probe(d.x, std::vector<int>(5, 0), d.x, d.y));
}

}  // namespace
