#pragma once

#include "dcu/data.hpp"
#include "dcu/encoder.hpp"
#include "dcu/graphs.hpp"
#include "dcu/kernels.hpp"
#include "dcu/loss.hpp"
#include "dcu/probe.hpp"
#include "dcu/trainer.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dcu {

// ---------------------------------------------------------------- simplex

struct SimplexReport {
  int n = 0;
  int dim = 0;
  bool in_regime = false;              // n <= d + 1
  double expected_sq_distance = 0.0;   // 2n / (n - 1)
  double worst_norm_deviation = 0.0;   // max_i | ||mu_i|| - 1 |
  double sum_norm = 0.0;               // || sum_i mu_i ||
  double worst_pair_deviation = 0.0;   // max_{i<j} | ||mu_i - mu_j||^2 - 2n/(n-1) |
  double tolerance = 0.0;

  bool norms_ok() const { return worst_norm_deviation <= tolerance; }
  bool sum_ok() const { return sum_norm <= tolerance; }
  bool pairs_ok() const { return worst_pair_deviation <= tolerance; }
  bool passed() const { return in_regime && norms_ok() && sum_ok() && pairs_ok(); }
};

SimplexReport simplex_check(const Eigen::MatrixXd& mu, double tolerance);

struct FreeCentroidOptions {
  int n = 4;
  int dim = 8;
  double temperature = 1.0;
  int steps = 10000;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
};

struct FreeCentroidResult {
  Eigen::MatrixXd mu;
  double loss = 0.0;
};

/// Projected gradient descent on the uniformity loss with the centroids as
/// free parameters kept inside the closed unit ball.
FreeCentroidResult optimize_free_centroids(const FreeCentroidOptions& options);

// ---------------------------------------------------------------- bounds

struct BoundCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;       // rhs - lhs
  bool passed = false;      // slack >= -1e-9 (always true when vacuous)
  bool vacuous = false;     // infinite diameter
  bool asymptotic = false;  // holds only up to an unquantified O(n^-1/4) term
  std::string note;
};

/// All losses are evaluated at t = 1, where the inequalities are stated.
struct BoundInputs {
  Eigen::MatrixXd centroids;  // per-sample centroids mu_x
  std::vector<int> labels;

  // Augmentation-graph bound; skipped when eps' is unset.
  std::optional<double> weak_alignment;
  Diameter augmentation_diameter = Diameter::infinite();

  // Kernel bound; skipped unless kernel centroids and the union diameter are set.
  std::optional<Eigen::MatrixXd> kernel_centroids;
  std::optional<Diameter> union_diameter;
  std::optional<double> beta;
  double eps = 0.0;
};

struct BoundReport {
  int n = 0;
  double population_loss = 0.0;  // class-balanced, diagonal included
  double empirical_loss = 0.0;   // i != j estimator on the same centroids
  double supervised_loss = 0.0;
  VarianceBoundTerms terms;
  std::optional<double> eps_prime;
  Diameter augmentation_diameter = Diameter::infinite();
  std::optional<Diameter> union_diameter;
  std::optional<double> beta;
  double eps = 0.0;
  std::optional<double> kernel_loss;  // population loss of the kernel centroids
  std::vector<BoundCheck> checks;

  /// All non-asymptotic checks passed.
  bool passed() const;
  const BoundCheck* find(const std::string& name) const;
};

inline constexpr double kBoundSlackTolerance = 1e-9;

BoundReport verify_bounds(const BoundInputs& inputs);

// ---------------------------------------------------------------- estimators

/// Uniformity estimator error against the population value for centroids
/// normalize(concentration * e1 + N(0, I_3)) on S^2. The reference is a Monte
/// Carlo mean over `oracle_pairs` independent pairs. At concentration 0 the
/// law is uniform and the i != j estimator is a degenerate U-statistic whose
/// error decays like 1/n instead of 1/sqrt(n).
struct BiasPoint {
  int n = 0;
  double mean_abs_error = 0.0;
};

struct BiasCurve {
  std::vector<BiasPoint> points;
  double oracle = 0.0;
  double oracle_stderr = 0.0;
  double slope = 0.0;  // log-log, error vs n
};

BiasCurve estimator_bias_curve(std::span<const int> sizes, int repetitions, double temperature,
                               double concentration, long oracle_pairs, std::uint64_t seed);

/// Monte Carlo population loss of the law above: log of the mean pair
/// potential, with the standard error of that log.
std::pair<double, double> sphere_population_loss(double temperature, double concentration,
                                                 long pairs, std::uint64_t seed);

/// Population uniformity loss of the uniform distribution on S^{d-1}, d = 3.
double sphere_uniformity_closed_form(double temperature);

/// Enumerable instance for the kernel centroid estimator: each class owns
/// `atoms_per_class` random unit embeddings, an anchor's views are uniform over
/// its class atoms, so mu_x is the class atom mean. The kernel is the exact
/// class-block kernel K_ij = [y_i = y_j].
struct AtomInstance {
  int classes = 4;
  int atoms_per_class = 8;
  int dim = 8;
  std::uint64_t seed = 0;
};

struct ConvergencePoint {
  int n = 0;
  double lambda = 0.0;
  double mean_error = 0.0;  // mean over repetitions of mean_i ||mu_hat_i - mu_i||
};

struct ConvergenceTable {
  std::vector<ConvergencePoint> points;
  double slope = 0.0;

  bool non_increasing_up_to_one_inversion() const;
};

using LambdaRule = std::function<double(int)>;

ConvergenceTable estimator_convergence(const AtomInstance& instance, std::span<const int> sizes,
                                       const LambdaRule& lambda, int repetitions,
                                       std::uint64_t seed);

// ---------------------------------------------------------------- statistics

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

/// Undefined (nullopt) when either column is constant.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------- experiments

struct ProbeSplit {
  Dataset train;
  Dataset test;
};

struct ExperimentResult {
  TrainResult training;
  ProbeResult probe;
};

/// Trains on `split.train` and probes the frozen representation on both splits.
ExperimentResult train_and_probe(const ProbeSplit& split, const PriorEmbedding* prior,
                                 const TrainConfig& config, const EncoderParams& init,
                                 const ProbeOptions& probe);

struct SweepLevel {
  double noise = 0.0;
  bool shuffled = false;
};

struct SweepSetup {
  ProbeSplit split;
  TrainConfig train;  // must carry a kernel
  EncoderParams init;
  ProbeOptions probe;
  std::vector<SweepLevel> levels;
  std::uint64_t prior_seed = 0;
  int knn = 10;
  int m = 100;
};

struct SweepRow {
  SweepLevel level;
  double kernel_quality = 0.0;
  double epsilon_star = 0.0;
  double accuracy = 0.0;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::optional<double> pearson_quality_accuracy;
  std::optional<double> spearman_eps_accuracy;
};

using SweepCallback = std::function<void(const SweepRow&)>;

/// Per level: oracle prior, kernel quality and eps* on the training split,
/// kernel-variant training, linear probe. Requires at least 5 levels.
SweepReport quality_accuracy_sweep(const SweepSetup& setup, const SweepCallback& on_row = {});

}  // namespace dcu
