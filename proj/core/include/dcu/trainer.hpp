#pragma once

#include "dcu/data.hpp"
#include "dcu/encoder.hpp"
#include "dcu/kernels.hpp"
#include "dcu/loss.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dcu {

enum class LearningRateSchedule { Constant, Cosine };

std::string to_string(LearningRateSchedule s);
LearningRateSchedule schedule_from_string(const std::string& name);

struct TrainConfig {
  int batch_size = 64;
  int views = 2;
  double temperature = 2.0;
  std::optional<double> lambda;  // unset: 0.01 / sqrt(batch size)
  double learning_rate = 0.1;
  LearningRateSchedule schedule = LearningRateSchedule::Cosine;
  double momentum = 0.0;
  int epochs = 10;
  std::uint64_t seed = 0;
  std::optional<KernelSpec> kernel;  // set: kernel centroids from the prior
  AugmentationSpec augmentation;
  double bit_scale = 1.0;
  int threads = 1;

  void validate() const;
  double lambda_for(int batch) const { return lambda ? *lambda : default_lambda(batch); }
};

struct EpochMetrics {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  double alignment = 0.0;       // mean over batches; NaN when V < 2
  double weak_alignment = 0.0;  // max over batches; NaN when V < 2
  double grad_norm = 0.0;       // mean over batches
  double learning_rate = 0.0;   // rate used by the epoch's first step
};

struct TrainResult {
  EncoderParams params;  // last good parameters
  std::vector<EpochMetrics> history;
  bool aborted = false;
  std::string abort_reason;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// One mini-batch: encoder inputs for n anchors x V views plus the constant
/// centroid weights when training the kernel variant.
struct BatchProblem {
  Eigen::MatrixXd inputs;  // (n*V) x input_dim, anchor-major
  int anchors = 0;
  int views = 0;
  double temperature = 2.0;
  std::optional<CentroidWeights> weights;
};

struct BatchEvaluation {
  double loss = 0.0;
  EmbeddingBatch embeddings;
  EncoderParams gradient;  // empty layers when not requested
};

/// Forward, centroids, loss and (optionally) the full parameter gradient.
BatchEvaluation evaluate_batch(const EncoderParams& params, const BatchProblem& problem,
                               bool with_gradient);

/// Builds the batch problem for the given anchor indices, drawing views from `rng`.
BatchProblem make_batch_problem(const Dataset& dataset, const PriorEmbedding* prior,
                                const TrainConfig& config, const std::vector<int>& indices,
                                std::mt19937_64& rng);

/// Mini-batch SGD on the (kernel) decoupled uniformity loss. Deterministic for a
/// given seed. A non-finite loss or gradient stops training and returns the
/// parameters from before the failing step with `aborted` set.
TrainResult train(const Dataset& dataset, const PriorEmbedding* prior, const TrainConfig& config,
                  EncoderParams init, const EpochCallback& on_epoch = {});

struct GradCheckReport {
  double max_relative_error = 0.0;
  size_t worst_parameter = 0;
  size_t parameters_checked = 0;
  double tolerance = 0.0;
  bool passed = false;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-5;
  // Relative errors use max(|analytic|, |numeric|, floor) as denominator.
  double floor = 1e-4;
  bool flip_sign = false;  // harness sanity hook: negates the analytic gradient
};

/// Central differences of the batch loss against the analytic gradient, with
/// the centroid weights and the sampled views held fixed. Passes iff the worst
/// relative error is strictly below the tolerance, so tolerance 0 always fails.
GradCheckReport finite_difference_check(const EncoderParams& params, const BatchProblem& problem,
                                        const GradCheckOptions& options = {});

/// Same check on the first min(n, batch_size) samples of `dataset`, views drawn
/// with `config.seed`.
GradCheckReport finite_difference_check(const EncoderParams& params, const Dataset& dataset,
                                        const PriorEmbedding* prior, const TrainConfig& config,
                                        const GradCheckOptions& options = {});

}  // namespace dcu
