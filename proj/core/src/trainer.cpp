#include "dcu/trainer.hpp"

#include "dcu/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace dcu {

std::string to_string(LearningRateSchedule s) {
  return s == LearningRateSchedule::Cosine ? "cosine" : "constant";
}

LearningRateSchedule schedule_from_string(const std::string& name) {
  if (name == "cosine") return LearningRateSchedule::Cosine;
  if (name == "constant") return LearningRateSchedule::Constant;
  throw std::invalid_argument("unknown schedule '" + name + "' (expected constant|cosine)");
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw std::invalid_argument("batch size must be >= 2");
  if (views < 1) throw std::invalid_argument("views must be >= 1");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (lambda && !(*lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0, 1)");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (kernel) kernel->validate();
  augmentation.validate();
}

BatchEvaluation evaluate_batch(const EncoderParams& params, const BatchProblem& problem,
                               bool with_gradient) {
  const ForwardCache cache = forward(params, problem.inputs);
  BatchEvaluation out;
  out.embeddings = EmbeddingBatch::from_rows(cache.embeddings, problem.anchors, problem.views);
  const Centroids centroids = problem.weights ? kernel_centroids(out.embeddings, *problem.weights)
                                              : view_average_centroids(out.embeddings);
  const LossReport report = decoupled_uniformity_loss(centroids, problem.temperature);
  out.loss = report.value;
  if (with_gradient) out.gradient = backward(params, cache, report.grad_views);
  return out;
}

BatchProblem make_batch_problem(const Dataset& dataset, const PriorEmbedding* prior,
                                const TrainConfig& config, const std::vector<int>& indices,
                                std::mt19937_64& rng) {
  const Dataset batch = dataset.subset(indices);
  BatchProblem problem;
  problem.anchors = batch.size();
  problem.views = config.views;
  problem.temperature = config.temperature;
  if (config.kernel) {
    if (!prior) throw std::invalid_argument("kernel mode requires a prior embedding");
    const KernelMatrix k =
        build_kernel_matrix(prior->subset(indices).vectors, *config.kernel, config.threads);
    problem.weights = centroid_weights(k, config.lambda_for(batch.size()));
  }
  problem.inputs = sample_views(batch, config.augmentation, config.views, rng)
                       .encoder_inputs(config.bit_scale);
  return problem;
}

TrainResult train(const Dataset& dataset, const PriorEmbedding* prior, const TrainConfig& config,
                  EncoderParams init, const EpochCallback& on_epoch) {
  config.validate();
  init.validate();
  if (dataset.size() < 2) throw std::invalid_argument("training needs at least 2 samples");
  if (dataset.input_dim() != init.input_dim())
    throw std::invalid_argument("dataset input width " + std::to_string(dataset.input_dim()) +
                                " does not match encoder input " + std::to_string(init.input_dim()));
  if (config.kernel && (!prior || prior->size() != dataset.size()))
    throw std::invalid_argument("kernel mode requires a prior with one row per sample");

  const int n = dataset.size();
  const int batch = std::min(config.batch_size, n);
  const int steps_per_epoch = n / batch;
  const long total_steps = static_cast<long>(steps_per_epoch) * config.epochs;

  TrainResult result;
  result.params = std::move(init);
  EncoderParams velocity = result.params.zeros_like();
  std::mt19937_64 rng(config.seed);
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  long step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochMetrics m;
    m.epoch = epoch;
    double weak = 0.0;
    for (int s = 0; s < steps_per_epoch; ++s, ++step) {
      double lr = config.learning_rate;
      if (config.schedule == LearningRateSchedule::Cosine && total_steps > 0)
        lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) /
                                    static_cast<double>(total_steps)));
      if (s == 0) m.learning_rate = lr;

      const std::vector<int> indices(order.begin() + static_cast<long>(s) * batch,
                                     order.begin() + static_cast<long>(s + 1) * batch);
      BatchEvaluation eval;
      try {
        const BatchProblem problem = make_batch_problem(dataset, prior, config, indices, rng);
        eval = evaluate_batch(result.params, problem, true);
      } catch (const NumericalError& e) {
        result.aborted = true;
        result.abort_reason = "epoch " + std::to_string(epoch) + " step " + std::to_string(s) +
                              ": " + e.what();
        return result;
      }
      const double gnorm = std::sqrt(eval.gradient.squared_norm());
      if (!std::isfinite(eval.loss) || !std::isfinite(gnorm)) {
        result.aborted = true;
        result.abort_reason = "epoch " + std::to_string(epoch) + " step " + std::to_string(s) +
                              ": non-finite loss or gradient";
        return result;
      }
      m.loss += eval.loss;
      m.grad_norm += gnorm;
      if (config.views >= 2) {
        m.alignment += alignment_metric(eval.embeddings);
        weak = std::max(weak, weak_alignment_epsilon(eval.embeddings));
      }

      if (config.momentum > 0.0) {
        velocity.axpy(config.momentum - 1.0, velocity);  // v <- momentum * v
        velocity.axpy(1.0, eval.gradient);
        result.params.axpy(-lr, velocity);
      } else {
        result.params.axpy(-lr, eval.gradient);
      }
    }
    const double steps = std::max(1, steps_per_epoch);
    m.loss /= steps;
    m.grad_norm /= steps;
    if (config.views >= 2) {
      m.alignment /= steps;
      m.weak_alignment = weak;
    } else {
      m.alignment = std::numeric_limits<double>::quiet_NaN();
      m.weak_alignment = std::numeric_limits<double>::quiet_NaN();
    }
    result.history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return result;
}

GradCheckReport finite_difference_check(const EncoderParams& params, const BatchProblem& problem,
                                        const GradCheckOptions& options) {
  GradCheckReport report;
  report.tolerance = options.tolerance;
  Eigen::VectorXd analytic = evaluate_batch(params, problem, true).gradient.flatten();
  if (options.flip_sign) analytic = -analytic;

  EncoderParams probe = params;
  const Eigen::VectorXd theta = params.flatten();
  Eigen::VectorXd shifted = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    shifted(i) = theta(i) + options.step;
    probe.assign(shifted);
    const double up = evaluate_batch(probe, problem, false).loss;
    shifted(i) = theta(i) - options.step;
    probe.assign(shifted);
    const double down = evaluate_batch(probe, problem, false).loss;
    shifted(i) = theta(i);

    const double numeric = (up - down) / (2.0 * options.step);
    const double denom = std::max({std::abs(analytic(i)), std::abs(numeric), options.floor});
    const double err = std::abs(analytic(i) - numeric) / denom;
    if (err > report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_parameter = static_cast<size_t>(i);
    }
  }
  report.parameters_checked = static_cast<size_t>(theta.size());
  report.passed = report.max_relative_error < options.tolerance;
  return report;
}

GradCheckReport finite_difference_check(const EncoderParams& params, const Dataset& dataset,
                                        const PriorEmbedding* prior, const TrainConfig& config,
                                        const GradCheckOptions& options) {
  config.validate();
  const int n = std::min(config.batch_size, dataset.size());
  std::vector<int> indices(static_cast<size_t>(n));
  std::iota(indices.begin(), indices.end(), 0);
  std::mt19937_64 rng(config.seed);
  const BatchProblem problem = make_batch_problem(dataset, prior, config, indices, rng);
  return finite_difference_check(params, problem, options);
}

}  // namespace dcu
