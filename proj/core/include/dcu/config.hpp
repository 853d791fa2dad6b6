#pragma once

#include "dcu/data.hpp"
#include "dcu/encoder.hpp"
#include "dcu/eval.hpp"
#include "dcu/kernels.hpp"
#include "dcu/probe.hpp"
#include "dcu/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dcu {

struct RunSection {
  std::string name = "run";
  int threads = 1;
  bool wall_clock = false;  // off keeps metrics.csv byte-stable
};

struct DatasetSection {
  std::string generator = "gaussian_mixture";  // gaussian_mixture | file
  int classes = 2;
  int per_class = 250;
  int test_per_class = 250;
  int input_dim = 16;
  int latent_dim = 0;  // 0: every coordinate varies within a class
  double separation = 4.0;
  std::uint64_t seed = 1;
  int randbits = 0;
  double bit_scale = 1.0;
  std::uint64_t bit_seed = 2;
  std::string path;       // file generator: training split
  std::string test_path;  // file generator: test split (optional)
};

struct PriorSection {
  std::string kind = "none";  // none | oracle | clean | file
  double noise = 0.0;
  bool shuffled = false;
  std::uint64_t seed = 3;
  std::string path;
  bool standardize = false;
};

struct KernelSection {
  KernelKind kind = KernelKind::Rbf;
  double sigma = 1.0;
  std::optional<double> lambda;  // unset: 0.01 / sqrt(batch)
};

struct EncoderSection {
  std::vector<int> hidden{64};
  int out_dim = 16;
  Activation activation = Activation::Tanh;
  std::vector<int> head;  // empty or {hidden, d}
  std::uint64_t init_seed = 4;
  double init_gain = 1.0;
};

struct TrainSection {
  int batch_size = 64;
  int views = 2;
  double temperature = 2.0;
  double learning_rate = 0.1;
  LearningRateSchedule schedule = LearningRateSchedule::Cosine;
  double momentum = 0.0;
  int epochs = 10;
  std::uint64_t seed = 5;
};

struct EvalSection {
  bool probe = true;
  std::uint64_t probe_seed = 0;
  double eps = 0.1;
  int m = 100;
  int knn = 10;
  int bound_views = 32;
  std::uint64_t bound_seed = 6;
  std::vector<double> sweep_noise{0.0, 0.25, 0.5, 1.0, 2.0, 4.0};
  bool sweep_shuffled = false;
  double grad_check_tolerance = 1e-5;
  double grad_check_step = 1e-5;
  double grad_check_floor = 1e-4;
  bool flip_gradient_sign = false;  // harness sanity hook
  int graph_max_samples = 2000;
};

struct ExperimentConfig {
  RunSection run;
  DatasetSection dataset;
  AugmentationSpec augmentation;
  PriorSection prior;
  KernelSection kernel;
  EncoderSection encoder;
  TrainSection train;
  EvalSection eval;

  bool uses_kernel() const { return prior.kind != "none"; }

  /// Cross-field checks; throws ConfigError naming the offending field.
  void validate() const;

  TrainConfig train_config() const;
  KernelSpec kernel_spec() const { return {kernel.kind, kernel.sigma}; }
  EncoderParams initial_encoder(int input_dim) const;
  ProbeOptions probe_options() const;

  /// Fully resolved config, defaults expanded, as pretty-printed JSON.
  std::string to_json() const;
  /// 16 hex digits derived from the resolved JSON.
  std::string run_id() const;
};

/// INI sections ([run], [dataset], ...) or, for a .json path, an object of
/// section objects. Unknown sections or keys are rejected.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_ini_config(const std::string& text);
ExperimentConfig parse_json_config(const std::string& text);

/// Train and test splits as described by the dataset section.
ProbeSplit build_split(const ExperimentConfig& config);

/// Prior rows for `train` per the prior section; nullopt for kind "none".
std::optional<PriorEmbedding> build_prior(const ExperimentConfig& config, const Dataset& train);

}  // namespace dcu
