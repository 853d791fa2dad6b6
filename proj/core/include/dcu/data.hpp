#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace dcu {

/// Original samples x_bar, optional labels and optional view-invariant bit
/// channels. Bits are kept apart from `samples`: augmentations never touch
/// them, and they are appended to the encoder input scaled by `bit_scale`.
struct Dataset {
  Eigen::MatrixXd samples;             // n x p
  std::vector<int> labels;             // empty when unlabeled
  Eigen::MatrixXd bits;                // n x k, entries in {0, 1}; k may be 0
  std::string generator = "custom";
  std::uint64_t seed = 0;

  int size() const { return static_cast<int>(samples.rows()); }
  int feature_dim() const { return static_cast<int>(samples.cols()); }
  int bit_count() const { return static_cast<int>(bits.cols()); }
  bool labeled() const { return !labels.empty(); }
  int input_dim() const { return feature_dim() + bit_count(); }
  int num_classes() const;

  /// [samples | bit_scale * bits].
  Eigen::MatrixXd encoder_inputs(double bit_scale = 1.0) const;
  Dataset subset(const std::vector<int>& indices) const;
  void validate() const;
};

/// C unit-variance Gaussian clusters with means separation * e_c. Requires
/// input_dim >= C so the means are orthogonal. Class means do not depend on the
/// seed, so train and test splits drawn with different seeds share them.
///
/// With 0 < latent_dim < input_dim the clusters only vary in the first
/// latent_dim coordinates; the rest are exactly 0 and carry nothing but what an
/// augmentation puts there. 0 means latent_dim = input_dim.
Dataset make_gaussian_mixture(int classes, int per_class, int input_dim, double separation,
                              std::uint64_t seed, int latent_dim = 0);

/// Attaches an independent uniformly random k-bit pattern to every sample.
Dataset make_randbits(const Dataset& base, int k_bits, std::uint64_t seed);

enum class AugmentationKind { UniformBall, GaussianTruncated, MaskOneCoordinate };

std::string to_string(AugmentationKind kind);
AugmentationKind augmentation_kind_from_string(const std::string& name);

/// Augmentation with a known support:
///   UniformBall(r)       uniform in the closed ball of radius r around x_bar;
///   GaussianTruncated(r) N(0, (r / (2 sqrt p))^2 I) noise conditioned on ||noise|| <= r;
///   MaskOneCoordinate    one uniformly chosen coordinate set to 0.
/// Bit channels are never perturbed.
struct AugmentationSpec {
  AugmentationKind kind = AugmentationKind::UniformBall;
  double radius = 1.0;
  bool bit_preserving = true;

  void validate() const;
};

/// V views per anchor, anchor-major (row a*V + v).
struct ViewBatch {
  Eigen::MatrixXd features;  // (n*V) x p
  Eigen::MatrixXd bits;      // (n*V) x k
  int anchors = 0;
  int views = 0;

  int anchor_of(int row) const { return row / views; }
  Eigen::MatrixXd encoder_inputs(double bit_scale = 1.0) const;
};

ViewBatch sample_views(const Dataset& dataset, const AugmentationSpec& aug, int views,
                       std::mt19937_64& rng);
ViewBatch sample_views(const Dataset& dataset, const AugmentationSpec& aug, int views,
                       std::uint64_t seed);

/// Applies one draw of the augmentation to a single sample.
Eigen::VectorXd augment(const Eigen::VectorXd& sample, const AugmentationSpec& aug,
                        std::mt19937_64& rng);

/// True iff supp A(.|a) and supp A(.|b) intersect (feature part only).
bool supports_overlap(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                      const AugmentationSpec& aug);

enum class PriorSource { Oracle, Shuffled, File, CleanFeatures };

/// z(x_bar) for every sample, row-aligned with the dataset.
struct PriorEmbedding {
  Eigen::MatrixXd vectors;  // n x q
  PriorSource source = PriorSource::Oracle;
  double noise = 0.0;

  int size() const { return static_cast<int>(vectors.rows()); }
  PriorEmbedding subset(const std::vector<int>& indices) const;
};

/// one_hot(y) + noise * N(0, I). With `shuffled`, the one-hot codes use a
/// random permutation of the labels, giving a prior with no class signal.
PriorEmbedding oracle_prior(const Dataset& dataset, double noise, std::uint64_t seed,
                            bool shuffled = false);

/// The raw features without bit channels.
PriorEmbedding clean_feature_prior(const Dataset& dataset);

/// Per-column zero mean / unit variance (constant columns are only centered).
void standardize(PriorEmbedding& prior);

/// Headered CSV: "index,z0,z1,..."; rows may come in any order but the
/// indices must be a permutation of 0..n-1.
PriorEmbedding load_prior(const std::filesystem::path& path);
void save_prior(const PriorEmbedding& prior, const std::filesystem::path& path);

/// Headered CSV: "index,x0..x{p-1}[,label][,bit:0..bit:{k-1}]".
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

}  // namespace dcu
