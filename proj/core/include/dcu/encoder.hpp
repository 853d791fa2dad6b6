#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace dcu {

enum class Activation { ReLU, Tanh };

std::string to_string(Activation act);
Activation activation_from_string(const std::string& name);

/// Affine map y = W x + b; W is out x in.
struct DenseLayer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;

  int in_dim() const { return static_cast<int>(weight.cols()); }
  int out_dim() const { return static_cast<int>(weight.rows()); }
};

/// MLP backbone with an optional 2-layer projection head, followed by an exact
/// projection onto the unit sphere.
///
///   backbone: Linear (act Linear)*        layer_dims = {in, h1, ..., rep}
///   head:     act Linear act Linear       head_dims  = {hidden, d} or empty
///   output:   z / ||z||
struct EncoderParams {
  std::vector<int> layer_dims;
  std::vector<int> head_dims;
  Activation activation = Activation::Tanh;
  std::vector<DenseLayer> backbone;
  std::vector<DenseLayer> head;

  /// Glorot-uniform weights scaled by `gain`, zero biases.
  static EncoderParams init(std::vector<int> layer_dims, Activation activation,
                            std::vector<int> head_dims, std::uint64_t seed, double gain = 1.0);

  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return head_dims.empty() ? layer_dims.back() : head_dims.back(); }
  size_t parameter_count() const;

  /// All weights then biases, layer by layer (backbone first).
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);

  void validate() const;

  /// p += scale * g for same-shaped parameter sets.
  void axpy(double scale, const EncoderParams& g);
  EncoderParams zeros_like() const;
  double squared_norm() const;

  friend bool operator==(const EncoderParams& a, const EncoderParams& b);
};

/// Activations saved by forward() for backward().
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;       // input of every dense layer (rows = samples)
  std::vector<Eigen::MatrixXd> preacts;      // output of every dense layer
  Eigen::VectorXd norms;                     // ||z|| per sample
  Eigen::MatrixXd embeddings;                // z / ||z||
};

/// Unit-norm embeddings for every input row. Throws NumericalError naming the
/// first sample whose pre-normalization norm is below 1e-12.
ForwardCache forward(const EncoderParams& params, const Eigen::MatrixXd& inputs);

/// Embeddings only.
Eigen::MatrixXd embed(const EncoderParams& params, const Eigen::MatrixXd& inputs);

/// Representation used by the linear probe: the backbone output when a head
/// is present, otherwise the normalized embedding.
Eigen::MatrixXd represent(const EncoderParams& params, const Eigen::MatrixXd& inputs);

/// Gradient of a scalar loss w.r.t. all parameters given dL/d(embedding).
/// The normalization Jacobian (I - u u^T) / ||z|| removes radial components.
EncoderParams backward(const EncoderParams& params, const ForwardCache& cache,
                       const Eigen::MatrixXd& grad_embeddings);

/// Versioned text checkpoint; doubles use shortest round-trip formatting so
/// save -> load -> save is byte-identical.
void save_checkpoint(const EncoderParams& params, std::ostream& os);
void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path);
EncoderParams load_checkpoint(std::istream& is);
EncoderParams load_checkpoint(const std::filesystem::path& path);

}  // namespace dcu
