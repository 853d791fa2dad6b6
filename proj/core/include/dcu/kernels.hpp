#pragma once

#include <Eigen/Dense>

#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace dcu {

enum class KernelKind { Rbf, Cosine, Linear };

std::string to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& name);

/// Kernel on prior vectors z(x).
///
/// RBF convention: k(z, z') = exp(-||z - z'||^2 / (2 sigma^2)). A bandwidth
/// quoted under the exp(-||z - z'||^2 / sigma^2) convention maps to
/// sigma / sqrt(2) here.
struct KernelSpec {
  KernelKind kind = KernelKind::Rbf;
  double bandwidth = 1.0;  // sigma, RBF only

  void validate() const;
  double operator()(const Eigen::Ref<const Eigen::VectorXd>& a,
                    const Eigen::Ref<const Eigen::VectorXd>& b) const;
};

/// Symmetric PSD Gram matrix over the original samples of a batch.
///
/// The minimal eigenvalue is computed on first request and cached; the cache is
/// shared between copies and guarded so concurrent readers are safe.
class KernelMatrix {
 public:
  static constexpr int kMaxSpectralSize = 2048;

  /// Validates symmetry (|K_ij - K_ji| <= 1e-12) and finiteness.
  explicit KernelMatrix(Eigen::MatrixXd entries);

  int size() const { return static_cast<int>(entries_.rows()); }
  const Eigen::MatrixXd& entries() const { return entries_; }
  double operator()(int i, int j) const { return entries_(i, j); }

  /// Smallest eigenvalue via a symmetric eigensolver. Throws for n > 2048.
  double min_eigenvalue() const;

 private:
  struct SpectralCache {
    std::once_flag once;
    double min_eigenvalue = 0.0;
  };
  Eigen::MatrixXd entries_;
  std::shared_ptr<SpectralCache> cache_;
};

/// K_ij = kernel(z_i, z_j) over the rows of `priors`. Rows are assembled
/// independently, so any `threads` value produces bit-identical output.
KernelMatrix build_kernel_matrix(const Eigen::MatrixXd& priors, const KernelSpec& spec,
                                 int threads = 1);

/// A = (K + n*lambda*I)^{-1} K, the centroid-estimation weights.
struct CentroidWeights {
  Eigen::MatrixXd weights;
  double lambda = 0.0;

  int size() const { return static_cast<int>(weights.rows()); }
};

/// Cholesky solve of (K + n lambda I) A = K, falling back to a clipped
/// eigendecomposition when the factorization fails. lambda = 0 needs an
/// invertible K (min eigenvalue > 1e-10).
CentroidWeights centroid_weights(const KernelMatrix& kernel, double lambda);

/// Default regularization 0.01 / sqrt(n).
double default_lambda(int batch_size);

/// K_ii + K_jj - 2 K_ij.
double kernel_distance(const KernelMatrix& kernel, int i, int j);

/// (lambda_min(K) / sqrt(n) + sqrt(n) lambda)^{-1}.
double beta_n(const KernelMatrix& kernel, double lambda);

/// sqrt(n) * ||(K + n lambda I)^{-1}||_2 computed from the spectrum of the
/// regularized resolvent; equal to beta_n for symmetric PSD K.
double beta_n_spectral(const KernelMatrix& kernel, double lambda);

}  // namespace dcu
