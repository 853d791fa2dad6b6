#include "dcu/kernels.hpp"

#include "dcu/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>
#include <vector>

namespace dcu {

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::Rbf: return "rbf";
    case KernelKind::Cosine: return "cosine";
    case KernelKind::Linear: return "linear";
  }
  return "unknown";
}

KernelKind kernel_kind_from_string(const std::string& name) {
  if (name == "rbf" || name == "gaussian") return KernelKind::Rbf;
  if (name == "cosine") return KernelKind::Cosine;
  if (name == "linear") return KernelKind::Linear;
  throw std::invalid_argument("unknown kernel kind '" + name + "' (expected rbf|cosine|linear)");
}

void KernelSpec::validate() const {
  if (kind == KernelKind::Rbf && !(bandwidth > 0.0 && std::isfinite(bandwidth)))
    throw std::invalid_argument("RBF bandwidth must be a positive finite number");
}

double KernelSpec::operator()(const Eigen::Ref<const Eigen::VectorXd>& a,
                              const Eigen::Ref<const Eigen::VectorXd>& b) const {
  switch (kind) {
    case KernelKind::Rbf:
      return std::exp(-(a - b).squaredNorm() / (2.0 * bandwidth * bandwidth));
    case KernelKind::Cosine:
      return a.dot(b) / (a.norm() * b.norm());
    case KernelKind::Linear:
      return a.dot(b);
  }
  return 0.0;
}

KernelMatrix::KernelMatrix(Eigen::MatrixXd entries)
    : entries_(std::move(entries)), cache_(std::make_shared<SpectralCache>()) {
  if (entries_.rows() != entries_.cols())
    throw std::invalid_argument("kernel matrix must be square");
  if (!entries_.allFinite()) throw NumericalError("kernel matrix has non-finite entries");
  const Eigen::Index n = entries_.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (std::abs(entries_(i, j) - entries_(j, i)) > 1e-12)
        throw std::invalid_argument("kernel matrix is not symmetric at (" + std::to_string(i) +
                                    ", " + std::to_string(j) + ")");
}

double KernelMatrix::min_eigenvalue() const {
  if (size() > kMaxSpectralSize)
    throw std::invalid_argument("kernel matrix of size " + std::to_string(size()) +
                                " exceeds the spectral size limit " +
                                std::to_string(kMaxSpectralSize));
  std::call_once(cache_->once, [this] {
    if (entries_.rows() == 0) {
      cache_->min_eigenvalue = 0.0;
      return;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(entries_, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericalError("eigensolver did not converge");
    cache_->min_eigenvalue = solver.eigenvalues().minCoeff();
  });
  return cache_->min_eigenvalue;
}

KernelMatrix build_kernel_matrix(const Eigen::MatrixXd& priors, const KernelSpec& spec,
                                 int threads) {
  spec.validate();
  const Eigen::Index n = priors.rows();
  if (n < 2) throw std::invalid_argument("kernel matrix needs at least 2 samples");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!priors.row(i).allFinite())
      throw std::invalid_argument("prior row " + std::to_string(i) + " has non-finite entries");
    if (spec.kind == KernelKind::Cosine && priors.row(i).squaredNorm() == 0.0)
      throw std::invalid_argument("cosine kernel: prior row " + std::to_string(i) +
                                  " has zero norm");
  }

  Eigen::MatrixXd k(n, n);
  auto fill_rows = [&](Eigen::Index begin, Eigen::Index end) {
    for (Eigen::Index i = begin; i < end; ++i) {
      const Eigen::VectorXd zi = priors.row(i).transpose();
      for (Eigen::Index j = i; j < n; ++j) {
        const double v = spec(zi, priors.row(j).transpose());
        k(i, j) = v;
        k(j, i) = v;
      }
    }
  };

  threads = std::max(1, threads);
  if (threads == 1 || n < 64) {
    fill_rows(0, n);
  } else {
    // Each (i, j) entry is written by exactly one worker: rows are
    // interleaved so the upper triangle splits evenly.
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (Eigen::Index i = t; i < n; i += threads) fill_rows(i, i + 1);
      });
    }
    for (auto& th : pool) th.join();
  }
  if (spec.kind != KernelKind::Linear) k.diagonal().setOnes();
  return KernelMatrix(std::move(k));
}

double default_lambda(int batch_size) {
  if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
  return 0.01 / std::sqrt(static_cast<double>(batch_size));
}

CentroidWeights centroid_weights(const KernelMatrix& kernel, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("lambda must be a finite non-negative number");
  const int n = kernel.size();
  const Eigen::MatrixXd& k = kernel.entries();
  if (lambda == 0.0 && kernel.min_eigenvalue() <= 1e-10)
    throw NumericalError(
        "kernel matrix is singular (min eigenvalue " + std::to_string(kernel.min_eigenvalue()) +
        "); use a positive lambda");

  Eigen::MatrixXd system = k;
  system.diagonal().array() += static_cast<double>(n) * lambda;

  CentroidWeights out;
  out.lambda = lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() == Eigen::Success) {
    out.weights = llt.solve(k);
  } else {
    // PSD-up-to-noise Gram matrices (duplicate priors) land here.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
    if (eig.info() != Eigen::Success) throw NumericalError("eigensolver did not converge");
    const Eigen::VectorXd s = eig.eigenvalues();
    Eigen::VectorXd ratio(n);
    for (int i = 0; i < n; ++i) {
      const double denom = std::max(s(i) + n * lambda, 1e-12);
      ratio(i) = std::max(s(i), 0.0) / denom;
    }
    out.weights = eig.eigenvectors() * ratio.asDiagonal() * eig.eigenvectors().transpose();
  }
  if (!out.weights.allFinite()) throw NumericalError("centroid weights are not finite");
  return out;
}

double kernel_distance(const KernelMatrix& kernel, int i, int j) {
  const int n = kernel.size();
  if (i < 0 || j < 0 || i >= n || j >= n) throw std::out_of_range("kernel_distance: bad index");
  return kernel(i, i) + kernel(j, j) - 2.0 * kernel(i, j);
}

double beta_n(const KernelMatrix& kernel, double lambda) {
  const double n = kernel.size();
  const double lmin = kernel.min_eigenvalue();
  const double shifted = lmin + n * lambda;
  if (!(shifted > 0.0))
    throw NumericalError("beta_n undefined: lambda_min + n*lambda = " + std::to_string(shifted));
  return 1.0 / (lmin / std::sqrt(n) + std::sqrt(n) * lambda);
}

double beta_n_spectral(const KernelMatrix& kernel, double lambda) {
  const int n = kernel.size();
  if (n > KernelMatrix::kMaxSpectralSize)
    throw std::invalid_argument("beta_n_spectral: matrix too large");
  Eigen::MatrixXd system = kernel.entries();
  system.diagonal().array() += n * lambda;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
  const Eigen::MatrixXd resolvent = lu.inverse();
  if (!resolvent.allFinite()) throw NumericalError("beta_n_spectral: singular system");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(resolvent);
  return std::sqrt(static_cast<double>(n)) * svd.singularValues()(0);
}

}  // namespace dcu
