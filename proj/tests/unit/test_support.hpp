#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>

namespace dcu_test {

inline Eigen::MatrixXd gaussian_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

inline Eigen::MatrixXd unit_rows(int rows, int cols, std::mt19937_64& rng) {
  Eigen::MatrixXd m = gaussian_matrix(rows, cols, rng);
  m.rowwise().normalize();
  return m;
}

// B B^T / cols, PSD with rank min(n, cols).
inline Eigen::MatrixXd random_psd(int n, int cols, std::mt19937_64& rng) {
  const Eigen::MatrixXd b = gaussian_matrix(n, cols, rng);
  return b * b.transpose() / cols;
}

inline Eigen::MatrixXd random_orthogonal(int d, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian_matrix(d, d, rng));
  return qr.householderQ();
}

inline double rel_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace dcu_test
