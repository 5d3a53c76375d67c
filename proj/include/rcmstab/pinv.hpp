#pragma once

#include <algorithm>

#include <Eigen/Dense>

namespace rcmstab {

inline constexpr double kPinvRelTol = 1e-8;

/// Moore-Penrose pseudoinverse by SVD. Singular values at or below
/// rel_tol * max(sigma_max, sigma_ref) are treated as zero, so rank-deficient
/// inputs yield the minimum-norm solution. `sigma_ref` lets callers anchor the
/// cutoff to the scale of an undamped parent matrix (see the bilevel split).
inline Eigen::MatrixXd pinv(const Eigen::MatrixXd& a, double rel_tol = kPinvRelTol,
                            double sigma_ref = 0.0) {
  if (a.rows() == 0 || a.cols() == 0) {
    return Eigen::MatrixXd::Zero(a.cols(), a.rows());
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double cutoff = rel_tol * std::max(s(0), sigma_ref);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

inline double max_singular_value(const Eigen::MatrixXd& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  return Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues()(0);
}

}  // namespace rcmstab
