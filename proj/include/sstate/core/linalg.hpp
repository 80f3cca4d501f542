#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "sstate/core/errors.hpp"

namespace sstate {

template <typename Derived>
void symmetrize(Eigen::MatrixBase<Derived>& m) {
  m = (0.5 * (m + m.transpose())).eval();
}

template <typename Derived>
typename Derived::Scalar max_asymmetry(const Eigen::MatrixBase<Derived>& m) {
  if (m.size() == 0) return 0;
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

/// Symmetric PSD test: smallest eigenvalue >= -1e-10 * trace.
template <typename Derived>
bool is_psd(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (m.rows() != m.cols()) return false;
  if (m.size() == 0) return true;
  if (!m.allFinite()) return false;
  const Matrix sym = 0.5 * (m + m.transpose());
  if (max_asymmetry(m) > Scalar(1e-8) * (Scalar(1) + m.cwiseAbs().maxCoeff())) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  const Scalar tol = Scalar(1e-10) * std::abs(sym.trace());
  return es.eigenvalues().minCoeff() >= -tol;
}

/// Symmetric square root factor L with L L' = m for a PSD matrix (negative
/// eigenvalues from roundoff are clipped).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> psd_factor(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& m) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (m.size() == 0) return m;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  return es.eigenvectors() * es.eigenvalues().cwiseMax(Scalar(0)).cwiseSqrt().asDiagonal();
}

/// Inverse symmetric square root of a positive definite matrix.
inline Eigen::MatrixXd inverse_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd w = es.eigenvalues();
  if (w.minCoeff() <= 0) throw InvalidArgument("inverse_sqrt: matrix is not positive definite");
  return es.eigenvectors() * w.cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

/// Solves P = T P T' + Q for the stationary covariance of x_t = T x_{t-1} + w_t.
/// Throws when T has an eigenvalue on or outside the unit circle.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> stationary_covariance(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& transition,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& noise_cov) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index n = transition.rows();
  Eigen::ComplexEigenSolver<Matrix> ces(transition, false);
  if (n > 0 && ces.eigenvalues().cwiseAbs().maxCoeff() >= Scalar(1))
    throw InvalidArgument("stationary_covariance: transition is not stable");
  // vec(P) = (I - T kron T)^{-1} vec(Q)
  Matrix kron(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) kron.block(i * n, j * n, n, n) = transition(i, j) * transition;
  const Matrix lhs = Matrix::Identity(n * n, n * n) - kron;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> vq = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(
      noise_cov.data(), n * n);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> vp = lhs.partialPivLu().solve(vq);
  Matrix p = Eigen::Map<Matrix>(vp.data(), n, n);
  return 0.5 * (p + p.transpose());
}

}  // namespace sstate
