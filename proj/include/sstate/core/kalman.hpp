#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <vector>

#include "sstate/core/errors.hpp"
#include "sstate/core/linalg.hpp"
#include "sstate/core/state_space_model.hpp"

namespace sstate {

/// Innovation covariances whose condition number exceeds this are singular.
inline constexpr double kMaxInnovationCondition = 1e12;

template <typename Scalar>
struct FilterResult {
  using Matrix = typename StateSpaceModel<Scalar>::Matrix;
  using Vector = typename StateSpaceModel<Scalar>::Vector;

  // Index t holds time t+1 (observation times are 1..T).
  std::vector<Vector> predicted_means;
  std::vector<Matrix> predicted_covs;
  std::vector<Vector> filtered_means;
  std::vector<Matrix> filtered_covs;
  // Innovations have one entry per observed component; empty when the step is missing.
  std::vector<Vector> innovations;
  std::vector<Matrix> innovation_covs;

  /// Prediction-error log-likelihood with the first `n_diffuse` observed steps excluded.
  Scalar log_likelihood = 0;
  /// Sum over every observed step, including the diffuse-initialization terms.
  Scalar full_log_likelihood = 0;
  /// Observed time steps contributing to `log_likelihood`.
  Eigen::Index n_effective = 0;
};

template <typename Scalar>
struct SmootherResult {
  using Matrix = typename StateSpaceModel<Scalar>::Matrix;
  using Vector = typename StateSpaceModel<Scalar>::Vector;

  std::vector<Vector> smoothed_means;
  std::vector<Matrix> smoothed_covs;
  /// Cov(x(t), x(t-1) | all data) for t = 1..T; entry 0 pairs x(1) with x(0).
  std::vector<Matrix> lag1_cross_covs;
  Vector initial_mean;  // E[x(0) | all data]
  Matrix initial_cov;
  FilterResult<Scalar> filter;
};

namespace detail {

template <typename Scalar>
struct StepBuffers {
  using Matrix = typename StateSpaceModel<Scalar>::Matrix;
  using Vector = typename StateSpaceModel<Scalar>::Vector;
  Vector x, x_pred;
  Matrix p, p_pred, tmp;
};

// One filter pass. When `out` is null nothing per-step is stored; the
// arithmetic is identical either way so both paths give the same likelihood.
template <typename Scalar>
void run_filter(const StateSpaceModel<Scalar>& model, const Observations<Scalar>& y,
                FilterResult<Scalar>* out, Scalar& loglik, Scalar& full_loglik, Eigen::Index& n_eff) {
  using Matrix = typename StateSpaceModel<Scalar>::Matrix;
  using Vector = typename StateSpaceModel<Scalar>::Vector;
  const Eigen::Index T = y.cols();
  const Eigen::Index p = model.state_dim();
  const Eigen::Index q = model.obs_dim();
  if (y.rows() != q) throw DimensionError("observation rows do not match the model's obs_dim");
  model.validate(T);

  const Scalar log2pi = std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
  const Matrix& phi = model.transition;
  const Matrix& Q = model.state_noise_cov;

  Vector x = model.init_mean;
  Matrix P = model.init_cov;
  Vector x_pred(p);
  Matrix P_pred(p, p);
  Eigen::Index observed_steps = 0;
  loglik = 0;
  full_loglik = 0;
  n_eff = 0;

  if (out) {
    out->predicted_means.resize(T);
    out->predicted_covs.resize(T);
    out->filtered_means.resize(T);
    out->filtered_covs.resize(T);
    out->innovations.resize(T);
    out->innovation_covs.resize(T);
  }

  std::vector<Eigen::Index> idx;
  idx.reserve(q);
  const Matrix eye = Matrix::Identity(p, p);
  Matrix work(p, p), IKA(p, p);
  Vector pa(p), k(p);

  for (Eigen::Index t = 0; t < T; ++t) {
    x_pred.noalias() = phi * x;
    work.noalias() = phi * P;
    P_pred.noalias() = work * phi.transpose();
    P_pred += Q;
    symmetrize(P_pred);

    if (q == 1 && !std::isnan(y(0, t))) {
      // Scalar observation: same recursion without the small-matrix allocations.
      const auto a = model.obs_map(t).row(0);
      const Scalar r = model.obs_noise_cov(0, 0);
      const Scalar v = y(0, t) - a.dot(x_pred);
      pa.noalias() = P_pred * a.transpose();
      const Scalar f = a.dot(pa) + r;
      if (!(f > 0) || !std::isfinite(f)) throw SingularCovarianceError(t + 1, "innovation variance is not positive");
      k = pa / f;
      x = x_pred + k * v;
      IKA = eye;
      IKA.noalias() -= k * a;
      work.noalias() = IKA * P_pred;
      P.noalias() = work * IKA.transpose();
      P.noalias() += (r * k) * k.transpose();
      symmetrize(P);
      const Scalar term = Scalar(-0.5) * (log2pi + std::log(f) + v * v / f);
      full_loglik += term;
      if (observed_steps >= model.n_diffuse) {
        loglik += term;
        ++n_eff;
      }
      ++observed_steps;
      if (out) {
        out->predicted_means[t] = x_pred;
        out->predicted_covs[t] = P_pred;
        out->innovations[t] = Vector::Constant(1, v);
        out->innovation_covs[t] = Matrix::Constant(1, 1, f);
        out->filtered_means[t] = x;
        out->filtered_covs[t] = P;
      }
      continue;
    }

    idx.clear();
    for (Eigen::Index i = 0; i < q; ++i)
      if (!std::isnan(y(i, t))) idx.push_back(i);

    if (out) {
      out->predicted_means[t] = x_pred;
      out->predicted_covs[t] = P_pred;
    }

    if (idx.empty()) {
      x = x_pred;
      P = P_pred;
      if (out) {
        out->innovations[t].resize(0);
        out->innovation_covs[t].resize(0, 0);
      }
    } else {
      const Eigen::Index n = static_cast<Eigen::Index>(idx.size());
      const Matrix& A_full = model.obs_map(t);
      Matrix A(n, p), R(n, n);
      Vector v(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        A.row(i) = A_full.row(idx[i]);
        v[i] = y(idx[i], t);
        for (Eigen::Index j = 0; j < n; ++j) R(i, j) = model.obs_noise_cov(idx[i], idx[j]);
      }
      v.noalias() -= A * x_pred;
      const Matrix PAt = P_pred * A.transpose();
      Matrix F = A * PAt;
      F += R;
      symmetrize(F);

      Scalar logdet;
      Eigen::LLT<Matrix> llt;
      if (n == 1) {
        const Scalar f = F(0, 0);
        if (!(f > 0) || !std::isfinite(f))
          throw SingularCovarianceError(t + 1, "innovation variance is not positive");
        logdet = std::log(f);
      } else {
        Eigen::SelfAdjointEigenSolver<Matrix> es(F, Eigen::EigenvaluesOnly);
        const Scalar lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
        if (!(lo > 0) || !std::isfinite(hi) || hi / lo > Scalar(kMaxInnovationCondition))
          throw SingularCovarianceError(t + 1, "condition number exceeds 1e12");
        logdet = es.eigenvalues().array().log().sum();
      }
      llt.compute(F);
      const Vector Finv_v = llt.solve(v);
      const Matrix K = llt.solve(PAt.transpose()).transpose();  // P A' F^{-1}

      x = x_pred;
      x.noalias() += K * v;
      // Joseph form: (I - K A) P (I - K A)' + K R K'
      const Matrix IKA = eye - K * A;
      P.noalias() = IKA * P_pred * IKA.transpose();
      P.noalias() += K * R * K.transpose();
      symmetrize(P);

      const Scalar term = Scalar(-0.5) * (Scalar(n) * log2pi + logdet + v.dot(Finv_v));
      full_loglik += term;
      if (observed_steps >= model.n_diffuse) {
        loglik += term;
        ++n_eff;
      }
      ++observed_steps;

      if (out) {
        out->innovations[t] = v;
        out->innovation_covs[t] = F;
      }
    }
    if (out) {
      out->filtered_means[t] = x;
      out->filtered_covs[t] = P;
    }
  }
}

}  // namespace detail

/// Kalman filter with prediction-error log-likelihood. Missing entries (NaN)
/// skip the corresponding part of the update.
template <typename Scalar>
FilterResult<Scalar> kalman_filter(const StateSpaceModel<Scalar>& model, const Observations<Scalar>& y) {
  FilterResult<Scalar> out;
  detail::run_filter(model, y, &out, out.log_likelihood, out.full_log_likelihood, out.n_effective);
  return out;
}

inline FilterResult<double> kalman_filter(const StateSpaceModel<double>& model, const TimeSeries& y) {
  return kalman_filter(model, to_observations(y));
}

template <typename Scalar>
Scalar log_likelihood(const StateSpaceModel<Scalar>& model, const Observations<Scalar>& y) {
  Scalar ll, full;
  Eigen::Index n;
  detail::run_filter<Scalar>(model, y, nullptr, ll, full, n);
  return ll;
}

inline double log_likelihood(const StateSpaceModel<double>& model, const TimeSeries& y) {
  return log_likelihood(model, to_observations(y));
}

/// Fixed-interval (Rauch-Tung-Striebel) smoother with lag-one cross covariances.
template <typename Scalar>
SmootherResult<Scalar> kalman_smoother(const StateSpaceModel<Scalar>& model, const Observations<Scalar>& y) {
  using Matrix = typename StateSpaceModel<Scalar>::Matrix;
  using Vector = typename StateSpaceModel<Scalar>::Vector;
  SmootherResult<Scalar> s;
  s.filter = kalman_filter(model, y);
  const auto& f = s.filter;
  const Eigen::Index T = y.cols();
  s.smoothed_means.resize(T);
  s.smoothed_covs.resize(T);
  s.lag1_cross_covs.resize(T);
  if (T == 0) {
    s.initial_mean = model.init_mean;
    s.initial_cov = model.init_cov;
    return s;
  }
  s.smoothed_means[T - 1] = f.filtered_means[T - 1];
  s.smoothed_covs[T - 1] = f.filtered_covs[T - 1];

  const Matrix& phi = model.transition;
  Vector x_next = s.smoothed_means[T - 1];
  Matrix P_next = s.smoothed_covs[T - 1];
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    // Filtered moments of x(t) in storage index t-1; x(0) uses the prior.
    const Vector& xf = t > 0 ? f.filtered_means[t - 1] : model.init_mean;
    const Matrix& Pf = t > 0 ? f.filtered_covs[t - 1] : model.init_cov;
    const Matrix& Pp = f.predicted_covs[t];
    // J = Pf phi' Pp^+ ; computed as (Pp^+ phi Pf)'.
    const Matrix J = Pp.completeOrthogonalDecomposition().solve(phi * Pf).transpose();
    Vector xs = xf + J * (x_next - f.predicted_means[t]);
    Matrix Ps = Pf + J * (P_next - Pp) * J.transpose();
    symmetrize(Ps);
    s.lag1_cross_covs[t] = P_next * J.transpose();
    if (t > 0) {
      s.smoothed_means[t - 1] = xs;
      s.smoothed_covs[t - 1] = Ps;
    } else {
      s.initial_mean = xs;
      s.initial_cov = Ps;
    }
    x_next = std::move(xs);
    P_next = std::move(Ps);
  }
  return s;
}

inline SmootherResult<double> kalman_smoother(const StateSpaceModel<double>& model, const TimeSeries& y) {
  return kalman_smoother(model, to_observations(y));
}

}  // namespace sstate
