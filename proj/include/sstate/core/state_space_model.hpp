#pragma once

#include <Eigen/Dense>

#include <limits>
#include <string>
#include <vector>

#include "sstate/core/errors.hpp"
#include "sstate/core/linalg.hpp"
#include "sstate/core/time_series.hpp"

namespace sstate {

/// Linear Gaussian state-space system
///
///   y(t) = A(t) x(t) + v(t),   v(t) ~ N(0, R)
///   x(t) = Phi x(t-1) + w(t),  w(t) ~ N(0, Q)
///   x(0) ~ N(mu, Sigma),       t = 1..T.
///
/// `obs_maps` holds either a single matrix (time invariant) or one matrix per
/// observation time. The first `n_diffuse` likelihood contributions are
/// treated as initialization terms for diffuse (large-variance) states.
template <typename Scalar>
struct StateSpaceModel {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::vector<Matrix> obs_maps;
  Matrix transition;
  Matrix state_noise_cov;
  Matrix obs_noise_cov;
  Vector init_mean;
  Matrix init_cov;
  Eigen::Index n_diffuse = 0;

  Eigen::Index state_dim() const { return transition.rows(); }
  Eigen::Index obs_dim() const { return obs_noise_cov.rows(); }
  bool time_varying() const { return obs_maps.size() > 1; }

  const Matrix& obs_map(Eigen::Index t) const {
    return obs_maps.size() == 1 ? obs_maps.front() : obs_maps[static_cast<std::size_t>(t)];
  }

  /// Checks dimensions and PSD-ness of the covariances. `length` is the number
  /// of observation times the model is about to be used with (or -1).
  void validate(Eigen::Index length = -1) const {
    const Eigen::Index p = state_dim(), q = obs_dim();
    if (transition.cols() != p) throw DimensionError("transition must be square");
    if (state_noise_cov.rows() != p || state_noise_cov.cols() != p)
      throw DimensionError("state noise covariance must be p x p");
    if (obs_noise_cov.cols() != q) throw DimensionError("observation noise covariance must be square");
    if (init_mean.size() != p) throw DimensionError("initial mean must have length p");
    if (init_cov.rows() != p || init_cov.cols() != p) throw DimensionError("initial covariance must be p x p");
    if (obs_maps.empty()) throw DimensionError("observation map missing");
    for (const auto& a : obs_maps)
      if (a.rows() != q || a.cols() != p) throw DimensionError("observation map must be q x p");
    if (time_varying() && length >= 0 && static_cast<Eigen::Index>(obs_maps.size()) != length)
      throw DimensionError("time-varying observation map needs one entry per observation time");
    if (n_diffuse < 0 || n_diffuse > p) throw DimensionError("n_diffuse out of range");
    if (!is_psd(state_noise_cov)) throw InvalidArgument("state noise covariance Q is not PSD");
    if (!is_psd(obs_noise_cov)) throw InvalidArgument("observation noise covariance R is not PSD");
    if (!is_psd(init_cov)) throw InvalidArgument("initial covariance Sigma is not PSD");
  }
};

/// Observations as a q x T matrix; NaN entries are missing.
template <typename Scalar>
using Observations = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

inline Observations<double> to_observations(const TimeSeries& y) {
  y.validate();
  Observations<double> obs(1, y.size());
  for (Eigen::Index t = 0; t < y.size(); ++t)
    obs(0, t) = y.missing[t] ? std::numeric_limits<double>::quiet_NaN() : y.values[t];
  return obs;
}

}  // namespace sstate
