#pragma once

// Independent brute-force references used by the tests. Nothing here calls the
// recursive algorithms it is used to check.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "sstate/core/state_space_model.hpp"
#include "sstate/regime/msar.hpp"

namespace sstate::testing {

/// Joint Gaussian of (x(0), x(1), ..., x(T), y(1), ..., y(T)) built directly
/// from the model equations, conditioned by dense linear algebra.
struct DenseGaussianOracle {
  Eigen::Index p = 0, q = 0, T = 0;
  Eigen::VectorXd state_mean;  // p(T+1)
  Eigen::MatrixXd state_cov;   // p(T+1) x p(T+1)
  Eigen::VectorXd obs_mean;    // qT
  Eigen::MatrixXd obs_cov;     // qT x qT
  Eigen::MatrixXd state_obs_cov;

  DenseGaussianOracle(const StateSpaceModel<double>& m, Eigen::Index length) : p(m.state_dim()), q(m.obs_dim()), T(length) {
    const Eigen::Index ns = p * (T + 1);
    state_mean.resize(ns);
    state_cov.resize(ns, ns);
    std::vector<Eigen::MatrixXd> var(T + 1);
    std::vector<Eigen::VectorXd> mean(T + 1);
    var[0] = m.init_cov;
    mean[0] = m.init_mean;
    for (Eigen::Index t = 1; t <= T; ++t) {
      var[t] = m.transition * var[t - 1] * m.transition.transpose() + m.state_noise_cov;
      mean[t] = m.transition * mean[t - 1];
    }
    for (Eigen::Index s = 0; s <= T; ++s) {
      state_mean.segment(s * p, p) = mean[s];
      Eigen::MatrixXd power = Eigen::MatrixXd::Identity(p, p);
      for (Eigen::Index t = s; t <= T; ++t) {
        // Cov(x_t, x_s) = Phi^{t-s} Var(x_s)
        const Eigen::MatrixXd c = power * var[s];
        state_cov.block(t * p, s * p, p, p) = c;
        state_cov.block(s * p, t * p, p, p) = c.transpose();
        power = m.transition * power;
      }
    }
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(q * T, ns);
    for (Eigen::Index t = 1; t <= T; ++t) H.block((t - 1) * q, t * p, q, p) = m.obs_map(t - 1);
    obs_mean = H * state_mean;
    obs_cov = H * state_cov * H.transpose();
    for (Eigen::Index t = 0; t < T; ++t) obs_cov.block(t * q, t * q, q, q) += m.obs_noise_cov;
    state_obs_cov = state_cov * H.transpose();
  }

  /// Indices into the stacked observation vector that are observed up to time `upto`.
  std::vector<Eigen::Index> observed(const Eigen::MatrixXd& y, Eigen::Index upto) const {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index t = 0; t < upto; ++t)
      for (Eigen::Index i = 0; i < q; ++i)
        if (!std::isnan(y(i, t))) idx.push_back(t * q + i);
    return idx;
  }

  /// E[x(t) | y(1..upto)] for t = 0..T, stacked.
  Eigen::VectorXd conditional_mean(const Eigen::MatrixXd& y, Eigen::Index upto) const {
    const auto idx = observed(y, upto);
    if (idx.empty()) return state_mean;
    const Eigen::Index n = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd Cyy(n, n), Cxy(state_mean.size(), n);
    Eigen::VectorXd r(n);
    for (Eigen::Index a = 0; a < n; ++a) {
      r[a] = y(idx[a] % q, idx[a] / q) - obs_mean[idx[a]];
      Cxy.col(a) = state_obs_cov.col(idx[a]);
      for (Eigen::Index b = 0; b < n; ++b) Cyy(a, b) = obs_cov(idx[a], idx[b]);
    }
    return state_mean + Cxy * Cyy.ldlt().solve(r);
  }

  Eigen::MatrixXd conditional_cov(const Eigen::MatrixXd& y, Eigen::Index upto) const {
    const auto idx = observed(y, upto);
    if (idx.empty()) return state_cov;
    const Eigen::Index n = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd Cyy(n, n), Cxy(state_mean.size(), n);
    for (Eigen::Index a = 0; a < n; ++a) {
      Cxy.col(a) = state_obs_cov.col(idx[a]);
      for (Eigen::Index b = 0; b < n; ++b) Cyy(a, b) = obs_cov(idx[a], idx[b]);
    }
    return state_cov - Cxy * Cyy.ldlt().solve(Cxy.transpose());
  }

  double log_density(const Eigen::MatrixXd& y) const {
    const auto idx = observed(y, T);
    const Eigen::Index n = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd C(n, n);
    Eigen::VectorXd r(n);
    for (Eigen::Index a = 0; a < n; ++a) {
      r[a] = y(idx[a] % q, idx[a] / q) - obs_mean[idx[a]];
      for (Eigen::Index b = 0; b < n; ++b) C(a, b) = obs_cov(idx[a], idx[b]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(C);
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return -0.5 * (n * std::log(2 * std::numbers::pi) + logdet + r.dot(llt.solve(r)));
  }
};

/// Random stable system with p states and q observations.
inline StateSpaceModel<double> random_stable_model(std::mt19937_64& rng, Eigen::Index p, Eigen::Index q,
                                                   bool time_varying = false, Eigen::Index T = 0) {
  std::normal_distribution<double> n01;
  auto randm = [&](Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n01(rng);
    return m;
  };
  StateSpaceModel<double> m;
  Eigen::MatrixXd phi = randm(p, p);
  Eigen::ComplexEigenSolver<Eigen::MatrixXd> ces(phi, false);
  const double radius = ces.eigenvalues().cwiseAbs().maxCoeff();
  std::uniform_real_distribution<double> u(0.3, 0.95);
  m.transition = phi * (u(rng) / radius);
  Eigen::MatrixXd b = randm(p, p);
  m.state_noise_cov = b * b.transpose() * 0.3 + 0.05 * Eigen::MatrixXd::Identity(p, p);
  Eigen::MatrixXd c = randm(q, q);
  m.obs_noise_cov = c * c.transpose() * 0.2 + 0.1 * Eigen::MatrixXd::Identity(q, q);
  m.init_mean = randm(p, 1);
  Eigen::MatrixXd d = randm(p, p);
  m.init_cov = d * d.transpose() * 0.5 + 0.1 * Eigen::MatrixXd::Identity(p, p);
  if (time_varying) {
    for (Eigen::Index t = 0; t < T; ++t) m.obs_maps.push_back(randm(q, p));
  } else {
    m.obs_maps.push_back(randm(q, p));
  }
  return m;
}

/// Exhaustive sum over all 2^T regime paths of an MSAR(2) model.
struct MsarEnumeration {
  double log_likelihood = 0.0;
  Eigen::MatrixXd filtered;  // T x 2, P(s_t | y_1..y_t)
  Eigen::MatrixXd smoothed;  // T x 2, P(s_t | y_1..y_T)
};

inline MsarEnumeration enumerate_msar(const regime::MsarSpec& spec, const Eigen::VectorXd& y) {
  const Eigen::Index T = y.size();
  Eigen::Vector2d pi0;
  if (spec.start_probs) {
    pi0 = *spec.start_probs;
  } else {
    const double a = spec.transition(0, 1), b = spec.transition(1, 0);
    pi0 = a + b > 0 ? Eigen::Vector2d(b / (a + b), a / (a + b)) : Eigen::Vector2d(0.5, 0.5);
  }
  auto density = [&](Eigen::Index t, int s) {
    const auto& r = spec.regimes[s];
    const double mean = r.mean + r.ar[0] * (y[t - 1] - r.mean) + r.ar[1] * (y[t - 2] - r.mean);
    const double e = y[t] - mean;
    return std::exp(-e * e / (2 * r.variance)) / std::sqrt(2 * std::numbers::pi * r.variance);
  };
  // Weight of each path restricted to the first n steps.
  auto prefix_marginals = [&](Eigen::Index n, Eigen::MatrixXd* all, double* total) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, 2);
    double z = 0;
    for (long code = 0; code < (1L << n); ++code) {
      double w = 1;
      int prev = -1;
      for (Eigen::Index t = 0; t < n; ++t) {
        const int s = static_cast<int>((code >> t) & 1);
        w *= prev < 0 ? pi0[s] : spec.transition(prev, s);
        if (t >= 2) w *= density(t, s);
        prev = s;
      }
      z += w;
      for (Eigen::Index t = 0; t < n; ++t) m(t, (code >> t) & 1) += w;
    }
    if (all) *all = m / z;
    if (total) *total = z;
  };
  MsarEnumeration out;
  double z = 0;
  prefix_marginals(T, &out.smoothed, &z);
  out.log_likelihood = std::log(z);
  out.filtered.resize(T, 2);
  for (Eigen::Index n = 1; n <= T; ++n) {
    Eigen::MatrixXd m;
    prefix_marginals(n, &m, nullptr);
    out.filtered.row(n - 1) = m.row(n - 1);
  }
  return out;
}

}  // namespace sstate::testing
