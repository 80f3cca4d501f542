#pragma once

// Synthetic panels with known factor structure.

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "sstate/core/simulate.hpp"
#include "sstate/factors/panel.hpp"

namespace sstate::testing {

struct PlantedPanel {
  Eigen::MatrixXd factors;   // m x T
  Eigen::MatrixXd loadings;  // q x m
  Eigen::MatrixXd data;      // q x T
};

inline Eigen::VectorXd random_walk(GaussianStream& g, Eigen::Index T) {
  Eigen::VectorXd w(T);
  double acc = 0;
  for (Eigen::Index t = 0; t < T; ++t) w[t] = acc += g();
  return w;
}

/// m orthogonalized integrated random walks, loadings with orthogonal columns of
/// equal norm, and per-series noise whose standard deviation is the signal's / snr.
inline PlantedPanel planted_irw_panel(Eigen::Index q, Eigen::Index T, Eigen::Index m, double snr, std::uint64_t seed) {
  GaussianStream g(seed);
  Eigen::MatrixXd f(m, T);
  for (Eigen::Index k = 0; k < m; ++k) {
    double level = 0, slope = 0;
    for (Eigen::Index t = 0; t < T; ++t) {
      slope += g();
      level += slope;
      f(k, t) = level;
    }
  }
  f = f.colwise() - f.rowwise().mean();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(f.transpose());
  f = (qr.householderQ() * Eigen::MatrixXd::Identity(T, m)).transpose() * std::sqrt(static_cast<double>(T));
  Eigen::MatrixXd raw(q, m);
  for (Eigen::Index i = 0; i < q; ++i)
    for (Eigen::Index k = 0; k < m; ++k) raw(i, k) = g();
  Eigen::HouseholderQR<Eigen::MatrixXd> lq(raw);
  const Eigen::MatrixXd L = (lq.householderQ() * Eigen::MatrixXd::Identity(q, m)) * std::sqrt(static_cast<double>(q));
  PlantedPanel p{f, L, L * f};
  for (Eigen::Index i = 0; i < q; ++i) {
    const Eigen::ArrayXd row = p.data.row(i).array();
    const double sd = std::sqrt((row - row.mean()).square().mean());
    for (Eigen::Index t = 0; t < T; ++t) p.data(i, t) += sd / snr * g();
  }
  return p;
}

inline std::vector<TimeSeries> rows_as_series(const Eigen::MatrixXd& data) {
  std::vector<TimeSeries> out;
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    out.emplace_back(Eigen::VectorXd(data.row(i).transpose()), YearMonth{1900, 1}, 1, "s" + std::to_string(i));
  return out;
}

/// Largest principal angle (degrees) between the row spaces of a and b.
inline double principal_angle_degrees(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  auto basis = [](const Eigen::MatrixXd& m) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m.transpose());
    return Eigen::MatrixXd(qr.householderQ() * Eigen::MatrixXd::Identity(m.cols(), m.rows()));
  };
  const Eigen::VectorXd s = Eigen::JacobiSVD<Eigen::MatrixXd>(basis(a).transpose() * basis(b)).singularValues();
  return std::acos(std::min(1.0, s.minCoeff())) * 180.0 / 3.14159265358979323846;
}

/// Ramp, smooth wiggle and a sharp logistic step at mid-sample. Series 0 loads
/// (1, 0, 2); the first two series carry the step, the rest follow ramp and wiggle.
inline Eigen::MatrixXd level_shift_panel(Eigen::Index q, Eigen::Index T, std::uint64_t seed) {
  GaussianStream g(seed);
  std::uniform_real_distribution<double> u(1.5, 2.5);
  Eigen::MatrixXd F(3, T);
  double level = 0, slope = 0;
  for (Eigen::Index t = 0; t < T; ++t) {
    const double x = static_cast<double>(t) / static_cast<double>(T);
    slope += g();
    level += slope;
    F(0, t) = 2 * x - 1;
    F(1, t) = level;
    F(2, t) = 1 / (1 + std::exp(-(x - 0.5) * 200));
  }
  const Eigen::ArrayXd w = F.row(1).array() - F.row(1).mean();
  F.row(1) = (w / std::sqrt(w.square().mean())).matrix().transpose();
  Eigen::MatrixXd L(q, 3);
  for (Eigen::Index i = 0; i < q; ++i) L.row(i) << 1 + 0.2 * g(), g(), 0.0;
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(2, q); ++i) L(i, 2) = u(g.engine());
  L.row(0) << 1, 0, 2;
  Eigen::MatrixXd Y = L * F;
  for (Eigen::Index i = 0; i < q; ++i)
    for (Eigen::Index t = 0; t < T; ++t) Y(i, t) += 0.01 * g();
  return Y;
}

}  // namespace sstate::testing
