#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sstate/core/time_series.hpp"

namespace sstate::regime {

/// Regime 0 is "High", regime 1 is "Low".
struct MsarRegime {
  double mean = 0.0;
  Eigen::Vector2d ar = Eigen::Vector2d::Zero();
  double variance = 1.0;
};

/// Two-regime Markov-switching AR(2). The regime active at t sets the mean, AR
/// coefficients and innovation variance of y_t given y_{t-1}, y_{t-2}:
///   y_t - mu_s = phi_s1 (y_{t-1} - mu_s) + phi_s2 (y_{t-2} - mu_s) + e_t,  e_t ~ N(0, sigma_s^2).
struct MsarSpec {
  std::array<MsarRegime, 2> regimes;
  /// Row-stochastic; transition(i, j) = P(s_t = j | s_{t-1} = i).
  Eigen::Matrix2d transition = (Eigen::Matrix2d() << 0.9, 0.1, 0.1, 0.9).finished();
  /// Regime probabilities at the first observation; stationary distribution when unset.
  std::optional<Eigen::Vector2d> start_probs;

  void validate() const;
  Eigen::Vector2d initial_probs() const;
};

/// Stationary distribution of a 2x2 row-stochastic matrix (uniform when it is not unique).
Eigen::Vector2d stationary_distribution(const Eigen::Matrix2d& transition);

struct FilterOutput {
  /// T x 2; rows sum to one.
  Eigen::MatrixX2d filtered_probs;
  /// One-step-ahead regime probabilities, T x 2.
  Eigen::MatrixX2d predicted_probs;
  double log_likelihood = 0.0;
};

FilterOutput hamilton_filter(const MsarSpec& spec, const TimeSeries& y);
Eigen::MatrixX2d msar_smooth(const MsarSpec& spec, const TimeSeries& y);

/// Asymptotic standard errors in natural parameters; NaN when the Hessian is
/// not positive definite.
struct MsarStandardErrors {
  std::array<double, 2> mean{}, variance{};
  std::array<Eigen::Vector2d, 2> ar{};
  double p_high_high = 0.0, p_low_low = 0.0;
};

struct MsarConfig {
  int starts = 6;
  int max_iterations = 3000;
  double tolerance = 1e-10;
  unsigned workers = 1;
  bool standard_errors = true;
};

struct MsarResult {
  MsarSpec spec;
  Eigen::MatrixX2d filtered_probs, smoothed_probs;
  /// Sum over regimes of smoothed probability times regime mean.
  TimeSeries smoothed_state_path;
  double log_likelihood = 0.0;
  double aic = 0.0;
  int n_params = 10;
  MsarStandardErrors standard_errors;
  bool converged = false;
  std::vector<std::string> warnings;
};

struct MsarSimulation {
  TimeSeries y;
  std::vector<int> regimes;
};

/// Draws a regime path from the chain and y from the regime AR(2) laws; the
/// first two values are drawn from the first regime's stationary distribution.
MsarSimulation simulate_msar(const MsarSpec& spec, Eigen::Index length, std::uint64_t seed);

MsarResult fit_msar(const TimeSeries& y, const MsarConfig& config = {});

}  // namespace sstate::regime
