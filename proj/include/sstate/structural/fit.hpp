#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "sstate/core/kalman.hpp"
#include "sstate/core/time_series.hpp"
#include "sstate/structural/blocks.hpp"
#include "sstate/structural/component_spec.hpp"
#include "sstate/structural/diagnostics.hpp"

namespace sstate::structural {

struct FitConfig {
  /// EM warm-up iterations per starting frequency.
  int em_iterations = 20;
  /// Simplex iteration budget and relative log-likelihood tolerance.
  int max_iterations = 500;
  double tolerance = 1e-9;
  /// Starting periods (in samples) for the cycle frequency grid.
  int frequency_grid = 8;
  double min_period = 18.0;
  /// Upper end of the grid as a fraction of the series length.
  double max_period_fraction = 1.0 / 3.0;
  /// Diffuse initial variance as a multiple of the data variance.
  double diffuse_factor = 1e7;
  int ljung_box_lags = 24;
  /// Additional simplex searches from the next-best grid starts.
  int extra_starts = 2;
};

/// Smoothed component estimate with pointwise variances.
struct ComponentPath {
  bool present = false;
  TimeSeries path;
  Eigen::VectorXd variance;
};

struct DecompositionResult {
  TimeSeries observed;
  ComponentPath trend, seasonal, cycle, irregular;
  /// y minus the smoothed signal; NaN where y is missing.
  Eigen::VectorXd observation_error;
  ComponentSpec fitted_spec;
  double log_likelihood = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  int n_params = 0;
  Eigen::Index n_effective = 0;
  ResidualDiagnostics diagnostics;
  bool converged = true;
  int iterations = 0;
  std::vector<std::string> warnings;

  /// Sum of the smoothed component paths.
  Eigen::VectorXd signal() const;
};

/// Runs the smoother at fixed hyperparameters and extracts the component paths.
DecompositionResult decompose(const ComponentSpec& spec, const TimeSeries& y, const FitConfig& config = {});

struct EmTrace {
  ComponentSpec spec;
  /// Full-likelihood value before each M-step and after the last one.
  std::vector<double> log_likelihoods;
};

/// EM on the variance hyperparameters marked for estimation; damping, frequency
/// and AR coefficients stay fixed. Each M-step is closed form.
EmTrace em_fit(const ComponentSpec& spec, const TimeSeries& y, int iterations, const FitConfig& config = {});

/// Maximum likelihood fit: EM warm start over a grid of cycle frequencies, then
/// a simplex search over every free parameter in transformed coordinates.
DecompositionResult fit_mle(const ComponentSpec& spec, const TimeSeries& y, const FitConfig& config = {});

}  // namespace sstate::structural
