#pragma once

#include <Eigen/Core>

#include <vector>

#include "sstate/core/time_series.hpp"

namespace sstate::spectral {

/// Period (in units of `step`) of a cycle with frequency lambda radians per sample.
double cycle_period(double lambda, double step = 1.0);

struct PeriodogramOptions {
  bool detrend = false;
  /// Fraction tapered at each end by a split cosine bell; 0 disables.
  double taper = 0.0;
};

/// One-sided periodogram at the Fourier frequencies k/T, k = 1..T/2. Power is
/// normalized so that, untapered, it sums to the variance of the processed series.
struct Spectrum {
  Eigen::VectorXd frequencies;  // cycles per sample
  Eigen::VectorXd power;
  double sample_interval = 1.0;
  double taper = 0.0;
  bool detrended = false;
  /// Variance of the series after mean/trend removal and tapering.
  double processed_variance = 0.0;

  double period(Eigen::Index k) const { return sample_interval / frequencies[k]; }
};

Spectrum periodogram(const TimeSeries& series, const PeriodogramOptions& options = {});

struct Peak {
  double frequency = 0.0;
  double period = 0.0;
  double power = 0.0;
};

/// Local maxima ranked by power, ties going to the lower frequency.
std::vector<Peak> find_peaks(const Spectrum& spectrum, std::size_t n);

}  // namespace sstate::spectral
