#include "sstate/spectral/spectral.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "sstate/core/errors.hpp"

namespace sstate::spectral {

double cycle_period(double lambda, double step) {
  if (!(lambda > 0) || lambda > std::numbers::pi) throw InvalidArgument("cycle frequency must lie in (0, pi]");
  return 2 * std::numbers::pi / lambda * step;
}

Spectrum periodogram(const TimeSeries& series, const PeriodogramOptions& options) {
  series.validate();
  if (series.has_missing()) throw DataError("periodogram input must not contain missing values");
  const Eigen::Index T = series.size();
  if (T < 16) throw InvalidArgument("periodogram needs at least 16 observations");
  if (options.taper < 0 || options.taper > 0.5) throw InvalidArgument("taper fraction must lie in [0, 0.5]");

  Eigen::VectorXd x = series.values.array() - series.values.mean();
  if (options.detrend) {
    const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(T, 0.0, static_cast<double>(T - 1)).array() - 0.5 * static_cast<double>(T - 1);
    x -= (t.dot(x) / t.squaredNorm()) * t;
  }
  if (options.taper > 0) {
    const Eigen::Index m = static_cast<Eigen::Index>(std::floor(options.taper * static_cast<double>(T)));
    for (Eigen::Index k = 0; k < m; ++k) {
      const double w = 0.5 * (1 - std::cos(std::numbers::pi * (static_cast<double>(k) + 0.5) / static_cast<double>(m)));
      x[k] *= w;
      x[T - 1 - k] *= w;
    }
  }

  std::vector<double> in(x.data(), x.data() + T);
  std::vector<std::complex<double>> out;
  Eigen::FFT<double> fft;
  fft.fwd(out, in);

  const Eigen::Index half = T / 2;
  Spectrum s;
  s.frequencies.resize(half);
  s.power.resize(half);
  const double n = static_cast<double>(T);
  for (Eigen::Index k = 1; k <= half; ++k) {
    const double p = std::norm(out[static_cast<std::size_t>(k)]) / (n * n);
    s.frequencies[k - 1] = static_cast<double>(k) / n;
    s.power[k - 1] = (2 * k == T) ? p : 2 * p;
  }
  s.sample_interval = series.step_months;
  s.taper = options.taper;
  s.detrended = options.detrend;
  s.processed_variance = (x.array() - x.mean()).square().mean();
  return s;
}

std::vector<Peak> find_peaks(const Spectrum& spectrum, std::size_t n) {
  if (n < 1) throw InvalidArgument("number of peaks must be >= 1");
  const Eigen::VectorXd& p = spectrum.power;
  const Eigen::Index K = p.size();
  std::vector<Eigen::Index> idx;
  for (Eigen::Index k = 0; k < K; ++k) {
    const bool left = k == 0 || p[k] > p[k - 1];
    const bool right = k + 1 == K || p[k] >= p[k + 1];
    if (left && right && p[k] > 0) idx.push_back(k);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return p[a] > p[b]; });
  if (idx.size() > n) idx.resize(n);
  std::vector<Peak> peaks;
  for (Eigen::Index k : idx) peaks.push_back({spectrum.frequencies[k], spectrum.period(k), p[k]});
  return peaks;
}

}  // namespace sstate::spectral
