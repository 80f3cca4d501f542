#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sstate/core/errors.hpp"
#include "sstate/core/simulate.hpp"
#include "sstate/spectral/spectral.hpp"

using namespace sstate;
using namespace sstate::spectral;

namespace {

constexpr double kPi = std::numbers::pi;

TimeSeries cosines(Eigen::Index T, std::initializer_list<double> periods, double snr, std::uint64_t seed) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(T);
  for (double period : periods)
    for (Eigen::Index t = 0; t < T; ++t) y[t] += std::cos(2 * kPi * static_cast<double>(t) / period);
  if (snr > 0) {
    GaussianStream g(seed);
    const double sd = std::sqrt((y.array() - y.mean()).square().mean()) / snr;
    y += sd * g.vector(T);
  }
  return TimeSeries(y);
}

}  // namespace

TEST_CASE("cycle periods") {
  CHECK(cycle_period(kPi / 6) == doctest::Approx(12.0).epsilon(1e-15));
  CHECK(cycle_period(kPi) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(cycle_period(2 * kPi / 43.44) / 12 == doctest::Approx(3.62).epsilon(1e-12));
  for (double f : {0.01, 0.1, 0.25, 0.5}) CHECK(cycle_period(2 * kPi * f) == doctest::Approx(1 / f).epsilon(1e-14));
  CHECK(cycle_period(kPi / 6, 3.0) == doctest::Approx(36.0));
  CHECK_THROWS_AS(cycle_period(0.0), InvalidArgument);
  CHECK_THROWS_AS(cycle_period(3.5), InvalidArgument);
}

TEST_CASE("periodogram of simple signals") {
  const auto s = periodogram(cosines(120, {12.0}, 0, 0));
  CHECK(s.frequencies.size() == 60);
  Eigen::Index arg;
  s.power.maxCoeff(&arg);
  CHECK(s.frequencies[arg] == doctest::Approx(1.0 / 12).epsilon(1e-15));
  const auto peaks = find_peaks(s, 3);
  REQUIRE(peaks.size() >= 1);
  CHECK(peaks[0].period == doctest::Approx(12.0).epsilon(1e-12));

  const auto flat = periodogram(TimeSeries(Eigen::VectorXd::Constant(64, 3.5)));
  CHECK(flat.power.cwiseAbs().maxCoeff() < 1e-28);
  CHECK(find_peaks(flat, 4).empty());

  TimeSeries gap = cosines(40, {8.0}, 0, 0);
  gap.missing[5] = true;
  CHECK_THROWS_AS(periodogram(gap), DataError);
  CHECK_THROWS_AS(periodogram(cosines(10, {4.0}, 0, 0)), InvalidArgument);
}

TEST_CASE("Parseval") {
  GaussianStream g(1);
  for (Eigen::Index T : {64, 101, 1272}) {
    const TimeSeries y(g.vector(T));
    for (bool detrend : {false, true}) {
      const auto s = periodogram(y, {detrend, 0.0});
      CHECK(std::abs(s.power.sum() / s.processed_variance - 1) < 1e-8);
      CHECK((s.power.array() >= 0).all());
    }
  }
}

TEST_CASE("three planted periods") {
  const auto s = periodogram(cosines(1272, {624.0, 312.0, 156.0}, 5.0, 52), {false, 0.0});
  const auto peaks = find_peaks(s, 3);
  REQUIRE(peaks.size() == 3);
  for (double period : {624.0, 312.0, 156.0}) {
    bool found = false;
    for (const auto& p : peaks) found |= std::abs(p.frequency - 1 / period) <= 1.0 / 1272;
    CHECK(found);
  }
  Spectrum scaled = s;
  scaled.power *= 1e6;
  const auto again = find_peaks(scaled, 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(again[i].frequency == peaks[i].frequency);
}

TEST_CASE("peak ranking") {
  Spectrum s;
  s.frequencies = Eigen::VectorXd::LinSpaced(7, 1, 7) / 14.0;
  s.power.resize(7);
  s.power << 1, 3, 1, 3, 1, 2, 1;
  const auto all = find_peaks(s, 10);
  REQUIRE(all.size() == 3);
  CHECK(all[0].frequency == s.frequencies[1]);
  CHECK(all[1].frequency == s.frequencies[3]);
  CHECK(all[2].power == 2);
  CHECK_THROWS_AS(find_peaks(s, 0), InvalidArgument);
}

TEST_CASE("taper and detrend") {
  Eigen::VectorXd y = cosines(240, {24.0}, 0, 0).values;
  y += Eigen::VectorXd::LinSpaced(240, 0, 50);
  const auto raw = periodogram(TimeSeries(y));
  const auto clean = periodogram(TimeSeries(y), {true, 0.1});
  CHECK(clean.detrended);
  CHECK(clean.taper == 0.1);
  CHECK(find_peaks(clean, 1)[0].period == doctest::Approx(24.0));
  CHECK(find_peaks(raw, 1)[0].period > 24.0);
}
