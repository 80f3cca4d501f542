#pragma once

#include <Eigen/Core>

#include <compare>
#include <cstdio>
#include <string>
#include <vector>

#include "sstate/core/errors.hpp"

namespace sstate {

/// Calendar stamp with monthly resolution.
struct YearMonth {
  int year = 1900;
  int month = 1;  // 1..12

  friend auto operator<=>(const YearMonth&, const YearMonth&) = default;

  /// Months since year 0, used for arithmetic between stamps.
  long ordinal() const { return static_cast<long>(year) * 12 + (month - 1); }

  static YearMonth from_ordinal(long n) {
    long y = n >= 0 ? n / 12 : (n - 11) / 12;
    return {static_cast<int>(y), static_cast<int>(n - y * 12 + 1)};
  }

  YearMonth plus_months(long n) const { return from_ordinal(ordinal() + n); }

  std::string iso() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
    return buf;
  }

  /// Parses `YYYY-MM`.
  static YearMonth parse(const std::string& s) {
    int y = 0, m = 0;
    char dash = 0;
    if (std::sscanf(s.c_str(), "%d%c%d", &y, &dash, &m) != 3 || dash != '-' || m < 1 || m > 12)
      throw ParseError("expected YYYY-MM, got '" + s + "'");
    return {y, m};
  }
};

/// A uniformly sampled scalar series. Missing samples are flagged in `missing`;
/// their entry in `values` is ignored.
struct TimeSeries {
  Eigen::VectorXd values;
  Eigen::Array<bool, Eigen::Dynamic, 1> missing;
  YearMonth start;
  int step_months = 1;
  std::string label;

  TimeSeries() = default;

  explicit TimeSeries(Eigen::VectorXd v, YearMonth start_ = {}, int step = 1, std::string label_ = {})
      : values(std::move(v)),
        missing(Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(values.size(), false)),
        start(start_),
        step_months(step),
        label(std::move(label_)) {
    validate();
  }

  Eigen::Index size() const { return values.size(); }
  bool has_missing() const { return missing.any(); }
  Eigen::Index observed_count() const { return size() - missing.count(); }
  YearMonth time_at(Eigen::Index t) const { return start.plus_months(t * step_months); }

  void validate() const {
    if (missing.size() != values.size())
      throw DimensionError("time series values and missing mask differ in length");
    if (step_months <= 0) throw InvalidArgument("time series step must be positive");
  }

  /// Mean and variance (population) over observed samples.
  std::pair<double, double> observed_moments() const {
    double sum = 0, sq = 0;
    Eigen::Index n = 0;
    for (Eigen::Index t = 0; t < size(); ++t) {
      if (missing[t]) continue;
      sum += values[t];
      ++n;
    }
    if (n == 0) return {0.0, 0.0};
    const double mean = sum / n;
    for (Eigen::Index t = 0; t < size(); ++t)
      if (!missing[t]) sq += (values[t] - mean) * (values[t] - mean);
    return {mean, sq / n};
  }
};

}  // namespace sstate
