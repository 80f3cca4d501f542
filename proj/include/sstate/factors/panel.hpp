#pragma once

#include <Eigen/Core>

#include <limits>
#include <string>
#include <vector>

#include "sstate/core/time_series.hpp"
#include "sstate/structural/fit.hpp"

namespace sstate::factors {

/// Grid-box identifier; lat/lon are the south-west corner when known.
struct BoxLabel {
  std::string id;
  double lat = std::numeric_limits<double>::quiet_NaN();
  double lon = std::numeric_limits<double>::quiet_NaN();
};

/// q aligned series, each centered and scaled to unit variance. Row i of
/// `data` equals (x_i - means[i]) / scales[i].
struct Panel {
  Eigen::MatrixXd data;
  Eigen::VectorXd means, scales;
  std::vector<BoxLabel> boxes;
  YearMonth start;
  int step_months = 1;
  std::vector<std::string> warnings;

  Eigen::Index series() const { return data.rows(); }
  Eigen::Index length() const { return data.cols(); }
  Eigen::VectorXd unscale(Eigen::Index i, const Eigen::VectorXd& z) const;
  Eigen::VectorXd scale(Eigen::Index i, const Eigen::VectorXd& x) const;
  void validate() const;
};

/// Centers and scales aligned, complete series. Boxes default to the series labels.
Panel make_panel(const std::vector<TimeSeries>& series, std::vector<BoxLabel> boxes = {});

Panel prepare_trend_panel(const std::vector<structural::DecompositionResult>& decomps,
                          std::vector<BoxLabel> boxes = {});
Panel prepare_cycle_panel(const std::vector<structural::DecompositionResult>& decomps,
                          std::vector<BoxLabel> boxes = {});

}  // namespace sstate::factors
