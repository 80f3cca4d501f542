#pragma once

#include <Eigen/Core>

#include <optional>
#include <utility>
#include <vector>

#include "sstate/factors/identify.hpp"
#include "sstate/factors/panel.hpp"

namespace sstate::factors {

/// Half-open index range [first, last) over time steps.
using Window = std::pair<Eigen::Index, Eigen::Index>;

struct ReconstructionReport {
  Eigen::Index target = 0;
  /// Entry k-1 uses the first k factor paths; paths are in data units.
  std::vector<TimeSeries> paths;
  std::vector<double> correlation, r_squared;
  std::optional<Window> window;
  std::vector<double> window_r_squared;
};

/// Refits the target on an intercept and the first k factor paths for every k
/// up to `k`, so R^2 cannot decrease with k.
ReconstructionReport reconstruct(const CommonFactorModel& model, const Panel& panel, Eigen::Index series_index,
                                 Eigen::Index k, std::optional<Window> window = std::nullopt);

double r_squared(const Eigen::VectorXd& y, const Eigen::VectorXd& fitted);

}  // namespace sstate::factors
