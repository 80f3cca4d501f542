#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "sstate/factors/panel.hpp"

namespace sstate::factors {

/// `scaled` uses the raw cross-covariance of the standardized panel;
/// `canonical` whitens futures and pasts so singular values are canonical correlations.
enum class HankelWeighting { scaled, canonical };

std::string to_string(HankelWeighting w);
HankelWeighting hankel_weighting_from_string(const std::string& s);

struct HankelMatrix {
  /// Weighted (q j) x (q i) cross-covariance of stacked futures and pasts.
  Eigen::MatrixXd matrix;
  /// Stacked pasts p_t = (y_{t-1}, ..., y_{t-i}) for t = i .. i+N-1 (0-based), one per column.
  Eigen::MatrixXd pasts;
  Eigen::MatrixXd past_weight, future_weight;
  Eigen::Index past_lags = 0, future_lags = 0;
  HankelWeighting weighting = HankelWeighting::scaled;
  std::vector<std::string> warnings;

  Eigen::Index first_state_time() const { return past_lags; }
};

/// Default depth: 24 samples, bounded by T/10.
Eigen::Index default_hankel_depth(Eigen::Index length);

HankelMatrix build_hankel(const Panel& panel, Eigen::Index past_lags, Eigen::Index future_lags,
                          HankelWeighting weighting = HankelWeighting::scaled);

}  // namespace sstate::factors
