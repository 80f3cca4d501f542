#pragma once

#include <Eigen/Dense>

#include "sstate/core/state_space_model.hpp"
#include "sstate/structural/component_spec.hpp"

namespace sstate::structural {

/// One component as a self-contained state-space block.
struct StateBlock {
  Eigen::MatrixXd transition;
  Eigen::MatrixXd noise_cov;
  Eigen::RowVectorXd obs_row;
  /// Initial covariance of the stationary part.
  Eigen::MatrixXd init_cov;
  /// Pattern scaled by the diffuse variance for nonstationary states.
  Eigen::MatrixXd diffuse_pattern;
  Eigen::Index n_diffuse = 0;

  Eigen::Index dim() const { return transition.rows(); }
};

StateBlock build_trend_block(int order, double variance);
StateBlock build_seasonal_block(SeasonalVariant variant, int period, double variance);
StateBlock build_cycle_block(double damping, double frequency, double variance);
StateBlock build_ar_block(const Eigen::VectorXd& coefficients, double variance);

/// Where each component lives inside the assembled state vector (-1 = absent).
struct ComponentLayout {
  Eigen::Index trend = -1, seasonal = -1, cycle = -1, ar = -1;
  Eigen::Index trend_dim = 0, seasonal_dim = 0, cycle_dim = 0, ar_dim = 0;
};

struct StructuralModel {
  StateSpaceModel<double> model;
  ComponentLayout layout;
};

/// Default diffuse variance when no data scale is known.
inline constexpr double kDiffuseScale = 1e7;

/// Block-diagonal assembly. Diffuse states get `diffuse_variance` on their
/// initial-covariance pattern.
StructuralModel assemble_model(const ComponentSpec& spec, double diffuse_variance = kDiffuseScale);

}  // namespace sstate::structural
