#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

#include "sstate/factors/hankel.hpp"
#include "sstate/factors/panel.hpp"

namespace sstate::factors {

/// Loadings and transition are in panel (standardized) units; `means`/`scales`
/// carry what is needed to return to data units.
struct CommonFactorModel {
  Eigen::MatrixXd factor_paths;  // m x T
  Eigen::MatrixXd loadings;      // q x m
  Eigen::MatrixXd transition;    // m x m
  Eigen::VectorXd singular_values;
  Eigen::Index order = 0;
  Eigen::VectorXd means, scales;
  std::vector<BoxLabel> boxes;
  YearMonth start;
  int step_months = 1;
  Eigen::Index past_lags = 0, future_lags = 0;
  HankelWeighting weighting = HankelWeighting::scaled;
  std::vector<std::string> warnings;
};

/// Lags of 0 select default_hankel_depth(T).
CommonFactorModel identify_common_factors(const Panel& panel, Eigen::Index order, Eigen::Index past_lags = 0,
                                          Eigen::Index future_lags = 0,
                                          HankelWeighting weighting = HankelWeighting::scaled);

struct LoadingRow {
  BoxLabel box;
  Eigen::VectorXd loadings;  // data units per unit factor
};

std::vector<LoadingRow> factor_loadings(const CommonFactorModel& model);

struct CorrelationRow {
  BoxLabel box;
  std::optional<double> r;  // empty when either side has zero variance
};

std::optional<double> pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b);
std::vector<CorrelationRow> correlation_map(const Panel& panel, const Eigen::VectorXd& factor_path);

enum class OrderCriterion { cumulative, elbow, fixed };

std::string to_string(OrderCriterion c);
OrderCriterion order_criterion_from_string(const std::string& s);

struct OrderRule {
  OrderCriterion criterion = OrderCriterion::cumulative;
  double threshold = 0.9;
  Eigen::Index fixed_order = 1;
  Eigen::Index cap = 8;
};

Eigen::Index select_order(const Eigen::VectorXd& singular_values, const OrderRule& rule = {});

}  // namespace sstate::factors
