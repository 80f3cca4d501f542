#include "sstate/factors/reconstruct.hpp"

#include <Eigen/Dense>

#include "sstate/core/errors.hpp"

namespace sstate::factors {

double r_squared(const Eigen::VectorXd& y, const Eigen::VectorXd& fitted) {
  const double tss = (y.array() - y.mean()).square().sum();
  return 1 - (y - fitted).squaredNorm() / tss;
}

ReconstructionReport reconstruct(const CommonFactorModel& model, const Panel& panel, Eigen::Index series_index,
                                 Eigen::Index k, std::optional<Window> window) {
  panel.validate();
  if (series_index < 0 || series_index >= panel.series())
    throw InvalidArgument("series index " + std::to_string(series_index) + " is outside the panel");
  if (k < 1 || k > model.order) throw InvalidArgument("k must be between 1 and the model order");
  const Eigen::Index T = panel.length();
  if (model.factor_paths.cols() != T) throw DimensionError("factor paths do not match the panel length");
  if (window && (window->first < 0 || window->second > T || window->first + 2 > window->second))
    throw InvalidArgument("reconstruction window must hold at least 2 steps inside the series");

  const Eigen::VectorXd y = panel.data.row(series_index).transpose();
  ReconstructionReport rep;
  rep.target = series_index;
  rep.window = window;
  for (Eigen::Index kk = 1; kk <= k; ++kk) {
    Eigen::MatrixXd X(T, kk + 1);
    X.col(0).setOnes();
    X.rightCols(kk) = model.factor_paths.topRows(kk).transpose();
    const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
    const Eigen::VectorXd fitted = X * beta;
    rep.r_squared.push_back(r_squared(y, fitted));
    rep.correlation.push_back(pearson(y, fitted).value_or(std::numeric_limits<double>::quiet_NaN()));
    if (window) {
      const Eigen::Index n = window->second - window->first;
      rep.window_r_squared.push_back(r_squared(y.segment(window->first, n), fitted.segment(window->first, n)));
    }
    rep.paths.emplace_back(panel.unscale(series_index, fitted), panel.start, panel.step_months,
                           panel.boxes[static_cast<std::size_t>(series_index)].id + ":k" + std::to_string(kk));
  }
  return rep;
}

}  // namespace sstate::factors
