#pragma once

#include <Eigen/Core>

namespace sstate::structural {

struct TestStatistic {
  double statistic = 0.0;
  double p_value = 1.0;
  int dof = 0;
};

/// Ljung-Box portmanteau test on the first `lags` autocorrelations; `dof`
/// defaults to `lags` when `fitted_params` is 0.
TestStatistic ljung_box(const Eigen::VectorXd& residuals, int lags, int fitted_params = 0);

/// Jarque-Bera (Bowman-Shenton) normality test, chi-square with 2 dof.
TestStatistic jarque_bera(const Eigen::VectorXd& residuals);

struct ResidualDiagnostics {
  TestStatistic ljung_box;
  TestStatistic normality;
  Eigen::Index n_residuals = 0;
};

}  // namespace sstate::structural
