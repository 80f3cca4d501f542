#include "sstate/structural/diagnostics.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>

namespace sstate::structural {

namespace {

double chi2_sf(double x, int dof) {
  if (dof <= 0 || !std::isfinite(x)) return std::isfinite(x) ? 1.0 : 0.0;
  boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, std::max(x, 0.0)));
}

}  // namespace

TestStatistic ljung_box(const Eigen::VectorXd& residuals, int lags, int fitted_params) {
  const Eigen::Index n = residuals.size();
  TestStatistic out;
  lags = static_cast<int>(std::min<Eigen::Index>(lags, n - 1));
  if (lags < 1) return out;
  const Eigen::VectorXd e = residuals.array() - residuals.mean();
  const double c0 = e.squaredNorm();
  if (c0 <= 0) return out;
  double q = 0;
  for (int k = 1; k <= lags; ++k) {
    const double rk = e.head(n - k).dot(e.tail(n - k)) / c0;
    q += rk * rk / static_cast<double>(n - k);
  }
  out.statistic = static_cast<double>(n) * (n + 2) * q;
  out.dof = std::max(1, lags - fitted_params);
  out.p_value = chi2_sf(out.statistic, out.dof);
  return out;
}

TestStatistic jarque_bera(const Eigen::VectorXd& residuals) {
  TestStatistic out;
  out.dof = 2;
  const Eigen::Index n = residuals.size();
  if (n < 3) return out;
  const Eigen::ArrayXd e = residuals.array() - residuals.mean();
  const double m2 = e.square().mean();
  if (m2 <= 0) return out;
  const double skew = e.cube().mean() / std::pow(m2, 1.5);
  const double kurt = e.square().square().mean() / (m2 * m2);
  out.statistic = static_cast<double>(n) / 6.0 * (skew * skew + 0.25 * (kurt - 3) * (kurt - 3));
  out.p_value = chi2_sf(out.statistic, 2);
  return out;
}

}  // namespace sstate::structural
