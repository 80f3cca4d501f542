#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace sstate {

struct SimplexOptions {
  int max_iterations = 500;
  /// Stop when |f_worst - f_best| <= relative_tolerance * (|f_best| + 1e-300).
  double relative_tolerance = 1e-9;
  double initial_step = 0.5;
  /// Per-coordinate initial simplex steps; overrides `initial_step` when sized.
  Eigen::VectorXd steps;
};

struct SimplexResult {
  Eigen::VectorXd argmin;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Nelder-Mead downhill simplex. Non-finite objective values are treated as +inf.
inline SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& objective,
                                 const Eigen::VectorXd& start, const SimplexOptions& opts = {}) {
  const Eigen::Index n = start.size();
  SimplexResult res;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++res.evaluations;
    const double f = objective(x);
    return std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
  };
  if (n == 0) {
    res.argmin = start;
    res.value = eval(start);
    res.converged = true;
    return res;
  }

  std::vector<Eigen::VectorXd> pts(n + 1, start);
  std::vector<double> fv(n + 1);
  for (Eigen::Index i = 0; i < n; ++i)
    pts[i + 1][i] += opts.steps.size() == n ? opts.steps[i] : opts.initial_step;
  for (Eigen::Index i = 0; i <= n; ++i) fv[i] = eval(pts[i]);

  std::vector<Eigen::Index> order(n + 1);
  for (; res.iterations < opts.max_iterations; ++res.iterations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
    const auto best = order.front(), worst = order.back(), second = order[n - 1];
    if (std::isfinite(fv[worst]) &&
        std::abs(fv[worst] - fv[best]) <= opts.relative_tolerance * (std::abs(fv[best]) + 1e-300)) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i <= n; ++i)
      if (i != worst) centroid += pts[i];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
    const double fr = eval(xr);
    if (fr < fv[best]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        fv[worst] = fe;
      } else {
        pts[worst] = xr;
        fv[worst] = fr;
      }
    } else if (fr < fv[second]) {
      pts[worst] = xr;
      fv[worst] = fr;
    } else {
      const bool outside = fr < fv[worst];
      const Eigen::VectorXd xc =
          outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                  : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
      const double fc = eval(xc);
      if (fc < (outside ? fr : fv[worst])) {
        pts[worst] = xc;
        fv[worst] = fc;
      } else {
        for (Eigen::Index i = 0; i <= n; ++i) {
          if (i == best) continue;
          pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
          fv[i] = eval(pts[i]);
        }
      }
    }
  }
  const auto best = std::min_element(fv.begin(), fv.end()) - fv.begin();
  res.argmin = pts[best];
  res.value = fv[best];
  return res;
}

}  // namespace sstate
