#include "sstate/factors/identify.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

#include "sstate/core/errors.hpp"

namespace sstate::factors {

namespace {

// Solves min ||Y - B X||: B = Y X' (X X')^{-1}, with a ridge when X X' is near singular.
Eigen::MatrixXd regress(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& X, const char* what,
                        std::vector<std::string>& warnings) {
  Eigen::MatrixXd G = X * X.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
  const double hi = es.eigenvalues().maxCoeff(), lo = es.eigenvalues().minCoeff();
  if (!(hi > 0)) throw FitError(std::string(what) + ": regressors are identically zero");
  if (!(lo > 1e-12 * hi)) {
    warnings.push_back(std::string(what) + ": rank-deficient least squares; added a ridge of 1e-8 x trace");
    G.diagonal().array() += 1e-8 * G.trace();
  }
  return G.ldlt().solve(X * Y.transpose()).transpose();
}

}  // namespace

CommonFactorModel identify_common_factors(const Panel& panel, Eigen::Index m, Eigen::Index i, Eigen::Index j,
                                          HankelWeighting weighting) {
  panel.validate();
  const Eigen::Index q = panel.series(), T = panel.length();
  if (i == 0) i = default_hankel_depth(T);
  if (j == 0) j = default_hankel_depth(T);
  if (m < 1 || m > std::min(q * i, q * j)) throw InvalidArgument("factor order must be between 1 and min(q i, q j)");

  CommonFactorModel model;
  const HankelMatrix h = build_hankel(panel, i, j, weighting);
  model.warnings = h.warnings;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(h.matrix, Eigen::ComputeThinV);
  model.singular_values = svd.singularValues();
  const double s1 = model.singular_values[0];
  if (!(s1 > 0) || !(model.singular_values[m - 1] > 1e-12 * s1))
    throw InvalidArgument("factor order " + std::to_string(m) + " exceeds the numerical rank of the Hankel matrix");

  // State sequence for t = i .. i+N-1.
  const Eigen::MatrixXd X = model.singular_values.head(m).cwiseSqrt().asDiagonal() *
                            svd.matrixV().leftCols(m).transpose() * h.past_weight * h.pasts;
  const Eigen::Index N = X.cols();
  Eigen::MatrixXd A = regress(panel.data.middleCols(i, N), X, "loadings", model.warnings);
  Eigen::MatrixXd Phi = N > 1 ? regress(X.rightCols(N - 1), X.leftCols(N - 1), "transition", model.warnings)
                              : Eigen::MatrixXd::Zero(m, m);

  Eigen::MatrixXd AtA = A.transpose() * A;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(AtA, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 1e-12 * es.eigenvalues().maxCoeff())) {
    model.warnings.push_back("factor paths: loading matrix is rank deficient; added a ridge of 1e-8 x trace");
    AtA.diagonal().array() += 1e-8 * AtA.trace();
  }
  Eigen::MatrixXd F = AtA.ldlt().solve(A.transpose() * panel.data);

  for (Eigen::Index c = 0; c < m; ++c) {
    Eigen::Index arg = 0;
    for (Eigen::Index r = 1; r < q; ++r)
      if (std::abs(A(r, c)) > std::abs(A(arg, c))) arg = r;
    if (A(arg, c) < 0) {
      A.col(c) *= -1;
      F.row(c) *= -1;
      Phi.row(c) *= -1;
      Phi.col(c) *= -1;
    }
  }

  model.factor_paths = std::move(F);
  model.loadings = std::move(A);
  model.transition = std::move(Phi);
  model.order = m;
  model.means = panel.means;
  model.scales = panel.scales;
  model.boxes = panel.boxes;
  model.start = panel.start;
  model.step_months = panel.step_months;
  model.past_lags = i;
  model.future_lags = j;
  model.weighting = weighting;
  return model;
}

std::vector<LoadingRow> factor_loadings(const CommonFactorModel& model) {
  std::vector<LoadingRow> rows;
  for (Eigen::Index r = 0; r < model.loadings.rows(); ++r)
    rows.push_back({model.boxes[static_cast<std::size_t>(r)], model.loadings.row(r).transpose() * model.scales[r]});
  return rows;
}

std::optional<double> pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw DimensionError("correlation needs equal lengths");
  const Eigen::ArrayXd x = a.array() - a.mean(), y = b.array() - b.mean();
  const double sxx = x.square().sum(), syy = y.square().sum();
  if (!(sxx > 0) || !(syy > 0)) return std::nullopt;
  return std::clamp((x * y).sum() / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<CorrelationRow> correlation_map(const Panel& panel, const Eigen::VectorXd& factor_path) {
  panel.validate();
  if (factor_path.size() != panel.length()) throw DimensionError("factor path length does not match the panel");
  std::vector<CorrelationRow> rows;
  for (Eigen::Index r = 0; r < panel.series(); ++r)
    rows.push_back({panel.boxes[static_cast<std::size_t>(r)], pearson(panel.data.row(r).transpose(), factor_path)});
  return rows;
}

std::string to_string(OrderCriterion c) {
  switch (c) {
    case OrderCriterion::cumulative: return "cumulative";
    case OrderCriterion::elbow: return "elbow";
    case OrderCriterion::fixed: return "fixed";
  }
  return "cumulative";
}

OrderCriterion order_criterion_from_string(const std::string& s) {
  if (s == "cumulative") return OrderCriterion::cumulative;
  if (s == "elbow") return OrderCriterion::elbow;
  if (s == "fixed") return OrderCriterion::fixed;
  throw InvalidArgument("unknown order criterion '" + s + "' (expected cumulative, elbow or fixed)");
}

Eigen::Index select_order(const Eigen::VectorXd& s, const OrderRule& rule) {
  if (s.size() == 0) throw InvalidArgument("empty singular-value spectrum");
  const Eigen::Index limit = std::min<Eigen::Index>(s.size(), std::max<Eigen::Index>(rule.cap, 1));
  Eigen::Index m = 1;
  switch (rule.criterion) {
    case OrderCriterion::fixed:
      return std::max<Eigen::Index>(1, rule.fixed_order);
    case OrderCriterion::cumulative: {
      const double total = s.squaredNorm();
      if (!(total > 0)) return 1;
      double acc = 0;
      for (m = 1; m <= s.size(); ++m) {
        acc += s[m - 1] * s[m - 1];
        if (acc >= rule.threshold * total) break;
      }
      break;
    }
    case OrderCriterion::elbow: {
      double best = -std::numeric_limits<double>::infinity();
      for (Eigen::Index k = 1; k + 1 < s.size(); ++k) {
        const double d2 = s[k - 1] - 2 * s[k] + s[k + 1];
        if (d2 > best) {
          best = d2;
          m = k;
        }
      }
      break;
    }
  }
  return std::clamp<Eigen::Index>(m, 1, limit);
}

}  // namespace sstate::factors
