#include "sstate/factors/hankel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>

#include "sstate/core/errors.hpp"

namespace sstate::factors {

std::string to_string(HankelWeighting w) { return w == HankelWeighting::scaled ? "scaled" : "canonical"; }

HankelWeighting hankel_weighting_from_string(const std::string& s) {
  if (s == "scaled") return HankelWeighting::scaled;
  if (s == "canonical") return HankelWeighting::canonical;
  throw InvalidArgument("unknown Hankel weighting '" + s + "' (expected scaled or canonical)");
}

Eigen::Index default_hankel_depth(Eigen::Index length) { return std::max<Eigen::Index>(1, std::min<Eigen::Index>(24, length / 10)); }

namespace {

Eigen::MatrixXd weight_for(Eigen::MatrixXd S, const char* which, std::vector<std::string>& warnings) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  const Eigen::VectorXd w = es.eigenvalues();
  if (!(w.minCoeff() > 1e-12 * std::max(w.maxCoeff(), 0.0))) {
    warnings.push_back(std::string("singular ") + which + " covariance; added a ridge of 1e-8 x trace");
    S.diagonal().array() += 1e-8 * S.trace();
    es.compute(S);
  }
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

HankelMatrix build_hankel(const Panel& panel, Eigen::Index i, Eigen::Index j, HankelWeighting weighting) {
  panel.validate();
  if (i < 1 || j < 1) throw InvalidArgument("Hankel lags must be >= 1");
  const Eigen::Index q = panel.series(), T = panel.length();
  if (T <= i + j) throw InvalidArgument("series too short for Hankel lags: need T > i + j");
  const Eigen::Index N = T - i - j + 1;
  const Eigen::MatrixXd& Y = panel.data;

  HankelMatrix h;
  h.past_lags = i;
  h.future_lags = j;
  h.weighting = weighting;
  h.pasts.resize(q * i, N);
  for (Eigen::Index l = 0; l < i; ++l) h.pasts.middleRows(l * q, q) = Y.middleCols(i - 1 - l, N);
  Eigen::MatrixXd futures(q * j, N);
  for (Eigen::Index l = 0; l < j; ++l) futures.middleRows(l * q, q) = Y.middleCols(i + l, N);

  const double n = static_cast<double>(N);
  const Eigen::MatrixXd cross = futures * h.pasts.transpose() / n;
  if (weighting == HankelWeighting::canonical) {
    h.future_weight = weight_for(futures * futures.transpose() / n, "future", h.warnings);
    h.past_weight = weight_for(h.pasts * h.pasts.transpose() / n, "past", h.warnings);
    h.matrix = h.future_weight * cross * h.past_weight;
  } else {
    h.future_weight = Eigen::MatrixXd::Identity(q * j, q * j);
    h.past_weight = Eigen::MatrixXd::Identity(q * i, q * i);
    h.matrix = cross;
  }
  return h;
}

}  // namespace sstate::factors
