#include "sstate/regime/msar.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "sstate/core/errors.hpp"
#include "sstate/core/optimize.hpp"
#include "sstate/core/parallel.hpp"
#include "sstate/core/simulate.hpp"

namespace sstate::regime {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

bool stationary_ar2(const Eigen::Vector2d& phi) {
  return phi[1] < 1 && phi[0] + phi[1] < 1 && phi[1] - phi[0] < 1;
}

void check_series(const TimeSeries& y) {
  y.validate();
  if (y.size() <= 2) throw InvalidArgument("MSAR(2) needs more than 2 observations");
  if (y.has_missing()) throw DataError("MSAR input must not contain missing values");
}

// T x 2 matrix of conditional log densities; rows 0 and 1 are unused.
Eigen::MatrixX2d log_densities(const MsarSpec& spec, const Eigen::VectorXd& y) {
  const Eigen::Index T = y.size();
  Eigen::MatrixX2d f = Eigen::MatrixX2d::Zero(T, 2);
  for (int r = 0; r < 2; ++r) {
    const auto& g = spec.regimes[r];
    for (Eigen::Index t = 2; t < T; ++t) {
      const double e = (y[t] - g.mean) - g.ar[0] * (y[t - 1] - g.mean) - g.ar[1] * (y[t - 2] - g.mean);
      f(t, r) = -0.5 * (kLog2Pi + std::log(g.variance) + e * e / g.variance);
    }
  }
  return f;
}

double logit(double p) { return std::log(p / (1 - p)); }
double sigmoid(double x) { return 1 / (1 + std::exp(-x)); }

// theta = [mu_low, log delta, atanh pacf x2 (high), atanh pacf x2 (low), log var x2, logit p00, logit p11]
MsarSpec from_theta(const Eigen::VectorXd& th) {
  MsarSpec s;
  s.regimes[1].mean = th[0];
  s.regimes[0].mean = th[0] + std::exp(std::clamp(th[1], -700.0, 700.0));
  for (int r = 0; r < 2; ++r) {
    const double r1 = std::tanh(th[2 + 2 * r]), r2 = std::tanh(th[3 + 2 * r]);
    s.regimes[r].ar = Eigen::Vector2d(r1 * (1 - r2), r2);
    s.regimes[r].variance = std::exp(std::clamp(th[6 + r], -700.0, 700.0));
  }
  const double p00 = sigmoid(th[8]), p11 = sigmoid(th[9]);
  s.transition << p00, 1 - p00, 1 - p11, p11;
  return s;
}

Eigen::VectorXd to_theta(const MsarSpec& s) {
  Eigen::VectorXd th(10);
  th[0] = s.regimes[1].mean;
  th[1] = std::log(std::max(s.regimes[0].mean - s.regimes[1].mean, 1e-12));
  for (int r = 0; r < 2; ++r) {
    const double r2 = std::clamp(s.regimes[r].ar[1], -0.99, 0.99);
    const double r1 = std::clamp(s.regimes[r].ar[0] / (1 - r2), -0.99, 0.99);
    th[2 + 2 * r] = std::atanh(r1);
    th[3 + 2 * r] = std::atanh(r2);
    th[6 + r] = std::log(s.regimes[r].variance);
  }
  th[8] = logit(std::clamp(s.transition(0, 0), 1e-6, 1 - 1e-6));
  th[9] = logit(std::clamp(s.transition(1, 1), 1e-6, 1 - 1e-6));
  return th;
}

double safe_log_likelihood(const MsarSpec& s, const TimeSeries& y) {
  try {
    const double ll = hamilton_filter(s, y).log_likelihood;
    return std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
  } catch (const Error&) {
    return -std::numeric_limits<double>::infinity();
  }
}

// Natural parameters: mu_H, mu_L, phi_H1, phi_H2, phi_L1, phi_L2, var_H, var_L, p00, p11.
Eigen::VectorXd to_natural(const MsarSpec& s) {
  Eigen::VectorXd v(10);
  v << s.regimes[0].mean, s.regimes[1].mean, s.regimes[0].ar, s.regimes[1].ar, s.regimes[0].variance,
      s.regimes[1].variance, s.transition(0, 0), s.transition(1, 1);
  return v;
}

MsarSpec from_natural(const Eigen::VectorXd& v) {
  MsarSpec s;
  s.regimes[0] = {v[0], Eigen::Vector2d(v[2], v[3]), v[6]};
  s.regimes[1] = {v[1], Eigen::Vector2d(v[4], v[5]), v[7]};
  s.transition << v[8], 1 - v[8], 1 - v[9], v[9];
  return s;
}

MsarStandardErrors standard_errors(const MsarSpec& s, const TimeSeries& y) {
  const Eigen::VectorXd x = to_natural(s);
  const Eigen::Index n = x.size();
  auto f = [&](const Eigen::VectorXd& v) { return -safe_log_likelihood(from_natural(v), y); };
  Eigen::VectorXd h(n);
  for (Eigen::Index i = 0; i < n; ++i) h[i] = 1e-4 * std::max(std::abs(x[i]), 1e-2);
  // Keep probabilities inside [0, 1] for the stencil.
  for (Eigen::Index i = 8; i < 10; ++i) h[i] = std::min(h[i], 0.5 * std::min(x[i], 1 - x[i]));
  const double f0 = f(x);
  Eigen::MatrixXd H(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      double value;
      if (i == j) {
        Eigen::VectorXd a = x, b = x;
        a[i] += h[i];
        b[i] -= h[i];
        value = (f(a) - 2 * f0 + f(b)) / (h[i] * h[i]);
      } else {
        Eigen::VectorXd pp = x, pm = x, mp = x, mm = x;
        pp[i] += h[i], pp[j] += h[j];
        pm[i] += h[i], pm[j] -= h[j];
        mp[i] -= h[i], mp[j] += h[j];
        mm[i] -= h[i], mm[j] -= h[j];
        value = (f(pp) - f(pm) - f(mp) + f(mm)) / (4 * h[i] * h[j]);
      }
      H(i, j) = H(j, i) = value;
    }
  }
  Eigen::VectorXd se = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (H.allFinite() && llt.info() == Eigen::Success)
    se = llt.solve(Eigen::MatrixXd::Identity(n, n)).diagonal().cwiseSqrt();
  MsarStandardErrors out;
  out.mean = {se[0], se[1]};
  out.ar = {Eigen::Vector2d(se[2], se[3]), Eigen::Vector2d(se[4], se[5])};
  out.variance = {se[6], se[7]};
  out.p_high_high = se[8];
  out.p_low_low = se[9];
  return out;
}

}  // namespace

Eigen::Vector2d stationary_distribution(const Eigen::Matrix2d& P) {
  const double a = P(0, 1), b = P(1, 0);
  if (a + b <= 0) return Eigen::Vector2d(0.5, 0.5);
  return Eigen::Vector2d(b / (a + b), a / (a + b));
}

void MsarSpec::validate() const {
  for (int r = 0; r < 2; ++r) {
    const auto& g = regimes[r];
    if (!std::isfinite(g.mean) || !g.ar.allFinite()) throw InvalidArgument("non-finite MSAR parameter");
    if (!stationary_ar2(g.ar))
      throw InvalidArgument("AR polynomial of regime " + std::to_string(r) + " is not stationary");
    if (!(g.variance > 0) || !std::isfinite(g.variance))
      throw InvalidArgument("innovation variance of regime " + std::to_string(r) + " must be positive");
  }
  if ((transition.array() < 0).any() || (transition.array() > 1).any() ||
      ((transition.rowwise().sum().array() - 1).abs() > 1e-12).any())
    throw InvalidArgument("transition matrix must be row-stochastic");
  if (start_probs) {
    if ((start_probs->array() < 0).any() || std::abs(start_probs->sum() - 1) > 1e-12)
      throw InvalidArgument("start probabilities must be non-negative and sum to one");
  }
}

Eigen::Vector2d MsarSpec::initial_probs() const {
  return start_probs ? *start_probs : stationary_distribution(transition);
}

FilterOutput hamilton_filter(const MsarSpec& spec, const TimeSeries& y) {
  spec.validate();
  check_series(y);
  const Eigen::Index T = y.size();
  const Eigen::MatrixX2d logf = log_densities(spec, y.values);
  const Eigen::Matrix2d Pt = spec.transition.transpose();
  FilterOutput out;
  out.filtered_probs.resize(T, 2);
  out.predicted_probs.resize(T, 2);
  Eigen::Vector2d xi = spec.initial_probs();
  for (Eigen::Index t = 0; t < T; ++t) {
    if (t > 0) xi = Pt * out.filtered_probs.row(t - 1).transpose();
    out.predicted_probs.row(t) = xi.transpose();
    if (t < 2) {
      out.filtered_probs.row(t) = xi.transpose();
      continue;
    }
    const double m = logf.row(t).maxCoeff();
    const Eigen::Vector2d joint = xi.cwiseProduct((logf.row(t).array() - m).exp().matrix().transpose());
    const double c = joint.sum();
    if (!(c > 0)) throw FitError("regime probabilities vanish at time step " + std::to_string(t + 1));
    out.log_likelihood += std::log(c) + m;
    out.filtered_probs.row(t) = (joint / c).transpose();
  }
  return out;
}

Eigen::MatrixX2d msar_smooth(const MsarSpec& spec, const TimeSeries& y) {
  const auto f = hamilton_filter(spec, y);
  const Eigen::Index T = y.size();
  Eigen::MatrixX2d s(T, 2);
  s.row(T - 1) = f.filtered_probs.row(T - 1);
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    Eigen::Vector2d ratio;
    for (int j = 0; j < 2; ++j) {
      const double pred = f.predicted_probs(t + 1, j);
      ratio[j] = pred > 0 ? s(t + 1, j) / pred : 0.0;
    }
    Eigen::Vector2d row = f.filtered_probs.row(t).transpose().cwiseProduct(spec.transition * ratio);
    s.row(t) = (row / row.sum()).transpose();
  }
  return s;
}

MsarSimulation simulate_msar(const MsarSpec& spec, Eigen::Index length, std::uint64_t seed) {
  spec.validate();
  if (length < 3) throw InvalidArgument("MSAR simulation needs at least 3 steps");
  GaussianStream g(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MsarSimulation out;
  out.regimes.resize(static_cast<std::size_t>(length));
  Eigen::VectorXd y(length);
  int s = u(g.engine()) < spec.initial_probs()[0] ? 0 : 1;
  for (Eigen::Index t = 0; t < length; ++t) {
    if (t > 0) s = u(g.engine()) < spec.transition(s, 0) ? 0 : 1;
    out.regimes[static_cast<std::size_t>(t)] = s;
    const auto& r = spec.regimes[s];
    if (t < 2) {
      const double a = r.ar[0], b = r.ar[1];
      const double gamma0 = (1 - b) * r.variance / ((1 + b) * ((1 - b) * (1 - b) - a * a));
      y[t] = r.mean + std::sqrt(gamma0) * g();
    } else {
      y[t] = r.mean + r.ar[0] * (y[t - 1] - r.mean) + r.ar[1] * (y[t - 2] - r.mean) + std::sqrt(r.variance) * g();
    }
  }
  out.y = TimeSeries(y);
  return out;
}

MsarResult fit_msar(const TimeSeries& y, const MsarConfig& config) {
  check_series(y);
  if (y.size() < 50) throw InvalidArgument("MSAR fit needs at least 50 observations");
  const Eigen::VectorXd& v = y.values;
  const Eigen::Index T = v.size();
  const double mean = v.mean();
  const double var = (v.array() - mean).square().mean();
  if (!(var > 0)) throw InvalidArgument("MSAR fit needs a non-constant series");
  const double sd = std::sqrt(var);

  // Pooled AR(2) by least squares for the starting coefficients.
  Eigen::MatrixXd X(T - 2, 2);
  X.col(0) = v.segment(1, T - 2).array() - mean;
  X.col(1) = v.segment(0, T - 2).array() - mean;
  const Eigen::VectorXd z = v.tail(T - 2).array() - mean;
  Eigen::Vector2d phi = X.colPivHouseholderQr().solve(z);
  if (!stationary_ar2(phi) || !phi.allFinite()) phi = Eigen::Vector2d(0.5, 0.0);
  phi *= 0.9;
  const double resid = std::max((z - X * phi).squaredNorm() / static_cast<double>(T - 2), 1e-6 * var);

  Eigen::VectorXd sorted = v;
  std::sort(sorted.data(), sorted.data() + T);
  auto quantile = [&](double q) { return sorted[static_cast<Eigen::Index>(q * static_cast<double>(T - 1))]; };

  struct Start {
    double lo, hi, stay, ar_scale;
  };
  std::vector<Start> starts = {{quantile(0.25), quantile(0.75), 0.95, 1.0}, {mean - sd, mean + sd, 0.95, 0.2},
                               {quantile(0.1), quantile(0.9), 0.9, 0.5},   {mean - 0.5 * sd, mean + 0.5 * sd, 0.8, 1.0},
                               {quantile(0.4), quantile(0.6), 0.98, 1.0},  {mean - 2 * sd, mean + 2 * sd, 0.98, 0.0}};
  const int n_starts = std::max(4, config.starts);
  while (static_cast<int>(starts.size()) < n_starts) {
    const double k = 0.25 * static_cast<double>(starts.size() - 5);
    starts.push_back({mean - k * sd, mean + k * sd, 0.9, 0.5});
  }
  starts.resize(n_starts);

  auto objective = [&](const Eigen::VectorXd& th) { return -safe_log_likelihood(from_theta(th), y); };
  std::vector<SimplexResult> results(starts.size());
  std::vector<int> budgets(starts.size(), 0);
  parallel_for(starts.size(), config.workers, [&](std::size_t i) {
    const auto& st = starts[i];
    MsarSpec s;
    for (int r = 0; r < 2; ++r) s.regimes[r] = {r == 0 ? st.hi : st.lo, phi * st.ar_scale, resid};
    if (!(s.regimes[0].mean > s.regimes[1].mean)) s.regimes[0].mean = s.regimes[1].mean + 0.1 * sd;
    s.transition << st.stay, 1 - st.stay, 1 - st.stay, st.stay;
    Eigen::VectorXd th = to_theta(s);
    SimplexResult best;
    best.argmin = th;
    best.value = objective(th);
    int used = 0;
    while (used < config.max_iterations) {
      SimplexOptions opts;
      opts.max_iterations = config.max_iterations - used;
      opts.relative_tolerance = config.tolerance;
      opts.initial_step = 0.3;
      const auto res = nelder_mead(objective, best.argmin, opts);
      used += std::max(res.iterations, 1);
      const double change = std::abs(best.value - res.value) / (std::abs(best.value) + 1e-300);
      if (res.value < best.value) {
        best.argmin = res.argmin;
        best.value = res.value;
      }
      if (res.converged && change < config.tolerance) {
        best.converged = true;
        break;
      }
    }
    best.iterations = used;
    results[i] = best;
  });

  std::size_t winner = 0;
  for (std::size_t i = 1; i < results.size(); ++i)
    if (results[i].value < results[winner].value) winner = i;
  if (!std::isfinite(results[winner].value)) {
    std::string diag = "all " + std::to_string(results.size()) + " MSAR starts failed:";
    for (std::size_t i = 0; i < results.size(); ++i)
      diag += " start " + std::to_string(i) + " (mu " + std::to_string(starts[i].lo) + "/" + std::to_string(starts[i].hi) +
              ") gave a non-finite likelihood;";
    throw FitError(diag);
  }

  MsarResult out;
  out.spec = from_theta(results[winner].argmin);
  out.converged = results[winner].converged;
  if (!out.converged) out.warnings.push_back("MSAR simplex search hit its iteration budget");
  const auto filt = hamilton_filter(out.spec, y);
  out.filtered_probs = filt.filtered_probs;
  out.smoothed_probs = msar_smooth(out.spec, y);
  out.log_likelihood = filt.log_likelihood;
  out.aic = -2 * out.log_likelihood + 2 * out.n_params;
  const Eigen::VectorXd path =
      out.smoothed_probs * Eigen::Vector2d(out.spec.regimes[0].mean, out.spec.regimes[1].mean);
  out.smoothed_state_path = TimeSeries(path, y.start, y.step_months, y.label + ":msar");
  if (config.standard_errors) out.standard_errors = standard_errors(out.spec, y);
  return out;
}

}  // namespace sstate::regime
