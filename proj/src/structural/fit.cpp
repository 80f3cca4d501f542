#include "sstate/structural/fit.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "sstate/core/linalg.hpp"
#include "sstate/core/optimize.hpp"

namespace sstate::structural {

namespace {

constexpr double kPi = std::numbers::pi;

double data_variance(const TimeSeries& y) {
  const auto [mean, var] = y.observed_moments();
  return var > 0 ? var : 1.0;
}

double diffuse_variance(const TimeSeries& y, const FitConfig& c) { return c.diffuse_factor * data_variance(y); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

Eigen::Index state_dim(const ComponentSpec& s) {
  Eigen::Index p = 0;
  if (s.trend) p += s.trend->order;
  if (s.seasonal.variant == SeasonalVariant::running_sum) p += s.seasonal.period - 1;
  if (s.seasonal.variant == SeasonalVariant::seasonal_difference) p += s.seasonal.period;
  if (s.cycle.present) p += 2;
  p += s.ar.order;
  return p;
}

// Starting values for free parameters left at a non-positive placeholder.
ComponentSpec with_starts(ComponentSpec s, double var) {
  auto start = [&](Parameter& p, double v) {
    if (p.estimate && !(p.value > 0)) p.value = v;
  };
  start(s.obs_variance, 0.2 * var);
  if (s.trend) start(s.trend->variance, (s.trend->order == 1 ? 1e-2 : 1e-4) * var);
  if (s.has_seasonal()) start(s.seasonal.variance, 1e-3 * var);
  if (s.cycle.present) {
    start(s.cycle.variance, 0.1 * var);
    if (s.cycle.damping.estimate && !(s.cycle.damping.value > 0 && s.cycle.damping.value < 1))
      s.cycle.damping.value = 0.9;
    if (s.cycle.frequency.estimate && !(s.cycle.frequency.value > 0 && s.cycle.frequency.value < kPi))
      s.cycle.frequency.value = 2 * kPi / 48.0;
  }
  if (s.ar.order > 0) {
    start(s.ar.variance, 0.2 * var);
    if (s.ar.estimate_coefficients && s.ar.coefficients.head(s.ar.order).isZero()) s.ar.coefficients[0] = 0.3;
  }
  return s;
}

// Maps free hyperparameters to unconstrained coordinates and back.
class ParameterMap {
 public:
  explicit ParameterMap(const ComponentSpec& base) : base_(base) {
    auto variance = [&](std::function<Parameter&(ComponentSpec&)> get) {
      if (get(base_).estimate) slots_.push_back({Kind::variance, std::move(get)});
    };
    variance([](ComponentSpec& s) -> Parameter& { return s.obs_variance; });
    if (base_.trend) variance([](ComponentSpec& s) -> Parameter& { return s.trend->variance; });
    if (base_.has_seasonal()) variance([](ComponentSpec& s) -> Parameter& { return s.seasonal.variance; });
    if (base_.cycle.present) {
      variance([](ComponentSpec& s) -> Parameter& { return s.cycle.variance; });
      if (base_.cycle.damping.estimate)
        slots_.push_back({Kind::damping, [](ComponentSpec& s) -> Parameter& { return s.cycle.damping; }});
      if (base_.cycle.frequency.estimate)
        slots_.push_back({Kind::frequency, [](ComponentSpec& s) -> Parameter& { return s.cycle.frequency; }});
    }
    if (base_.ar.order > 0) {
      variance([](ComponentSpec& s) -> Parameter& { return s.ar.variance; });
      if (base_.ar.estimate_coefficients) ar_coefficients_ = base_.ar.order;
    }
  }

  Eigen::Index size() const { return static_cast<Eigen::Index>(slots_.size()) + ar_coefficients_; }

  std::vector<Eigen::Index> variance_indices() const {
    std::vector<Eigen::Index> out;
    for (std::size_t i = 0; i < slots_.size(); ++i)
      if (slots_[i].kind == Kind::variance) out.push_back(static_cast<Eigen::Index>(i));
    return out;
  }

  Eigen::VectorXd to_theta(ComponentSpec s) const {
    Eigen::VectorXd theta(size());
    Eigen::Index i = 0;
    for (const auto& slot : slots_) {
      const double v = slot.get(s).value;
      switch (slot.kind) {
        case Kind::variance: theta[i] = std::log(std::max(v, 1e-300)); break;
        case Kind::damping: theta[i] = logit(std::clamp(v, 1e-6, 1 - 1e-6)); break;
        case Kind::frequency: theta[i] = logit(std::clamp(v / kPi, 1e-6, 1 - 1e-6)); break;
      }
      ++i;
    }
    if (ar_coefficients_ > 0) {
      const auto& c = s.ar.coefficients;
      double r1 = c[0], r2 = 0;
      if (ar_coefficients_ == 2) {
        r2 = std::clamp(c[1], -0.99, 0.99);
        r1 = c[0] / (1 - r2);
      }
      theta[i++] = std::atanh(std::clamp(r1, -0.99, 0.99));
      if (ar_coefficients_ == 2) theta[i++] = std::atanh(r2);
    }
    return theta;
  }

  ComponentSpec from_theta(const Eigen::VectorXd& theta) const {
    ComponentSpec s = base_;
    Eigen::Index i = 0;
    for (const auto& slot : slots_) {
      Parameter& p = slot.get(s);
      switch (slot.kind) {
        case Kind::variance: p.value = std::exp(std::clamp(theta[i], -700.0, 700.0)); break;
        case Kind::damping: p.value = sigmoid(theta[i]); break;
        case Kind::frequency: p.value = kPi * sigmoid(theta[i]); break;
      }
      ++i;
    }
    if (ar_coefficients_ > 0) {
      // Partial autocorrelations in (-1,1) keep the AR part stationary.
      const double r1 = std::tanh(theta[i++]);
      if (ar_coefficients_ == 1) {
        s.ar.coefficients[0] = r1;
      } else {
        const double r2 = std::tanh(theta[i++]);
        s.ar.coefficients[0] = r1 * (1 - r2);
        s.ar.coefficients[1] = r2;
      }
    }
    return s;
  }

  Eigen::VectorXd initial_steps() const {
    Eigen::VectorXd steps(size());
    Eigen::Index i = 0;
    for (const auto& slot : slots_) steps[i++] = slot.kind == Kind::frequency ? 0.2 : 0.5;
    for (; i < size(); ++i) steps[i] = 0.3;
    return steps;
  }

 private:
  enum class Kind { variance, damping, frequency };
  struct Slot {
    Kind kind;
    std::function<Parameter&(ComponentSpec&)> get;
  };
  ComponentSpec base_;
  std::vector<Slot> slots_;
  Eigen::Index ar_coefficients_ = 0;
};

double safe_log_likelihood(const ComponentSpec& spec, const Observations<double>& obs, double diffuse) {
  try {
    const double ll = log_likelihood(assemble_model(spec, diffuse).model, obs);
    return std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
  } catch (const Error&) {
    return -std::numeric_limits<double>::infinity();
  }
}

// Closed-form M-step for the variance parameters flagged for estimation.
void m_step(ComponentSpec& spec, const StructuralModel& sm, const SmootherResult<double>& s,
            const Observations<double>& obs) {
  const auto& model = sm.model;
  const auto& L = sm.layout;
  const Eigen::Index T = obs.cols();
  const Eigen::Index p = model.state_dim();
  const Eigen::MatrixXd& phi = model.transition;

  Eigen::MatrixXd S11 = Eigen::MatrixXd::Zero(p, p), S10 = S11, S00 = S11;
  for (Eigen::Index t = 0; t < T; ++t) {
    const Eigen::VectorXd& x1 = s.smoothed_means[t];
    const Eigen::VectorXd& x0 = t > 0 ? s.smoothed_means[t - 1] : s.initial_mean;
    const Eigen::MatrixXd& P0 = t > 0 ? s.smoothed_covs[t - 1] : s.initial_cov;
    S11 += s.smoothed_covs[t] + x1 * x1.transpose();
    S10 += s.lag1_cross_covs[t] + x1 * x0.transpose();
    S00 += P0 + x0 * x0.transpose();
  }
  // Expected outer product of the state disturbances summed over t.
  const Eigen::MatrixXd W = S11 - S10 * phi.transpose() - phi * S10.transpose() + phi * S00 * phi.transpose();
  const Eigen::MatrixXd E0 = s.initial_cov + s.initial_mean * s.initial_mean.transpose();
  const double dT = static_cast<double>(T);

  if (spec.trend && spec.trend->variance.estimate) {
    const Eigen::Index c = L.trend + (spec.trend->order == 2 ? 1 : 0);
    spec.trend->variance.value = W(c, c) / dT;
  }
  if (spec.has_seasonal() && spec.seasonal.variance.estimate)
    spec.seasonal.variance.value = W(L.seasonal, L.seasonal) / dT;
  if (spec.cycle.present && spec.cycle.variance.estimate) {
    const Eigen::Index c = L.cycle;
    const double w = W(c, c) + W(c + 1, c + 1);
    const double rho = spec.cycle.damping.value;
    if (rho < 1) {
      // Stationary start N(0, sigma^2/(1-rho^2) I) also depends on sigma^2.
      const double init = (1 - rho * rho) * (E0(c, c) + E0(c + 1, c + 1));
      spec.cycle.variance.value = (w + init) / (2 * dT + 2);
    } else {
      spec.cycle.variance.value = w / (2 * dT);
    }
  }
  if (spec.ar.order > 0 && spec.ar.variance.estimate) {
    const Eigen::Index c = L.ar, d = L.ar_dim;
    const Eigen::MatrixXd unit = build_ar_block(spec.ar.coefficients.head(d), 1.0).init_cov;
    const double init = (unit.ldlt().solve(E0.block(c, c, d, d))).trace();
    spec.ar.variance.value = (W(c, c) + init) / (dT + static_cast<double>(d));
  }
  if (spec.obs_variance.estimate) {
    const Eigen::RowVectorXd a = model.obs_maps.front();
    double sum = 0;
    Eigen::Index n = 0;
    for (Eigen::Index t = 0; t < T; ++t) {
      if (std::isnan(obs(0, t))) continue;
      const double e = obs(0, t) - a.dot(s.smoothed_means[t]);
      sum += e * e + a * s.smoothed_covs[t] * a.transpose();
      ++n;
    }
    if (n > 0) spec.obs_variance.value = sum / static_cast<double>(n);
  }
}

}  // namespace

Eigen::VectorXd DecompositionResult::signal() const {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(observed.size());
  for (const auto* c : {&trend, &seasonal, &cycle, &irregular})
    if (c->present) s += c->path.values;
  return s;
}

DecompositionResult decompose(const ComponentSpec& spec, const TimeSeries& y, const FitConfig& config) {
  y.validate();
  const auto sm = assemble_model(spec, diffuse_variance(y, config));
  const auto obs = to_observations(y);
  auto s = kalman_smoother(sm.model, obs);
  const Eigen::Index T = y.size();

  // Noise-free blocks follow their transition exactly; the RTS recursion only does so up to roundoff
  // amplified by the diffuse prior, so rebuild them from the first smoothed state.
  auto propagate = [&](Eigen::Index offset, Eigen::Index dim) {
    const Eigen::MatrixXd F = sm.model.transition.block(offset, offset, dim, dim);
    Eigen::VectorXd x = s.smoothed_means[0].segment(offset, dim);
    for (Eigen::Index t = 1; t < T; ++t) {
      x = F * x;
      s.smoothed_means[t].segment(offset, dim) = x;
    }
  };
  if (spec.has_seasonal() && spec.seasonal.variance.value == 0.0)
    propagate(sm.layout.seasonal,
              spec.seasonal.variant == SeasonalVariant::running_sum ? spec.seasonal.period - 1 : spec.seasonal.period);
  if (spec.cycle.present && spec.cycle.variance.value == 0.0) propagate(sm.layout.cycle, 2);

  DecompositionResult r;
  r.observed = y;
  r.fitted_spec = spec;
  auto extract = [&](Eigen::Index offset, ComponentPath& out, const char* suffix) {
    out.present = offset >= 0;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(T), var = Eigen::VectorXd::Zero(T);
    if (out.present) {
      for (Eigen::Index t = 0; t < T; ++t) {
        mean[t] = s.smoothed_means[t][offset];
        var[t] = s.smoothed_covs[t](offset, offset);
      }
    }
    out.path = TimeSeries(mean, y.start, y.step_months, y.label + suffix);
    out.variance = var;
  };
  extract(sm.layout.trend, r.trend, ":trend");
  extract(sm.layout.seasonal, r.seasonal, ":seasonal");
  extract(sm.layout.cycle, r.cycle, ":cycle");
  extract(sm.layout.ar, r.irregular, ":irregular");

  const Eigen::VectorXd signal = r.signal();
  r.observation_error.resize(T);
  for (Eigen::Index t = 0; t < T; ++t)
    r.observation_error[t] = y.missing[t] ? std::numeric_limits<double>::quiet_NaN() : y.values[t] - signal[t];

  r.log_likelihood = s.filter.log_likelihood;
  r.n_effective = s.filter.n_effective;
  r.n_params = spec.free_parameter_count();
  r.aic = -2 * r.log_likelihood + 2 * r.n_params;
  r.bic = -2 * r.log_likelihood + r.n_params * std::log(static_cast<double>(std::max<Eigen::Index>(r.n_effective, 1)));

  std::vector<double> standardized;
  Eigen::Index seen = 0;
  for (Eigen::Index t = 0; t < T; ++t) {
    if (s.filter.innovations[t].size() == 0) continue;
    if (seen++ < sm.model.n_diffuse) continue;
    standardized.push_back(s.filter.innovations[t][0] / std::sqrt(s.filter.innovation_covs[t](0, 0)));
  }
  const Eigen::VectorXd res = Eigen::Map<Eigen::VectorXd>(standardized.data(), static_cast<Eigen::Index>(standardized.size()));
  r.diagnostics.n_residuals = res.size();
  r.diagnostics.ljung_box = ljung_box(res, config.ljung_box_lags);
  r.diagnostics.normality = jarque_bera(res);
  return r;
}

EmTrace em_fit(const ComponentSpec& spec, const TimeSeries& y, int iterations, const FitConfig& config) {
  const double diffuse = diffuse_variance(y, config);
  const auto obs = to_observations(y);
  EmTrace trace;
  trace.spec = spec;
  for (int it = 0; it <= iterations; ++it) {
    const auto sm = assemble_model(trace.spec, diffuse);
    const auto s = kalman_smoother(sm.model, obs);
    trace.log_likelihoods.push_back(s.filter.full_log_likelihood);
    if (it == iterations) break;
    m_step(trace.spec, sm, s, obs);
  }
  return trace;
}

DecompositionResult fit_mle(const ComponentSpec& spec, const TimeSeries& y, const FitConfig& config) {
  spec.validate();
  y.validate();
  const Eigen::Index T = y.size();
  if (y.observed_count() < 4 * state_dim(spec))
    throw InvalidArgument("series too short: need at least 4x the state dimension (" +
                          std::to_string(4 * state_dim(spec)) + ") observed points");
  const double var = data_variance(y);
  const double diffuse = diffuse_variance(y, config);
  const auto obs = to_observations(y);
  std::vector<std::string> warnings;

  ComponentSpec start = with_starts(spec, var);
  std::vector<ComponentSpec> candidates;
  if (start.cycle.present && start.cycle.frequency.estimate) {
    const double lo = config.min_period;
    const double hi = std::max(lo * 1.5, static_cast<double>(T) * config.max_period_fraction);
    const int n = std::max(1, config.frequency_grid);
    for (int i = 0; i < n; ++i) {
      const double period = n == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
      ComponentSpec c = start;
      c.cycle.frequency.value = std::min(2 * kPi / period, kPi * (1 - 1e-6));
      candidates.push_back(c);
    }
  } else {
    candidates.push_back(start);
  }

  std::vector<std::pair<double, ComponentSpec>> warmed;
  for (const auto& c : candidates) {
    ComponentSpec w = c;
    try {
      if (config.em_iterations > 0) w = em_fit(c, y, config.em_iterations, config).spec;
    } catch (const Error&) {
      w = c;
    }
    warmed.emplace_back(safe_log_likelihood(w, obs, diffuse), w);
  }
  std::stable_sort(warmed.begin(), warmed.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  if (!std::isfinite(warmed.front().first))
    throw FitError("non-finite log-likelihood at the initial point; consider rescaling the series");

  ComponentSpec best = warmed.front().second;
  bool converged = true;
  int iterations = 0;
  const ParameterMap map(best);
  if (map.size() > 0) {
    auto objective = [&](const Eigen::VectorXd& theta) { return -safe_log_likelihood(map.from_theta(theta), obs, diffuse); };
    // Restart the simplex from the incumbent until a full restart stops improving.
    auto search = [&](Eigen::VectorXd theta) {
      double value = objective(theta);
      bool done = false;
      int used = 0;
      while (used < config.max_iterations) {
        SimplexOptions opts;
        opts.max_iterations = config.max_iterations - used;
        opts.relative_tolerance = config.tolerance;
        opts.steps = map.initial_steps();
        const auto res = nelder_mead(objective, theta, opts);
        used += std::max(res.iterations, 1);
        const double change = std::abs(value - res.value) / (std::abs(value) + 1e-300);
        if (res.value < value) {
          theta = res.argmin;
          value = res.value;
        }
        if (res.converged && change < config.tolerance) {
          done = true;
          break;
        }
      }
      iterations += used;
      return std::tuple{theta, value, done};
    };

    const double initial_value = -warmed.front().first;
    auto [theta, value, done] = search(map.to_theta(best));
    converged = done;
    auto consider = [&](const Eigen::VectorXd& from) {
      auto [t, v, d] = search(from);
      if (v < value - 1e-9 * std::abs(value)) {
        theta = t;
        value = v;
        converged = d;
      }
    };
    const int others = std::min<int>(config.extra_starts, static_cast<int>(warmed.size()) - 1);
    for (int k = 1; k <= others; ++k)
      if (std::isfinite(warmed[k].first)) consider(map.to_theta(warmed[k].second));
    // Variances sitting on the boundary are hard to reach from the interior in log coordinates.
    for (Eigen::Index i : map.variance_indices()) {
      Eigen::VectorXd probe = theta;
      probe[i] = std::log(1e-12 * var);
      consider(probe);
    }
    if (!(value < initial_value) && !converged) warnings.push_back("simplex search did not improve the starting point");
    best = map.from_theta(theta);
  }

  DecompositionResult r = decompose(best, y, config);
  r.converged = converged;
  r.iterations = iterations;
  if (!converged) warnings.push_back("maximum iterations reached before convergence");
  r.warnings = std::move(warnings);
  return r;
}

}  // namespace sstate::structural
