#include "sstate/structural/blocks.hpp"

#include <cmath>
#include <numbers>

#include "sstate/core/linalg.hpp"

namespace sstate::structural {

namespace {

void require_variance(double v, const char* what) {
  if (!(v >= 0) || !std::isfinite(v)) throw InvalidArgument(std::string(what) + " must be a finite value >= 0");
}

StateBlock empty_block(Eigen::Index n) {
  StateBlock b;
  b.transition = Eigen::MatrixXd::Zero(n, n);
  b.noise_cov = Eigen::MatrixXd::Zero(n, n);
  b.obs_row = Eigen::RowVectorXd::Zero(n);
  b.obs_row[0] = 1.0;
  b.init_cov = Eigen::MatrixXd::Zero(n, n);
  b.diffuse_pattern = Eigen::MatrixXd::Zero(n, n);
  return b;
}

}  // namespace

int ComponentSpec::free_parameter_count() const {
  int n = obs_variance.estimate ? 1 : 0;
  if (trend && trend->variance.estimate) ++n;
  if (has_seasonal() && seasonal.variance.estimate) ++n;
  if (cycle.present) n += cycle.damping.estimate + cycle.frequency.estimate + cycle.variance.estimate;
  if (ar.order > 0) n += (ar.estimate_coefficients ? ar.order : 0) + (ar.variance.estimate ? 1 : 0);
  return n;
}

void ComponentSpec::validate() const {
  if (!trend && !has_seasonal() && !cycle.present && ar.order == 0)
    throw InvalidArgument("component spec needs at least one component");
  if (trend && trend->order != 1 && trend->order != 2) throw InvalidArgument("trend order must be 1 or 2");
  if (has_seasonal() && seasonal.period < 2) throw InvalidArgument("seasonal period must be >= 2");
  if (cycle.present) {
    const double rho = cycle.damping.value, lambda = cycle.frequency.value;
    if (!cycle.damping.estimate && !(rho > 0 && rho <= 1)) throw InvalidArgument("cycle damping must lie in (0,1]");
    if (!cycle.frequency.estimate && !(lambda > 0 && lambda <= std::numbers::pi))
      throw InvalidArgument("cycle frequency must lie in (0,pi]");
  }
  if (ar.order < 0 || ar.order > 2) throw InvalidArgument("AR order must be 0, 1 or 2");
  auto check = [](const Parameter& p, const char* what) {
    if (!std::isfinite(p.value) || p.value < 0) throw InvalidArgument(std::string(what) + " must be >= 0");
  };
  check(obs_variance, "observation variance");
  if (trend) check(trend->variance, "trend variance");
  if (has_seasonal()) check(seasonal.variance, "seasonal variance");
  if (cycle.present) check(cycle.variance, "cycle variance");
  if (ar.order > 0) check(ar.variance, "AR variance");
}

std::string to_string(SeasonalVariant v) {
  switch (v) {
    case SeasonalVariant::none: return "none";
    case SeasonalVariant::running_sum: return "running-sum";
    case SeasonalVariant::seasonal_difference: return "seasonal-difference";
  }
  return "none";
}

SeasonalVariant seasonal_variant_from_string(const std::string& s) {
  if (s == "none") return SeasonalVariant::none;
  if (s == "running-sum") return SeasonalVariant::running_sum;
  if (s == "seasonal-difference") return SeasonalVariant::seasonal_difference;
  throw InvalidArgument("unknown seasonal variant '" + s + "'");
}

StateBlock build_trend_block(int order, double variance) {
  require_variance(variance, "trend variance");
  if (order == 1) {
    StateBlock b = empty_block(1);
    b.transition(0, 0) = 1;
    b.noise_cov(0, 0) = variance;
    b.diffuse_pattern(0, 0) = 1;
    b.n_diffuse = 1;
    return b;
  }
  if (order == 2) {
    // (level, slope); noise enters the slope only.
    StateBlock b = empty_block(2);
    b.transition << 1, 1, 0, 1;
    b.noise_cov(1, 1) = variance;
    b.diffuse_pattern.setIdentity();
    b.n_diffuse = 2;
    return b;
  }
  throw InvalidArgument("trend order must be 1 or 2");
}

StateBlock build_seasonal_block(SeasonalVariant variant, int period, double variance) {
  require_variance(variance, "seasonal variance");
  if (period < 2) throw InvalidArgument("seasonal period must be >= 2");
  const Eigen::Index s = period;
  if (variant == SeasonalVariant::running_sum) {
    // State (S_t, ..., S_{t-s+2}); S_{t+1} = -(S_t + ... + S_{t-s+2}) + noise,
    // so every window of s values sums to the current disturbance.
    StateBlock b = empty_block(s - 1);
    b.transition.row(0).setConstant(-1);
    for (Eigen::Index i = 1; i < s - 1; ++i) b.transition(i, i - 1) = 1;
    b.noise_cov(0, 0) = variance;
    b.diffuse_pattern.setIdentity();
    b.n_diffuse = s - 1;
    return b;
  }
  if (variant == SeasonalVariant::seasonal_difference) {
    // State (S_t, ..., S_{t-s+1}); S_{t+1} = S_{t+1-s} + noise. The initial
    // pattern is confined to zero-sum vectors, leaving s-1 free initial states.
    StateBlock b = empty_block(s);
    b.transition(0, s - 1) = 1;
    for (Eigen::Index i = 1; i < s; ++i) b.transition(i, i - 1) = 1;
    b.noise_cov(0, 0) = variance;
    b.diffuse_pattern = Eigen::MatrixXd::Identity(s, s) - Eigen::MatrixXd::Constant(s, s, 1.0 / s);
    b.n_diffuse = s - 1;
    return b;
  }
  throw InvalidArgument("seasonal block requested with variant 'none'");
}

StateBlock build_cycle_block(double damping, double frequency, double variance) {
  require_variance(variance, "cycle variance");
  if (!(damping > 0 && damping <= 1)) throw InvalidArgument("cycle damping must lie in (0,1]");
  if (!(frequency > 0 && frequency <= std::numbers::pi)) throw InvalidArgument("cycle frequency must lie in (0,pi]");
  StateBlock b = empty_block(2);
  const double c = std::cos(frequency), s = std::sin(frequency);
  b.transition << c, s, -s, c;
  b.transition *= damping;
  b.noise_cov = variance * Eigen::MatrixXd::Identity(2, 2);
  if (damping < 1) {
    b.init_cov = variance / (1 - damping * damping) * Eigen::MatrixXd::Identity(2, 2);
  } else {
    b.diffuse_pattern.setIdentity();
    b.n_diffuse = 2;
  }
  return b;
}

StateBlock build_ar_block(const Eigen::VectorXd& coefficients, double variance) {
  require_variance(variance, "AR variance");
  const Eigen::Index n = coefficients.size();
  if (n < 1 || n > 2) throw InvalidArgument("AR order must be 1 or 2");
  StateBlock b = empty_block(n);
  b.transition.row(0) = coefficients.transpose();
  if (n == 2) b.transition(1, 0) = 1;
  b.noise_cov(0, 0) = variance;
  b.init_cov = stationary_covariance<double>(b.transition, b.noise_cov);
  return b;
}

StructuralModel assemble_model(const ComponentSpec& spec, double diffuse_variance) {
  spec.validate();
  std::vector<StateBlock> blocks;
  ComponentLayout layout;
  Eigen::Index offset = 0;
  auto add = [&](StateBlock b, Eigen::Index& where, Eigen::Index& dim) {
    where = offset;
    dim = b.dim();
    offset += b.dim();
    blocks.push_back(std::move(b));
  };
  if (spec.trend) add(build_trend_block(spec.trend->order, spec.trend->variance.value), layout.trend, layout.trend_dim);
  if (spec.has_seasonal())
    add(build_seasonal_block(spec.seasonal.variant, spec.seasonal.period, spec.seasonal.variance.value),
        layout.seasonal, layout.seasonal_dim);
  if (spec.cycle.present)
    add(build_cycle_block(spec.cycle.damping.value, spec.cycle.frequency.value, spec.cycle.variance.value),
        layout.cycle, layout.cycle_dim);
  if (spec.ar.order > 0)
    add(build_ar_block(spec.ar.coefficients.head(spec.ar.order), spec.ar.variance.value), layout.ar, layout.ar_dim);

  const Eigen::Index p = offset;
  StructuralModel out;
  out.layout = layout;
  auto& m = out.model;
  m.transition = Eigen::MatrixXd::Zero(p, p);
  m.state_noise_cov = Eigen::MatrixXd::Zero(p, p);
  m.init_cov = Eigen::MatrixXd::Zero(p, p);
  m.init_mean = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(1, p);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    const Eigen::Index d = b.dim();
    m.transition.block(at, at, d, d) = b.transition;
    m.state_noise_cov.block(at, at, d, d) = b.noise_cov;
    m.init_cov.block(at, at, d, d) = b.init_cov + diffuse_variance * b.diffuse_pattern;
    a.block(0, at, 1, d) = b.obs_row;
    m.n_diffuse += b.n_diffuse;
    at += d;
  }
  m.obs_maps = {a};
  m.obs_noise_cov = Eigen::MatrixXd::Constant(1, 1, spec.obs_variance.value);
  return out;
}

}  // namespace sstate::structural
