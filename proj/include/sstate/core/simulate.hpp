#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

#include "sstate/core/errors.hpp"
#include "sstate/core/linalg.hpp"
#include "sstate/core/state_space_model.hpp"

namespace sstate {

template <typename Scalar>
struct Simulation {
  using Matrix = typename StateSpaceModel<Scalar>::Matrix;
  using Vector = typename StateSpaceModel<Scalar>::Vector;
  Vector initial_state;  // x(0)
  Matrix states;         // p x T, column t-1 is x(t)
  Matrix observations;   // q x T
};

/// Standard normal draws from a seeded 64-bit Mersenne twister.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

  double operator()() { return normal_(engine_); }

  template <typename Scalar = double>
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> vector(Eigen::Index n) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = static_cast<Scalar>((*this)());
    return v;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

/// Draws x(0) ~ N(mu, Sigma) and iterates the state and observation equations.
template <typename Scalar>
Simulation<Scalar> simulate(const StateSpaceModel<Scalar>& model, Eigen::Index length, std::uint64_t seed) {
  if (length < 1) throw InvalidArgument("simulate: length must be >= 1");
  model.validate(length);
  using Matrix = typename StateSpaceModel<Scalar>::Matrix;
  const Eigen::Index p = model.state_dim(), q = model.obs_dim();
  const Matrix init_factor = psd_factor<Scalar>(model.init_cov);
  const Matrix q_factor = psd_factor<Scalar>(model.state_noise_cov);
  const Matrix r_factor = psd_factor<Scalar>(model.obs_noise_cov);

  GaussianStream rng(seed);
  Simulation<Scalar> sim;
  sim.initial_state = model.init_mean + init_factor * rng.vector<Scalar>(p);
  sim.states.resize(p, length);
  sim.observations.resize(q, length);
  auto x = sim.initial_state;
  for (Eigen::Index t = 0; t < length; ++t) {
    x = (model.transition * x + q_factor * rng.vector<Scalar>(p)).eval();
    sim.states.col(t) = x;
    sim.observations.col(t) = model.obs_map(t) * x + r_factor * rng.vector<Scalar>(q);
  }
  return sim;
}

}  // namespace sstate
