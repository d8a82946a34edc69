#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include "mstrack/types.hpp"

namespace mstrack {

/**
 * Double-integrator transition shared by targets and sensors:
 *
 *   x_t = F x_{t-1} + G a_t,   F = [I dt*I; 0 I],   G = [dt^2/2 I; dt I]
 *
 * States are stacked position-then-velocity, so entry i and entry d+i belong
 * to the same axis.
 */
template <typename Scalar>
struct TransitionModel {
  StateMatrix<Scalar> F;
  InputMatrix<Scalar> G;
  Scalar dt{};
  int d{};

  int state_dim() const { return 2 * d; }
};

/** Zero-mean acceleration covariance matching a uniform law on [-a_max, a_max]^d. */
template <typename Scalar>
struct ProcessNoiseCov {
  AxisMatrix<Scalar> Q;
  Scalar a_max{};
};

template <typename Scalar>
TransitionModel<Scalar> make_transition(Scalar dt, int d) {
  if (!valid_dimension(d)) {
    throw std::invalid_argument("spatial dimension must be 2 or 3, got " + std::to_string(d));
  }
  if (!(dt > Scalar(0)) || !std::isfinite(static_cast<double>(dt))) {
    throw std::invalid_argument("sampling period must be positive and finite");
  }
  TransitionModel<Scalar> model;
  model.dt = dt;
  model.d = d;
  model.F = StateMatrix<Scalar>::Identity(2 * d, 2 * d);
  model.F.topRightCorner(d, d).diagonal().setConstant(dt);
  model.G = InputMatrix<Scalar>::Zero(2 * d, d);
  model.G.topRows(d).diagonal().setConstant(Scalar(0.5) * dt * dt);
  model.G.bottomRows(d).diagonal().setConstant(dt);
  return model;
}

template <typename Scalar>
StateVector<Scalar> propagate(const StateVector<Scalar>& state, const AxisVector<Scalar>& accel,
                              const TransitionModel<Scalar>& model) {
  if (state.size() != model.state_dim() || accel.size() != model.d) {
    throw std::invalid_argument("propagate: dimension mismatch");
  }
  return model.F * state + model.G * accel;
}

template <typename Scalar>
ProcessNoiseCov<Scalar> process_noise_cov(Scalar a_max, int d) {
  if (!valid_dimension(d)) {
    throw std::invalid_argument("spatial dimension must be 2 or 3, got " + std::to_string(d));
  }
  if (!(a_max > Scalar(0)) || !std::isfinite(static_cast<double>(a_max))) {
    throw std::invalid_argument("a_max must be positive and finite");
  }
  return {AxisMatrix<Scalar>::Identity(d, d) * (a_max * a_max / Scalar(3)), a_max};
}

/** F^power; F is unipotent so F^power = [I power*dt*I; 0 I]. */
template <typename Scalar>
StateMatrix<Scalar> transition_power(const TransitionModel<Scalar>& model, int power) {
  StateMatrix<Scalar> out = StateMatrix<Scalar>::Identity(model.state_dim(), model.state_dim());
  out.topRightCorner(model.d, model.d).diagonal().setConstant(Scalar(power) * model.dt);
  return out;
}

/**
 * State after applying inputs[0], ..., inputs[k-1] in order. Input i (1-based)
 * reaches the final state through F^{k-i} G, identical to k calls of propagate.
 */
template <typename Scalar>
StateVector<Scalar> k_step_state(const StateVector<Scalar>& initial,
                                 std::span<const AxisVector<Scalar>> inputs,
                                 const TransitionModel<Scalar>& model) {
  const int k = static_cast<int>(inputs.size());
  if (k < 1) {
    throw std::invalid_argument("k_step_state: empty input sequence");
  }
  if (initial.size() != model.state_dim()) {
    throw std::invalid_argument("k_step_state: dimension mismatch");
  }
  StateVector<Scalar> out = transition_power(model, k) * initial;
  for (int i = 1; i <= k; ++i) {
    const auto& a = inputs[static_cast<std::size_t>(i - 1)];
    if (a.size() != model.d) {
      throw std::invalid_argument("k_step_state: input dimension mismatch");
    }
    out.noalias() += transition_power(model, k - i) * (model.G * a);
  }
  return out;
}

template <typename Scalar>
auto position(const StateVector<Scalar>& x, int d) {
  return x.head(d);
}

template <typename Scalar>
auto velocity(const StateVector<Scalar>& x, int d) {
  return x.segment(d, d);
}

}  // namespace mstrack
