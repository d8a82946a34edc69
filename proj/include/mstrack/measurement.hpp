#pragma once

#include <cmath>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mstrack/types.hpp"

namespace mstrack {

/// Below this target-sensor distance [m] the mean functions are not differentiable.
inline constexpr double kSingularDistance = 1e-6;

class SingularGeometry : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SensorKind { Ranging, Doppler };

/**
 * Parameters of one sensor's Gaussian measurement model.
 *
 * Ranging sensors report round-trip time [s] with variance
 * (sigma_range/c)^2 (1 + lambda mu^2), mu being the mean round-trip time.
 * Doppler sensors report a frequency shift [Hz] with constant variance.
 */
struct MeasurementModel {
  SensorKind kind = SensorKind::Ranging;
  double c = 3e8;
  double sigma_range = 1.0;
  double lambda = 0.01;
  double carrier_hz = 2.3e9;
  double sigma_doppler = 1.0;

  static MeasurementModel ranging(double sigma_range = 1.0, double lambda = 0.01,
                                  double c = 3e8) {
    MeasurementModel m;
    m.kind = SensorKind::Ranging;
    m.sigma_range = sigma_range;
    m.lambda = lambda;
    m.c = c;
    return m;
  }

  static MeasurementModel doppler(double carrier_hz = 2.3e9, double sigma_doppler = 1.0,
                                  double c = 3e8) {
    MeasurementModel m;
    m.kind = SensorKind::Doppler;
    m.carrier_hz = carrier_hz;
    m.sigma_doppler = sigma_doppler;
    m.c = c;
    return m;
  }

  void validate() const {
    if (!(c > 0)) throw std::invalid_argument("measurement model: c must be positive");
    if (kind == SensorKind::Ranging) {
      if (!(sigma_range > 0)) throw std::invalid_argument("measurement model: sigma_range must be positive");
      if (!(lambda >= 0)) throw std::invalid_argument("measurement model: lambda must be nonnegative");
    } else {
      if (!(carrier_hz > 0)) throw std::invalid_argument("measurement model: carrier_hz must be positive");
      if (!(sigma_doppler > 0)) throw std::invalid_argument("measurement model: sigma_doppler must be positive");
    }
  }
};

inline const char* to_string(SensorKind kind) {
  return kind == SensorKind::Ranging ? "ranging" : "doppler";
}

/// Sensor models with their current states; column m of `states` is sensor m.
struct SensorArray {
  std::vector<MeasurementModel> models;
  Eigen::MatrixXd states;

  int size() const { return static_cast<int>(models.size()); }
  StateVec state(int m) const { return states.col(m); }
};

/// One scalar observation y^{m,n}_t. Association to a target is given.
struct Measurement {
  double value = 0.0;
  int sensor_id = 0;
  int target_id = 0;
  int time_index = 0;
};

/// Stacked Gaussian model for one target: mean and diagonal covariance.
struct StackedModel {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;

  Eigen::MatrixXd covariance() const { return variance.asDiagonal(); }
};

namespace detail {

template <typename Scalar>
struct Relative {
  AxisVector<Scalar> dp;  // target minus sensor position
  AxisVector<Scalar> dv;  // target minus sensor velocity
  Scalar range;
};

template <typename Scalar>
Relative<Scalar> relative(const StateVector<Scalar>& x, const StateVector<Scalar>& s) {
  if (x.size() != s.size() || (x.size() != 4 && x.size() != 6)) {
    throw std::invalid_argument("measurement: target/sensor state dimension mismatch");
  }
  const int d = static_cast<int>(x.size()) / 2;
  Relative<Scalar> r{x.head(d) - s.head(d), x.segment(d, d) - s.segment(d, d), Scalar(0)};
  r.range = r.dp.norm();
  if (!(r.range >= Scalar(kSingularDistance))) {
    throw SingularGeometry("target and sensor positions coincide (distance " +
                           std::to_string(static_cast<double>(r.range)) + " m)");
  }
  return r;
}

}  // namespace detail

template <typename Scalar>
Scalar mean_rtt(const StateVector<Scalar>& x, const StateVector<Scalar>& s,
                const MeasurementModel& model) {
  const auto r = detail::relative(x, s);
  return Scalar(2.0 / model.c) * r.range;
}

template <typename Scalar>
Scalar mean_doppler(const StateVector<Scalar>& x, const StateVector<Scalar>& s,
                    const MeasurementModel& model) {
  const auto r = detail::relative(x, s);
  return -Scalar(model.carrier_hz / model.c) * r.dp.dot(r.dv) / r.range;
}

template <typename Scalar>
Scalar mean(const MeasurementModel& model, const StateVector<Scalar>& x,
            const StateVector<Scalar>& s) {
  return model.kind == SensorKind::Ranging ? mean_rtt(x, s, model) : mean_doppler(x, s, model);
}

template <typename Scalar>
Scalar variance(const MeasurementModel& model, const StateVector<Scalar>& x,
                const StateVector<Scalar>& s) {
  if (model.kind == SensorKind::Doppler) {
    return Scalar(model.sigma_doppler * model.sigma_doppler);
  }
  const Scalar base = Scalar(model.sigma_range * model.sigma_range / (model.c * model.c));
  if (model.lambda == 0.0) return base;
  const Scalar mu = mean_rtt(x, s, model);
  return base * (Scalar(1) + Scalar(model.lambda) * mu * mu);
}

/// Gradient of the mean with respect to the 2d target state.
template <typename Scalar>
StateVector<Scalar> mean_gradient(const MeasurementModel& model, const StateVector<Scalar>& x,
                                  const StateVector<Scalar>& s) {
  const auto r = detail::relative(x, s);
  const int d = static_cast<int>(r.dp.size());
  StateVector<Scalar> grad(2 * d);
  const AxisVector<Scalar> unit = r.dp / r.range;
  if (model.kind == SensorKind::Ranging) {
    grad.head(d) = Scalar(2.0 / model.c) * unit;
    grad.tail(d).setZero();
  } else {
    // mu = -k (dp . dv) / |dp|
    const Scalar k = Scalar(model.carrier_hz / model.c);
    const Scalar radial = unit.dot(r.dv);
    grad.head(d) = -k * (r.dv - radial * unit) / r.range;
    grad.tail(d) = -k * unit;
  }
  return grad;
}

/// Gradient of the noise variance with respect to the 2d target state.
template <typename Scalar>
StateVector<Scalar> variance_gradient(const MeasurementModel& model, const StateVector<Scalar>& x,
                                      const StateVector<Scalar>& s) {
  StateVector<Scalar> grad = StateVector<Scalar>::Zero(x.size());
  if (model.kind == SensorKind::Doppler) {
    detail::relative(x, s);
    return grad;
  }
  const auto r = detail::relative(x, s);
  if (model.lambda == 0.0) return grad;
  const int d = static_cast<int>(r.dp.size());
  const Scalar base = Scalar(model.sigma_range * model.sigma_range / (model.c * model.c));
  const Scalar mu = Scalar(2.0 / model.c) * r.range;
  grad.head(d) = base * Scalar(model.lambda) * Scalar(2) * mu * Scalar(2.0 / model.c) * (r.dp / r.range);
  return grad;
}

/// Stack the mean and variance of every sensor in `sensors` (id order) for target x.
inline StackedModel stack(const SensorArray& sensors, const StateVec& x) {
  const int count = sensors.size();
  if (count < 1) throw std::invalid_argument("stack: at least one sensor is required");
  StackedModel out{Eigen::VectorXd(count), Eigen::VectorXd(count)};
  for (int m = 0; m < count; ++m) {
    const StateVec s = sensors.state(m);
    out.mean(m) = mean(sensors.models[m], x, s);
    out.variance(m) = variance(sensors.models[m], x, s);
  }
  return out;
}

/// Draw y ~ N(mean, variance). Consumes exactly one normal variate from `rng`.
template <typename Rng>
Measurement sample(Rng& rng, const MeasurementModel& model, const StateVec& x, const StateVec& s,
                   int sensor_id = 0, int target_id = 0, int time_index = 0) {
  const double mu = mean(model, x, s);
  const double sd = std::sqrt(variance(model, x, s));
  std::normal_distribution<double> normal(0.0, 1.0);
  return {mu + sd * normal(rng), sensor_id, target_id, time_index};
}

}  // namespace mstrack
