#include "mstrack/estimation.hpp"

#include <cmath>
#include <limits>

namespace mstrack {

StateMat weight_matrix(double dt, int d) {
  if (!(dt > 0)) throw std::invalid_argument("weight_matrix: dt must be positive");
  if (!valid_dimension(d)) throw std::invalid_argument("weight_matrix: dimension must be 2 or 3");
  StateMat W = StateMat::Zero(2 * d, 2 * d);
  W.diagonal().head(d).setOnes();
  W.diagonal().tail(d).setConstant(dt);
  return W;
}

StateMat sensor_information(const MeasurementModel& model, const StateVec& x, const StateVec& s) {
  const StateVec g = mean_gradient(model, x, s);
  const double var = variance(model, x, s);
  StateMat info = g * g.transpose() / var;
  if (model.kind == SensorKind::Ranging && model.lambda != 0.0) {
    const StateVec h = variance_gradient(model, x, s);
    info.noalias() += 0.5 * h * h.transpose() / (var * var);
  }
  return info;
}

StateMat fisher_information(const StateVec& x, const SensorArray& sensors, SingularPolicy policy,
                            int* dropped) {
  StateMat info = StateMat::Zero(x.size(), x.size());
  for (int m = 0; m < sensors.size(); ++m) {
    try {
      info += sensor_information(sensors.models[m], x, sensors.state(m));
    } catch (const SingularGeometry&) {
      if (policy == SingularPolicy::Throw) throw;
      if (dropped) ++*dropped;
    }
  }
  return info;
}

StateMat prediction_noise(const TransitionModel<double>& model, const ProcessNoiseCov<double>& Q,
                          int k) {
  StateMat noise = StateMat::Zero(model.state_dim(), model.state_dim());
  StateMat Fi = StateMat::Identity(model.state_dim(), model.state_dim());
  for (int i = 1; i <= k; ++i) {
    const InputMat FG = Fi * model.G;
    noise.noalias() += FG * Q.Q * FG.transpose();
    Fi = model.F * Fi;
  }
  return 0.5 * (noise + noise.transpose());
}

Prediction predict(const Estimate& prior, int k, const TransitionModel<double>& model,
                   const ProcessNoiseCov<double>& Q) {
  if (k < 1) throw std::invalid_argument("predict: horizon must be at least 1");
  if (prior.x.size() != model.state_dim() || prior.cov.rows() != model.state_dim()) {
    throw std::invalid_argument("predict: dimension mismatch");
  }
  const StateMat Fk = transition_power(model, k);
  Prediction out;
  out.horizon = k;
  out.x = Fk * prior.x;
  out.cov = Fk * prior.cov * Fk.transpose() + prediction_noise(model, Q, k);
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

StateMat spd_inverse(const StateMat& m) {
  const auto n = m.rows();
  const StateMat identity = StateMat::Identity(n, n);
  Eigen::LLT<StateMat> llt(m);
  if (llt.info() == Eigen::Success) return llt.solve(identity);
  const double jitter = 1e-10 * m.trace() / static_cast<double>(n);
  llt.compute(m + jitter * identity);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("spd_inverse: matrix is not positive definite");
  }
  return llt.solve(identity);
}

double mle_objective(const Eigen::VectorXd& y, const StateVec& x, const StateVec& pred_x,
                     const StateMat& pred_info, const SensorArray& sensors) {
  if (y.size() != sensors.size()) throw std::invalid_argument("mle_objective: one measurement per sensor");
  double value = 0.0;
  try {
    for (int m = 0; m < sensors.size(); ++m) {
      const StateVec s = sensors.state(m);
      const double r = y(m) - mean(sensors.models[m], x, s);
      const double var = variance(sensors.models[m], x, s);
      value += r * r / var + std::log(var);
    }
  } catch (const SingularGeometry&) {
    return std::numeric_limits<double>::infinity();
  }
  const StateVec e = x - pred_x;
  return value + e.dot(pred_info * e);
}

namespace {

struct LocalModel {
  StateVec gradient;  // of mle_objective
  StateMat curvature; // J + Č^-1, half the expected Hessian
};

LocalModel local_model(const Eigen::VectorXd& y, const StateVec& x, const StateVec& pred_x,
                       const StateMat& pred_info, const SensorArray& sensors) {
  LocalModel lm{2.0 * pred_info * (x - pred_x), pred_info};
  for (int m = 0; m < sensors.size(); ++m) {
    const auto& model = sensors.models[m];
    const StateVec s = sensors.state(m);
    const double r = y(m) - mean(model, x, s);
    const double var = variance(model, x, s);
    const StateVec g = mean_gradient(model, x, s);
    const StateVec h = variance_gradient(model, x, s);
    lm.gradient += -2.0 * r / var * g + (1.0 - r * r / var) / var * h;
    lm.curvature.noalias() += g * g.transpose() / var + 0.5 * h * h.transpose() / (var * var);
  }
  return lm;
}

}  // namespace

MleResult mle_update(const Eigen::VectorXd& y, const Prediction& pred, const SensorArray& sensors,
                     const MleSettings& settings) {
  if (sensors.size() < 1) throw std::invalid_argument("mle_update: at least one measurement is required");
  if (y.size() != sensors.size()) throw std::invalid_argument("mle_update: one measurement per sensor");
  const StateMat pred_info = spd_inverse(pred.cov);

  MleResult result;
  StateVec x = pred.x;
  double value = mle_objective(y, x, pred.x, pred_info, sensors);
  if (!std::isfinite(value)) throw SingularGeometry("mle_update: prediction coincides with a sensor");
  result.objective_initial = value;

  double damping = settings.initial_damping;
  LocalModel lm = local_model(y, x, pred.x, pred_info, sensors);
  int iter = 0;
  for (; iter < settings.max_iterations; ++iter) {
    StateMat A = lm.curvature;
    const double floor = 1e-12 * lm.curvature.diagonal().cwiseAbs().maxCoeff();
    A.diagonal() += damping * (lm.curvature.diagonal().cwiseAbs().array() + floor).matrix();
    const StateVec step = A.ldlt().solve(-0.5 * lm.gradient);
    if (!step.allFinite()) break;
    if (step.norm() < settings.step_tolerance * (1.0 + x.norm())) {
      result.converged = true;
      break;
    }
    const StateVec trial = x + step;
    const double trial_value = mle_objective(y, trial, pred.x, pred_info, sensors);
    if (trial_value < value) {
      x = trial;
      value = trial_value;
      damping = std::max(damping / 10.0, 1e-12);
      lm = local_model(y, x, pred.x, pred_info, sensors);
    } else {
      damping *= 10.0;
    }
  }
  result.iterations = iter;
  result.objective_final = value;
  result.estimate.x = x;
  result.estimate.cov = spd_inverse(fisher_information(x, sensors) + pred_info);
  result.estimate.cov = 0.5 * (result.estimate.cov + result.estimate.cov.transpose());
  return result;
}

double crb_from_information(const StateMat& info, const StateMat& pred_info, const StateMat& W) {
  return (W * spd_inverse(info + pred_info)).trace();
}

double crb_scalar(const StateVec& x, const SensorArray& sensors, const StateMat& pred_cov,
                  const StateMat& W, SingularPolicy policy) {
  return crb_from_information(fisher_information(x, sensors, policy), spd_inverse(pred_cov), W);
}

}  // namespace mstrack
