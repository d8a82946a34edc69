#pragma once

#include "mstrack/dynamics.hpp"
#include "mstrack/measurement.hpp"

namespace mstrack {

struct Estimate {
  StateVec x;
  StateMat cov;
};

/// k-step prediction x̌ = F^k x̂ with its error covariance.
struct Prediction {
  StateVec x;
  StateMat cov;
  int horizon = 1;
};

/// What to do when a sensor sits on top of the evaluation point.
enum class SingularPolicy { Throw, Drop };

/// block-diag(I_d, dt I_d): velocity errors weighted as equivalent position errors.
StateMat weight_matrix(double dt, int d);

/// Information contributed by a single sensor; zero-free only when geometry is regular.
StateMat sensor_information(const MeasurementModel& model, const StateVec& x, const StateVec& s);

/**
 * Fisher information of the stacked Gaussian model at target state x.
 * With SingularPolicy::Drop, sensors at singular geometry contribute nothing
 * and are counted in *dropped.
 */
StateMat fisher_information(const StateVec& x, const SensorArray& sensors,
                            SingularPolicy policy = SingularPolicy::Throw, int* dropped = nullptr);

/// Accumulated process noise sum_{i=1..k} F^{i-1} G Q G^T F^{i-1}^T.
StateMat prediction_noise(const TransitionModel<double>& model, const ProcessNoiseCov<double>& Q,
                          int k);

Prediction predict(const Estimate& prior, int k, const TransitionModel<double>& model,
                   const ProcessNoiseCov<double>& Q);

/// Inverse of a symmetric positive definite matrix, with one jitter retry.
StateMat spd_inverse(const StateMat& m);

struct MleSettings {
  int max_iterations = 50;
  double step_tolerance = 1e-8;
  double initial_damping = 1e-3;
};

struct MleResult {
  Estimate estimate;
  bool converged = false;
  int iterations = 0;
  double objective_initial = 0.0;
  double objective_final = 0.0;
};

/**
 * Negative log-likelihood criterion (up to constants and a factor of two):
 * ||y - mu(x)||^2_{Sigma^-1} + ln|Sigma(x)| + ||x - x̌||^2_{Č^-1}.
 * Returns +inf at singular geometry.
 */
double mle_objective(const Eigen::VectorXd& y, const StateVec& x, const StateVec& pred_x,
                     const StateMat& pred_info, const SensorArray& sensors);

/**
 * Maximum-likelihood update from measurements y (one per sensor, id order) and
 * the prediction, solved by Levenberg-Marquardt with Fisher-scoring curvature.
 * The returned covariance is the plug-in bound (J(x̂) + Č^-1)^-1.
 */
MleResult mle_update(const Eigen::VectorXd& y, const Prediction& pred, const SensorArray& sensors,
                     const MleSettings& settings = {});

/// tr{W (J(x, s) + Č^-1)^-1}.
double crb_scalar(const StateVec& x, const SensorArray& sensors, const StateMat& pred_cov,
                  const StateMat& W, SingularPolicy policy = SingularPolicy::Throw);

/// Same bound from a precomputed information matrix and prediction information.
double crb_from_information(const StateMat& info, const StateMat& pred_info, const StateMat& W);

}  // namespace mstrack
