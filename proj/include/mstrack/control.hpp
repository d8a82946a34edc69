#pragma once

#include <span>
#include <vector>

#include "mstrack/dynamics.hpp"
#include "mstrack/estimation.hpp"
#include "mstrack/measurement.hpp"

namespace mstrack {

/// Box on sensor states; infinite entries are unconstrained.
struct BoxBounds {
  StateVec lower;
  StateVec upper;

  bool contains(const StateVec& s) const {
    return (s.array() >= lower.array()).all() && (s.array() <= upper.array()).all();
  }
};

/**
 * Joint control sequence U_t. Rows m*d .. m*d+d-1 hold sensor m, column i is
 * the input applied at step t+i+1.
 */
struct ControlPlan {
  int sensors = 0;
  int horizon = 0;
  int d = 0;
  Eigen::MatrixXd U;

  static ControlPlan zeros(int sensors, int horizon, int d) {
    return {sensors, horizon, d, Eigen::MatrixXd::Zero(sensors * d, horizon)};
  }

  AxisVec input(int sensor, int step) const { return U.block(sensor * d, step, d, 1); }
};

/**
 * Symmetric deterministic samples of the trajectory vector z = [x_t; a_1..a_k].
 * Column 0 of `points` is the center; columns l and l + d_z are the mirrored
 * pair center +/- sqrt(eta) * (column l of the lower Cholesky factor of P).
 */
struct SigmaPointSet {
  Eigen::VectorXd center;
  Eigen::MatrixXd spread;
  Eigen::MatrixXd points;
  double eta = 3.0;
  int horizon = 0;
  int d = 0;

  int dim() const { return static_cast<int>(center.size()); }
  int count() const { return static_cast<int>(points.cols()); }
};

SigmaPointSet sigma_points(const Estimate& est, const ProcessNoiseCov<double>& Q, int k, double eta);

/// Target state after the trajectory z, accelerations applied in order.
StateVec trajectory_endpoint(const Eigen::VectorXd& z, const TransitionModel<double>& model);

/// Per-axis bound whose box lies inside the Euclidean ball of radius u_max.
double relaxed_bound(double u_max, int d);

/// Sensor states after the full plan; column m is sensor m.
Eigen::MatrixXd plan_endpoints(const ControlPlan& plan, const Eigen::MatrixXd& sensor_states,
                               const TransitionModel<double>& model);

/// Sensor states after each step; entry i holds states at t+i+1, column per sensor.
std::vector<Eigen::MatrixXd> plan_states(const ControlPlan& plan, const Eigen::MatrixXd& sensor_states,
                                         const TransitionModel<double>& model);

/**
 * Sum over targets and sampled target endpoints of tr{W (J(x, s_end) + Č^-1)^-1},
 * as a function of the final sensor configuration s_end.
 */
class ExpectedCrbObjective {
 public:
  struct Target {
    std::vector<StateVec> endpoints;
    StateMat pred_info;
    double point_weight = 1.0;
  };

  ExpectedCrbObjective(std::vector<Target> targets, std::vector<MeasurementModel> models, StateMat W);

  /// Singular sensor-endpoint pairs are dropped and counted in *singular.
  double value(const Eigen::MatrixXd& final_states, int* singular = nullptr) const;

  /// Central finite differences with step rel_step * (1 + |s_j|); same shape as final_states.
  Eigen::MatrixXd gradient(const Eigen::MatrixXd& final_states, double rel_step) const;

  const std::vector<Target>& targets() const { return targets_; }

 private:
  std::vector<Target> targets_;
  std::vector<MeasurementModel> models_;
  StateMat W_;
};

/// Sigma-point expected CRB of plan U over all targets.
double objective(const ControlPlan& plan, std::span<const SigmaPointSet> sigma_sets,
                 const SensorArray& sensors, std::span<const StateMat> pred_covs, const StateMat& W,
                 const TransitionModel<double>& model, bool average = false);

/// Certainty-equivalent variant: one zero-acceleration trajectory per target.
double objective_point(const ControlPlan& plan, std::span<const StateVec> estimates,
                       const SensorArray& sensors, std::span<const StateMat> pred_covs,
                       const StateMat& W, const TransitionModel<double>& model);

enum class ControlMode { Robust, Point };

inline const char* to_string(ControlMode mode) {
  return mode == ControlMode::Robust ? "robust" : "point";
}

struct ControlSettings {
  ControlMode mode = ControlMode::Robust;
  double eta = 3.0;
  bool average_sigma = false;
  double barrier_initial = 1.0;
  double barrier_shrink = 0.2;
  int barrier_rounds = 6;
  double inner_tolerance = 1e-6;
  int max_inner_iterations = 200;
  double fd_relative_step = 1e-4;
};

struct PlanningProblem {
  TransitionModel<double> model;
  ProcessNoiseCov<double> Q;
  StateMat W;
  SensorArray sensors;
  std::vector<Estimate> targets;
  BoxBounds bounds;
  double u_max = 2.0;
  int horizon = 7;
};

struct ControlResult {
  ControlPlan plan;
  double objective = 0.0;
  double objective_zero = 0.0;  // coasting plan, NaN when coasting is infeasible
  bool feasible = true;         // false: best-effort plan that violates constraints
  bool converged = true;
  int singular_events = 0;
  int iterations = 0;
};

/**
 * Minimize the expected CRB over plans inside the relaxed input box and the
 * state box at every horizon step, via a log-barrier interior-point method with
 * quasi-Newton inner solves. `warm_start` is shifted by one column before use.
 */
ControlResult solve_control(const PlanningProblem& problem, const ControlSettings& settings = {},
                            const ControlPlan* warm_start = nullptr);

/// First column of the plan: the inputs applied now.
std::vector<AxisVec> step_control(const ControlPlan& plan);

/// Build the objective used by solve_control (exposed for diagnostics and tests).
ExpectedCrbObjective build_objective(const PlanningProblem& problem, const ControlSettings& settings);

}  // namespace mstrack
