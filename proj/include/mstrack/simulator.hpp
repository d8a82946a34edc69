#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "mstrack/control.hpp"
#include "mstrack/dynamics.hpp"
#include "mstrack/estimation.hpp"
#include "mstrack/measurement.hpp"

namespace mstrack {

/// Validation failure naming the offending field, e.g. "targets/1/profile".
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::string path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

enum class ProfileKind { Constant, Piecewise, Arc, Waypoints };

struct AccelSegment {
  int start_step = 0;
  AxisVec accel;
};

/**
 * Scripted target acceleration. The acceleration for the transition out of
 * step t is profile_accel(profile, t, x_t, ...).
 *
 * - Constant: `accel` at every step.
 * - Piecewise: the last segment whose start_step <= t.
 * - Arc: constant-speed turn at `turn_rate` [rad/s] during [start_step, end_step),
 *   about `axis` in 3D (counter-clockwise in 2D); zero acceleration elsewhere.
 * - Waypoints: saturated PD steering toward each waypoint in turn, capped at
 *   `max_accel`; a waypoint is reached within `capture_radius`.
 */
struct AccelProfile {
  ProfileKind kind = ProfileKind::Constant;
  AxisVec accel;
  std::vector<AccelSegment> segments;
  double turn_rate = 0.0;
  AxisVec axis;
  int start_step = 0;
  int end_step = std::numeric_limits<int>::max();
  std::vector<AxisVec> waypoints;
  double max_accel = 1.0;
  double capture_radius = 10.0;
  double position_gain = 0.05;
  double velocity_gain = 0.5;
};

const char* to_string(ProfileKind kind);

struct SensorSpec {
  StateVec state;
  MeasurementModel model;
};

struct TargetSpec {
  StateVec state;
  AccelProfile profile;
};

enum class InitPolicy { TruthOffset, FixedPrior };

struct InitialEstimateSpec {
  InitPolicy policy = InitPolicy::TruthOffset;
  double offset_pos_sigma = 10.0;  // std of the drawn offset (truth_offset only)
  double offset_vel_sigma = 1.0;
  double prior_pos_sigma = 10.0;   // C0 = diag(prior_pos^2 I, prior_vel^2 I)
  double prior_vel_sigma = 1.0;
  std::optional<StateVec> fixed_state;  // fixed_prior only
};

struct Scenario {
  std::string name = "scenario";
  int d = 2;
  double dt = 1.0;
  int steps = 100;
  int horizon = 7;
  double a_max = 5.0;
  double u_max = 2.0;
  BoxBounds bounds;
  std::vector<SensorSpec> sensors;
  std::vector<TargetSpec> targets;
  ControlSettings controller;
  std::optional<double> lambda_override;
  int control_off_steps = 0;  // controls forced to zero while t < control_off_steps
  InitialEstimateSpec initial;
};

/// Throws ScenarioError on the first violated invariant.
void validate_scenario(const Scenario& scenario);

/// Progress through a waypoint list; other profiles are stateless.
struct ProfileCursor {
  std::size_t waypoint = 0;
};

AxisVec profile_accel(const AccelProfile& profile, int step, const StateVec& state,
                      const TransitionModel<double>& model, ProfileCursor& cursor);

/// True target states, indexed [target][t] for t = 0..steps-1.
std::vector<std::vector<StateVec>> truth_trajectories(const Scenario& scenario);

/// Sensor models with any lambda override applied.
std::vector<MeasurementModel> effective_models(const Scenario& scenario);

Estimate initial_estimate(const Scenario& scenario, int target, std::mt19937_64& rng);

/**
 * Benchmark bound along a realized episode: B_0 = (J_0 + C0^-1)^-1 and
 * B_t = (J_t + (F B_{t-1} F^T + G Q G^T)^-1)^-1, with J_t at the true state and
 * the realized sensor configuration. Indexed [t][target].
 */
std::vector<std::vector<StateMat>> compute_reference_crb(const Scenario& scenario,
                                                         const std::vector<std::vector<StateVec>>& truth,
                                                         const std::vector<Eigen::MatrixXd>& sensor_states);

struct TargetRow {
  int t = 0;
  int target = 0;
  StateVec truth;
  StateVec estimate;
  double pos_err = 0.0;
  double vel_err = 0.0;
  double crb_ref = 0.0;      // tr{W B_t}
  double crb_ref_pos = 0.0;  // trace of the position block of B_t
  double crb_est = 0.0;      // tr{W C_t}, the plug-in bound reported by the estimator
};

struct SensorRow {
  int t = 0;
  int sensor = 0;
  StateVec state;
  AxisVec control;
};

struct RunFlags {
  int solver_nonconverged = 0;
  int solver_infeasible = 0;
  int singular_events = 0;
  int mle_nonconverged = 0;
};

struct RunResult {
  std::uint64_t seed = 0;
  int steps = 0;
  int targets = 0;
  int sensors = 0;
  int d = 0;
  std::vector<TargetRow> target_rows;  // t-major, then target id
  std::vector<SensorRow> sensor_rows;  // t-major, then sensor id
  RunFlags flags;

  const TargetRow& target_row(int t, int n) const { return target_rows[static_cast<std::size_t>(t * targets + n)]; }
  const SensorRow& sensor_row(int t, int m) const { return sensor_rows[static_cast<std::size_t>(t * sensors + m)]; }
};

RunResult run_episode(const Scenario& scenario, std::uint64_t seed);

struct SummaryRow {
  int t = 0;
  int target = 0;
  double p10 = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  double mean_crb = 0.0;
};

struct McSummary {
  int runs = 0;
  std::vector<SummaryRow> rows;  // t-major, then target id
};

/// Linear interpolation between order statistics; q in [0, 1].
double percentile(std::vector<double> values, double q);

/// Runs seeds base_seed + i; results are ordered by run index whatever the thread count.
std::vector<RunResult> run_batch(const Scenario& scenario, int n_runs, std::uint64_t base_seed,
                                 int threads = 0);

McSummary summarize(const std::vector<RunResult>& runs);

McSummary run_monte_carlo(const Scenario& scenario, int n_runs, std::uint64_t base_seed, int threads = 0);

/// Worker count: TRACK_THREADS when set to a positive integer, else hardware concurrency.
int default_thread_count();

}  // namespace mstrack
