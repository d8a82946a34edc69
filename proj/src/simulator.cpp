#include "mstrack/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

namespace mstrack {

const char* to_string(ProfileKind kind) {
  switch (kind) {
    case ProfileKind::Constant: return "constant";
    case ProfileKind::Piecewise: return "piecewise";
    case ProfileKind::Arc: return "arc";
    case ProfileKind::Waypoints: return "waypoints";
  }
  return "constant";
}

namespace {

std::string field(const std::string& base, std::size_t index, const std::string& rest = {}) {
  std::string out = base + "/" + std::to_string(index);
  if (!rest.empty()) out += "/" + rest;
  return out;
}

void require(bool ok, const std::string& path, const std::string& message) {
  if (!ok) throw ScenarioError(path, message);
}

bool sized(const StateVec& v, int n) { return v.size() == n && v.allFinite(); }

void validate_profile(const AccelProfile& p, int d, const std::string& path) {
  switch (p.kind) {
    case ProfileKind::Constant:
      require(p.accel.size() == d && p.accel.allFinite(), path + "/accel", "expected a finite length-d vector");
      break;
    case ProfileKind::Piecewise:
      require(!p.segments.empty(), path + "/segments", "at least one segment is required");
      for (std::size_t i = 0; i < p.segments.size(); ++i) {
        require(p.segments[i].accel.size() == d && p.segments[i].accel.allFinite(),
                field(path + "/segments", i, "accel"), "expected a finite length-d vector");
        require(i == 0 || p.segments[i].start_step > p.segments[i - 1].start_step,
                field(path + "/segments", i, "start_step"), "segments must be in increasing start order");
      }
      break;
    case ProfileKind::Arc:
      require(std::isfinite(p.turn_rate), path + "/turn_rate", "must be finite");
      require(p.start_step >= 0 && p.end_step > p.start_step, path + "/end_step", "window must be nonempty");
      if (d == 3) {
        require(p.axis.size() == 3 && p.axis.allFinite() && p.axis.norm() > 0, path + "/axis",
                "expected a nonzero length-3 vector");
      }
      break;
    case ProfileKind::Waypoints:
      require(!p.waypoints.empty(), path + "/waypoints", "at least one waypoint is required");
      for (std::size_t i = 0; i < p.waypoints.size(); ++i) {
        require(p.waypoints[i].size() == d && p.waypoints[i].allFinite(), field(path + "/waypoints", i),
                "expected a finite length-d vector");
      }
      require(p.max_accel > 0, path + "/max_accel", "must be positive");
      require(p.capture_radius > 0, path + "/capture_radius", "must be positive");
      require(p.position_gain >= 0 && p.velocity_gain >= 0, path, "gains must be nonnegative");
      break;
  }
}

}  // namespace

AxisVec profile_accel(const AccelProfile& profile, int step, const StateVec& state,
                      const TransitionModel<double>& model, ProfileCursor& cursor) {
  const int d = model.d;
  switch (profile.kind) {
    case ProfileKind::Constant:
      return profile.accel;
    case ProfileKind::Piecewise: {
      AxisVec a = AxisVec::Zero(d);
      for (const auto& seg : profile.segments) {
        if (seg.start_step <= step) a = seg.accel;
      }
      return a;
    }
    case ProfileKind::Arc: {
      if (step < profile.start_step || step >= profile.end_step) return AxisVec::Zero(d);
      // Rotate the velocity by turn_rate * dt; speed is preserved exactly.
      const AxisVec v = state.segment(d, d);
      const double angle = profile.turn_rate * model.dt;
      AxisVec rotated(d);
      if (d == 2) {
        rotated << std::cos(angle) * v(0) - std::sin(angle) * v(1), std::sin(angle) * v(0) + std::cos(angle) * v(1);
      } else {
        const Eigen::Vector3d k = Eigen::Vector3d(profile.axis).normalized();
        const Eigen::Vector3d v3 = v;
        rotated = v3 * std::cos(angle) + k.cross(v3) * std::sin(angle) + k * k.dot(v3) * (1.0 - std::cos(angle));
      }
      return (rotated - v) / model.dt;
    }
    case ProfileKind::Waypoints: {
      const AxisVec p = state.head(d);
      const AxisVec v = state.segment(d, d);
      while (cursor.waypoint + 1 < profile.waypoints.size() &&
             (profile.waypoints[cursor.waypoint] - p).norm() <= profile.capture_radius) {
        ++cursor.waypoint;
      }
      AxisVec a = profile.position_gain * (profile.waypoints[cursor.waypoint] - p) - profile.velocity_gain * v;
      const double norm = a.norm();
      if (norm > profile.max_accel) a *= profile.max_accel / norm;
      return a;
    }
  }
  return AxisVec::Zero(d);
}

namespace {

/// Truth states and the accelerations that produced them; validates a_max on the way.
std::vector<std::vector<StateVec>> generate_truth(const Scenario& s, bool check_limits) {
  const auto model = make_transition(s.dt, s.d);
  std::vector<std::vector<StateVec>> out;
  for (std::size_t n = 0; n < s.targets.size(); ++n) {
    std::vector<StateVec> traj;
    traj.reserve(static_cast<std::size_t>(s.steps));
    StateVec x = s.targets[n].state;
    ProfileCursor cursor;
    traj.push_back(x);
    for (int t = 0; t + 1 < s.steps; ++t) {
      const AxisVec a = profile_accel(s.targets[n].profile, t, x, model, cursor);
      if (check_limits && !(a.norm() <= s.a_max * (1.0 + 1e-12))) {
        std::ostringstream msg;
        msg << "acceleration norm " << a.norm() << " exceeds a_max " << s.a_max << " at step " << t;
        throw ScenarioError(field("targets", n, "profile"), msg.str());
      }
      x = propagate(x, a, model);
      traj.push_back(x);
    }
    out.push_back(std::move(traj));
  }
  return out;
}

}  // namespace

void validate_scenario(const Scenario& s) {
  require(valid_dimension(s.d), "d", "must be 2 or 3");
  require(s.dt > 0 && std::isfinite(s.dt), "dt", "must be positive");
  require(s.steps >= 1, "steps", "must be at least 1");
  require(s.horizon >= 1, "horizon", "must be at least 1");
  require(s.a_max > 0 && std::isfinite(s.a_max), "a_max", "must be positive");
  require(s.u_max > 0 && std::isfinite(s.u_max), "u_max", "must be positive");
  const int n = 2 * s.d;
  require(s.bounds.lower.size() == n, "box/min", "expected a length-2d vector");
  require(s.bounds.upper.size() == n, "box/max", "expected a length-2d vector");
  for (int i = 0; i < n; ++i) {
    require(!std::isnan(s.bounds.lower(i)) && !std::isnan(s.bounds.upper(i)) && s.bounds.lower(i) < s.bounds.upper(i),
            "box", "min must be below max in every component");
  }
  require(!s.sensors.empty(), "sensors", "at least one sensor is required");
  for (std::size_t m = 0; m < s.sensors.size(); ++m) {
    require(sized(s.sensors[m].state, n), field("sensors", m, "state"), "expected a finite length-2d vector");
    require(s.bounds.contains(s.sensors[m].state), field("sensors", m, "state"), "initial state lies outside the box");
    try {
      s.sensors[m].model.validate();
    } catch (const std::invalid_argument& e) {
      throw ScenarioError(field("sensors", m, "model"), e.what());
    }
  }
  require(!s.targets.empty(), "targets", "at least one target is required");
  for (std::size_t t = 0; t < s.targets.size(); ++t) {
    require(sized(s.targets[t].state, n), field("targets", t, "state"), "expected a finite length-2d vector");
    validate_profile(s.targets[t].profile, s.d, field("targets", t, "profile"));
  }
  require(s.controller.eta > 0, "controller/eta", "must be positive");
  require(s.controller.barrier_initial > 0, "controller/barrier_initial", "must be positive");
  require(s.controller.barrier_shrink > 0 && s.controller.barrier_shrink < 1, "controller/barrier_shrink",
          "must lie in (0, 1)");
  require(s.controller.barrier_rounds >= 1, "controller/barrier_rounds", "must be at least 1");
  require(s.controller.inner_tolerance > 0, "controller/inner_tolerance", "must be positive");
  require(s.controller.max_inner_iterations >= 1, "controller/max_inner_iterations", "must be at least 1");
  require(s.controller.fd_relative_step > 0, "controller/fd_relative_step", "must be positive");
  require(!s.lambda_override || *s.lambda_override >= 0, "lambda_override", "must be nonnegative");
  require(s.control_off_steps >= 0, "control_off_steps", "must be nonnegative");
  const auto& init = s.initial;
  require(init.prior_pos_sigma > 0 && init.prior_vel_sigma > 0, "initial_estimate", "prior sigmas must be positive");
  require(init.offset_pos_sigma >= 0 && init.offset_vel_sigma >= 0, "initial_estimate",
          "offset sigmas must be nonnegative");
  if (init.policy == InitPolicy::FixedPrior) {
    require(init.fixed_state.has_value() && sized(*init.fixed_state, n), "initial_estimate/state",
            "fixed_prior requires a finite length-2d state");
  }
  generate_truth(s, true);
}

std::vector<std::vector<StateVec>> truth_trajectories(const Scenario& scenario) {
  return generate_truth(scenario, false);
}

std::vector<MeasurementModel> effective_models(const Scenario& scenario) {
  std::vector<MeasurementModel> models;
  for (const auto& sensor : scenario.sensors) {
    MeasurementModel m = sensor.model;
    if (scenario.lambda_override && m.kind == SensorKind::Ranging) m.lambda = *scenario.lambda_override;
    models.push_back(m);
  }
  return models;
}

namespace {

StateMat initial_covariance(const Scenario& s) {
  const auto& init = s.initial;
  StateMat C = StateMat::Zero(2 * s.d, 2 * s.d);
  C.diagonal().head(s.d).setConstant(init.prior_pos_sigma * init.prior_pos_sigma);
  C.diagonal().tail(s.d).setConstant(init.prior_vel_sigma * init.prior_vel_sigma);
  return C;
}

}  // namespace

Estimate initial_estimate(const Scenario& scenario, int target, std::mt19937_64& rng) {
  const auto& init = scenario.initial;
  const int d = scenario.d;
  Estimate est;
  est.cov = initial_covariance(scenario);
  if (init.policy == InitPolicy::FixedPrior) {
    if (!init.fixed_state) throw ScenarioError("initial_estimate/state", "fixed_prior requires a state");
    est.x = *init.fixed_state;
    return est;
  }
  est.x = scenario.targets.at(static_cast<std::size_t>(target)).state;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < 2 * d; ++i) {
    const double sigma = i < d ? init.offset_pos_sigma : init.offset_vel_sigma;
    est.x(i) += sigma * normal(rng);
  }
  return est;
}

std::vector<std::vector<StateMat>> compute_reference_crb(const Scenario& scenario,
                                                         const std::vector<std::vector<StateVec>>& truth,
                                                         const std::vector<Eigen::MatrixXd>& sensor_states) {
  const auto model = make_transition(scenario.dt, scenario.d);
  const auto Q = process_noise_cov(scenario.a_max, scenario.d);
  const StateMat step_noise = prediction_noise(model, Q, 1);
  const auto models = effective_models(scenario);
  const std::size_t N = truth.size();
  const std::size_t T = sensor_states.size();

  std::vector<std::vector<StateMat>> out(T, std::vector<StateMat>(N));
  std::vector<StateMat> prior(N, initial_covariance(scenario));
  for (std::size_t t = 0; t < T; ++t) {
    const SensorArray sensors{models, sensor_states[t]};
    for (std::size_t n = 0; n < N; ++n) {
      if (t > 0) prior[n] = model.F * out[t - 1][n] * model.F.transpose() + step_noise;
      const StateMat info = fisher_information(truth[n][t], sensors, SingularPolicy::Drop);
      StateMat bound = spd_inverse(info + spd_inverse(prior[n]));
      out[t][n] = 0.5 * (bound + bound.transpose());
    }
  }
  return out;
}

RunResult run_episode(const Scenario& scenario, std::uint64_t seed) {
  validate_scenario(scenario);
  const int d = scenario.d;
  const int N = static_cast<int>(scenario.targets.size());
  const int M = static_cast<int>(scenario.sensors.size());
  const int T = scenario.steps;
  const auto model = make_transition(scenario.dt, d);
  const auto Q = process_noise_cov(scenario.a_max, d);
  const StateMat W = weight_matrix(scenario.dt, d);
  const auto models = effective_models(scenario);
  const auto truth = truth_trajectories(scenario);

  RunResult result;
  result.seed = seed;
  result.steps = T;
  result.targets = N;
  result.sensors = M;
  result.d = d;
  result.target_rows.reserve(static_cast<std::size_t>(T * N));
  result.sensor_rows.reserve(static_cast<std::size_t>(T * M));

  std::mt19937_64 rng(seed);
  std::vector<Prediction> predictions;
  for (int n = 0; n < N; ++n) {
    const Estimate init = initial_estimate(scenario, n, rng);
    predictions.push_back({init.x, init.cov, 1});
  }

  Eigen::MatrixXd sensor_states(2 * d, M);
  for (int m = 0; m < M; ++m) sensor_states.col(m) = scenario.sensors[static_cast<std::size_t>(m)].state;
  std::vector<Eigen::MatrixXd> sensor_history;
  sensor_history.reserve(static_cast<std::size_t>(T));

  std::optional<ControlPlan> previous_plan;
  std::vector<Estimate> estimates(static_cast<std::size_t>(N));
  for (int t = 0; t < T; ++t) {
    sensor_history.push_back(sensor_states);

    // Measure and update each target independently.
    for (int n = 0; n < N; ++n) {
      const StateVec& x = truth[static_cast<std::size_t>(n)][static_cast<std::size_t>(t)];
      SensorArray observing;
      std::vector<double> values;
      std::vector<int> ids;
      for (int m = 0; m < M; ++m) {
        try {
          const Measurement y = sample(rng, models[static_cast<std::size_t>(m)], x, sensor_states.col(m), m, n, t);
          values.push_back(y.value);
          ids.push_back(m);
        } catch (const SingularGeometry&) {
          ++result.flags.singular_events;
        }
      }
      observing.models.reserve(ids.size());
      observing.states.resize(2 * d, static_cast<Eigen::Index>(ids.size()));
      for (std::size_t i = 0; i < ids.size(); ++i) {
        observing.models.push_back(models[static_cast<std::size_t>(ids[i])]);
        observing.states.col(static_cast<Eigen::Index>(i)) = sensor_states.col(ids[i]);
      }
      const Prediction& pred = predictions[static_cast<std::size_t>(n)];
      Estimate est{pred.x, pred.cov};
      if (!ids.empty()) {
        try {
          const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
          const MleResult mle = mle_update(y, pred, observing);
          est = mle.estimate;
          if (!mle.converged) ++result.flags.mle_nonconverged;
        } catch (const SingularGeometry&) {
          ++result.flags.singular_events;
        }
      }
      estimates[static_cast<std::size_t>(n)] = est;
    }

    // Plan and apply the first input.
    ControlPlan plan = ControlPlan::zeros(M, scenario.horizon, d);
    if (t + 1 < T && t >= scenario.control_off_steps) {
      PlanningProblem problem{model,   Q,        W, SensorArray{models, sensor_states}, estimates, scenario.bounds,
                              scenario.u_max, scenario.horizon};
      const ControlResult solved =
          solve_control(problem, scenario.controller, previous_plan ? &*previous_plan : nullptr);
      if (!solved.converged) ++result.flags.solver_nonconverged;
      if (!solved.feasible) ++result.flags.solver_infeasible;
      result.flags.singular_events += solved.singular_events;
      plan = solved.plan;
      previous_plan = plan;
    } else {
      previous_plan.reset();
    }
    const std::vector<AxisVec> inputs = step_control(plan);

    for (int m = 0; m < M; ++m) {
      result.sensor_rows.push_back({t, m, sensor_states.col(m), inputs[static_cast<std::size_t>(m)]});
    }
    for (int n = 0; n < N; ++n) {
      const Estimate& est = estimates[static_cast<std::size_t>(n)];
      const StateVec& x = truth[static_cast<std::size_t>(n)][static_cast<std::size_t>(t)];
      TargetRow row;
      row.t = t;
      row.target = n;
      row.truth = x;
      row.estimate = est.x;
      row.pos_err = (est.x.head(d) - x.head(d)).norm();
      row.vel_err = (est.x.tail(d) - x.tail(d)).norm();
      row.crb_est = (W * est.cov).trace();
      result.target_rows.push_back(row);
    }

    for (int m = 0; m < M; ++m) {
      sensor_states.col(m) = propagate<double>(sensor_states.col(m), inputs[static_cast<std::size_t>(m)], model);
    }
    for (int n = 0; n < N; ++n) predictions[static_cast<std::size_t>(n)] = predict(estimates[static_cast<std::size_t>(n)], 1, model, Q);
  }

  const auto bounds = compute_reference_crb(scenario, truth, sensor_history);
  for (auto& row : result.target_rows) {
    const StateMat& B = bounds[static_cast<std::size_t>(row.t)][static_cast<std::size_t>(row.target)];
    row.crb_ref = (W * B).trace();
    row.crb_ref_pos = B.topLeftCorner(d, d).trace();
  }
  return result;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile: no values");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

int default_thread_count() {
  if (const char* env = std::getenv("TRACK_THREADS")) {
    const int requested = std::atoi(env);
    if (requested >= 1) return requested;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::vector<RunResult> run_batch(const Scenario& scenario, int n_runs, std::uint64_t base_seed, int threads) {
  if (n_runs < 1) throw std::invalid_argument("run_batch: at least one run is required");
  validate_scenario(scenario);
  std::vector<RunResult> runs(static_cast<std::size_t>(n_runs));
  const int workers = std::clamp(threads > 0 ? threads : default_thread_count(), 1, n_runs);
  if (workers == 1) {
    for (int i = 0; i < n_runs; ++i) runs[static_cast<std::size_t>(i)] = run_episode(scenario, base_seed + static_cast<std::uint64_t>(i));
    return runs;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = next++; i < n_runs; i = next++) {
          runs[static_cast<std::size_t>(i)] = run_episode(scenario, base_seed + static_cast<std::uint64_t>(i));
        }
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return runs;
}

McSummary summarize(const std::vector<RunResult>& runs) {
  if (runs.empty()) throw std::invalid_argument("summarize: no runs");
  const RunResult& first = runs.front();
  McSummary summary;
  summary.runs = static_cast<int>(runs.size());
  std::vector<double> errors(runs.size());
  for (int t = 0; t < first.steps; ++t) {
    for (int n = 0; n < first.targets; ++n) {
      double crb_sum = 0.0;
      for (std::size_t r = 0; r < runs.size(); ++r) {
        const TargetRow& row = runs[r].target_row(t, n);
        errors[r] = row.pos_err;
        crb_sum += row.crb_ref;
      }
      summary.rows.push_back({t, n, percentile(errors, 0.1), percentile(errors, 0.5), percentile(errors, 0.9),
                              crb_sum / static_cast<double>(runs.size())});
    }
  }
  return summary;
}

McSummary run_monte_carlo(const Scenario& scenario, int n_runs, std::uint64_t base_seed, int threads) {
  return summarize(run_batch(scenario, n_runs, base_seed, threads));
}

}  // namespace mstrack
