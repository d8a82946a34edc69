#include "mstrack/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mstrack {

SigmaPointSet sigma_points(const Estimate& est, const ProcessNoiseCov<double>& Q, int k, double eta) {
  if (k < 1) throw std::invalid_argument("sigma_points: horizon must be at least 1");
  if (!(eta > 0)) throw std::invalid_argument("sigma_points: eta must be positive");
  const int n = static_cast<int>(est.x.size());
  const int d = n / 2;
  if (!valid_dimension(d) || est.cov.rows() != n || est.cov.cols() != n || Q.Q.rows() != d) {
    throw std::invalid_argument("sigma_points: dimension mismatch");
  }
  const int dz = (2 + k) * d;

  SigmaPointSet set;
  set.eta = eta;
  set.horizon = k;
  set.d = d;
  set.center = Eigen::VectorXd::Zero(dz);
  set.center.head(n) = est.x;
  set.spread = Eigen::MatrixXd::Zero(dz, dz);
  set.spread.topLeftCorner(n, n) = est.cov;
  for (int i = 0; i < k; ++i) set.spread.block(n + i * d, n + i * d, d, d) = Q.Q;

  Eigen::LLT<Eigen::MatrixXd> llt(set.spread);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("sigma_points: spread covariance is not positive definite");
  }
  const Eigen::MatrixXd scaled = std::sqrt(eta) * Eigen::MatrixXd(llt.matrixL());
  set.points.resize(dz, 2 * dz + 1);
  set.points.col(0) = set.center;
  for (int l = 0; l < dz; ++l) {
    set.points.col(1 + l) = set.center + scaled.col(l);
    set.points.col(1 + dz + l) = set.center - scaled.col(l);
  }
  return set;
}

StateVec trajectory_endpoint(const Eigen::VectorXd& z, const TransitionModel<double>& model) {
  const int n = model.state_dim();
  const int d = model.d;
  const auto extra = z.size() - n;
  if (extra < d || extra % d != 0) throw std::invalid_argument("trajectory_endpoint: dimension mismatch");
  const int k = static_cast<int>(extra / d);
  StateVec x = z.head(n);
  for (int i = 0; i < k; ++i) {
    x = model.F * x + model.G * z.segment(n + i * d, d);
  }
  return x;
}

double relaxed_bound(double u_max, int d) {
  if (!(u_max > 0)) throw std::invalid_argument("relaxed_bound: u_max must be positive");
  if (d < 1) throw std::invalid_argument("relaxed_bound: dimension must be positive");
  return u_max / std::sqrt(static_cast<double>(d));
}

std::vector<Eigen::MatrixXd> plan_states(const ControlPlan& plan, const Eigen::MatrixXd& sensor_states,
                                         const TransitionModel<double>& model) {
  if (sensor_states.cols() != plan.sensors || sensor_states.rows() != model.state_dim() ||
      plan.d != model.d) {
    throw std::invalid_argument("plan_states: dimension mismatch");
  }
  std::vector<Eigen::MatrixXd> out;
  out.reserve(static_cast<std::size_t>(plan.horizon));
  Eigen::MatrixXd s = sensor_states;
  for (int i = 0; i < plan.horizon; ++i) {
    for (int m = 0; m < plan.sensors; ++m) {
      s.col(m) = propagate<double>(s.col(m), plan.input(m, i), model);
    }
    out.push_back(s);
  }
  return out;
}

Eigen::MatrixXd plan_endpoints(const ControlPlan& plan, const Eigen::MatrixXd& sensor_states,
                               const TransitionModel<double>& model) {
  if (plan.horizon == 0) return sensor_states;
  return plan_states(plan, sensor_states, model).back();
}

std::vector<AxisVec> step_control(const ControlPlan& plan) {
  if (plan.horizon < 1) throw std::invalid_argument("step_control: empty plan");
  std::vector<AxisVec> out;
  out.reserve(static_cast<std::size_t>(plan.sensors));
  for (int m = 0; m < plan.sensors; ++m) out.push_back(plan.input(m, 0));
  return out;
}

// ---------------------------------------------------------------------------
// Objective

namespace {

double weighted_trace_of_inverse(const StateMat& info, const StateMat& W) {
  Eigen::LLT<StateMat> llt(info);
  if (llt.info() != Eigen::Success) return (W * spd_inverse(info)).trace();
  const StateMat inv = llt.solve(StateMat::Identity(info.rows(), info.cols()));
  return W.cwiseProduct(inv.transpose()).sum();
}

bool depends_on_velocity(const MeasurementModel& model) { return model.kind == SensorKind::Doppler; }

/**
 * v with v v^T equal to sensor_information(model, x, s). Both sensor kinds give
 * rank-one information: the ranging variance gradient is parallel to the mean
 * gradient, h = kappa g, so g g^T / var + h h^T / (2 var^2) = (1/var + kappa^2 / (2 var^2)) g g^T.
 */
StateVec information_factor(const MeasurementModel& model, const StateVec& x, const StateVec& s) {
  const StateVec g = mean_gradient(model, x, s);
  const double var = variance(model, x, s);
  double weight = 1.0 / var;
  if (model.kind == SensorKind::Ranging && model.lambda != 0.0) {
    const double kappa = 2.0 * model.lambda * mean(model, x, s) * model.sigma_range * model.sigma_range /
                         (model.c * model.c);
    weight += 0.5 * kappa * kappa / (var * var);
  }
  return g * std::sqrt(weight);
}

}  // namespace

ExpectedCrbObjective::ExpectedCrbObjective(std::vector<Target> targets, std::vector<MeasurementModel> models,
                                           StateMat W)
    : targets_(std::move(targets)), models_(std::move(models)), W_(std::move(W)) {}

double ExpectedCrbObjective::value(const Eigen::MatrixXd& final_states, int* singular) const {
  double total = 0.0;
  const int M = static_cast<int>(models_.size());
  for (const auto& target : targets_) {
    double sum = 0.0;
    for (const auto& x : target.endpoints) {
      StateMat info = target.pred_info;
      for (int m = 0; m < M; ++m) {
        try {
          info += sensor_information(models_[m], x, final_states.col(m));
        } catch (const SingularGeometry&) {
          if (singular) ++*singular;
        }
      }
      sum += weighted_trace_of_inverse(info, W_);
    }
    total += target.point_weight * sum;
  }
  return total;
}

Eigen::MatrixXd ExpectedCrbObjective::gradient(const Eigen::MatrixXd& final_states, double rel_step) const {
  const int M = static_cast<int>(models_.size());
  const auto n = final_states.rows();
  const int d = static_cast<int>(n / 2);
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n, M);
  Eigen::MatrixXd steps(n, M);
  for (int m = 0; m < M; ++m) {
    for (Eigen::Index j = 0; j < n; ++j) steps(j, m) = rel_step * (1.0 + std::abs(final_states(j, m)));
  }

  auto factor_or_zero = [&](int m, const StateVec& x, const StateVec& s) -> StateVec {
    try {
      return information_factor(models_[m], x, s);
    } catch (const SingularGeometry&) {
      return StateVec::Zero(n);
    }
  };

  std::vector<StateVec> factors(static_cast<std::size_t>(M));
  const StateMat identity = StateMat::Identity(n, n);
  for (const auto& target : targets_) {
    for (const auto& x : target.endpoints) {
      StateMat total = target.pred_info;
      for (int m = 0; m < M; ++m) {
        factors[m] = factor_or_zero(m, x, final_states.col(m));
        total.noalias() += factors[m] * factors[m].transpose();
      }
      for (int m = 0; m < M; ++m) {
        // With A the information from everything but sensor m and v v^T its own
        // contribution, tr{W (A + v v^T)^-1} = tr{W A^-1} - v^T A^-1 W A^-1 v / (1 + v^T A^-1 v).
        // Only the second term varies with sensor m's state.
        const StateMat others = total - factors[m] * factors[m].transpose();
        const Eigen::LLT<StateMat> llt(others);
        if (llt.info() != Eigen::Success) continue;
        const StateMat inv = llt.solve(identity);
        const StateMat B = inv * W_ * inv;
        auto reduction = [&](const StateVec& s) {
          const StateVec v = factor_or_zero(m, x, s);
          return v.dot(B * v) / (1.0 + v.dot(inv * v));
        };
        const int coords = depends_on_velocity(models_[m]) ? static_cast<int>(n) : d;
        for (int j = 0; j < coords; ++j) {
          const double h = steps(j, m);
          StateVec s = final_states.col(m);
          s(j) += h;
          const double plus = reduction(s);
          s(j) -= 2.0 * h;
          const double minus = reduction(s);
          grad(j, m) -= target.point_weight * (plus - minus) / (2.0 * h);
        }
      }
    }
  }
  return grad;
}

namespace {

std::vector<StateVec> sigma_endpoints(const SigmaPointSet& set, const TransitionModel<double>& model) {
  std::vector<StateVec> out;
  out.reserve(static_cast<std::size_t>(set.count()));
  for (int l = 0; l < set.count(); ++l) out.push_back(trajectory_endpoint(set.points.col(l), model));
  return out;
}

void check_objective_inputs(const ControlPlan& plan, const SensorArray& sensors, std::size_t targets,
                            std::size_t covs, const TransitionModel<double>& model) {
  if (plan.sensors != sensors.size() || plan.d != model.d || plan.U.rows() != plan.sensors * plan.d ||
      plan.U.cols() != plan.horizon) {
    throw std::invalid_argument("objective: plan dimensions do not match the sensor configuration");
  }
  if (targets != covs) throw std::invalid_argument("objective: one prediction covariance per target");
}

}  // namespace

double objective(const ControlPlan& plan, std::span<const SigmaPointSet> sigma_sets,
                 const SensorArray& sensors, std::span<const StateMat> pred_covs, const StateMat& W,
                 const TransitionModel<double>& model, bool average) {
  check_objective_inputs(plan, sensors, sigma_sets.size(), pred_covs.size(), model);
  std::vector<ExpectedCrbObjective::Target> targets;
  for (std::size_t n = 0; n < sigma_sets.size(); ++n) {
    const double w = average ? 1.0 / sigma_sets[n].count() : 1.0;
    targets.push_back({sigma_endpoints(sigma_sets[n], model), spd_inverse(pred_covs[n]), w});
  }
  const ExpectedCrbObjective f(std::move(targets), sensors.models, W);
  return f.value(plan_endpoints(plan, sensors.states, model));
}

double objective_point(const ControlPlan& plan, std::span<const StateVec> estimates,
                       const SensorArray& sensors, std::span<const StateMat> pred_covs,
                       const StateMat& W, const TransitionModel<double>& model) {
  check_objective_inputs(plan, sensors, estimates.size(), pred_covs.size(), model);
  const StateMat Fk = transition_power(model, plan.horizon);
  std::vector<ExpectedCrbObjective::Target> targets;
  for (std::size_t n = 0; n < estimates.size(); ++n) {
    targets.push_back({{StateVec(Fk * estimates[n])}, spd_inverse(pred_covs[n]), 1.0});
  }
  const ExpectedCrbObjective f(std::move(targets), sensors.models, W);
  return f.value(plan_endpoints(plan, sensors.states, model));
}

ExpectedCrbObjective build_objective(const PlanningProblem& problem, const ControlSettings& settings) {
  const int k = problem.horizon;
  const StateMat Fk = transition_power(problem.model, k);
  std::vector<ExpectedCrbObjective::Target> targets;
  targets.reserve(problem.targets.size());
  for (const auto& est : problem.targets) {
    const Prediction pred = predict(est, k, problem.model, problem.Q);
    ExpectedCrbObjective::Target target;
    target.pred_info = spd_inverse(pred.cov);
    const bool zero_spread = est.cov.isZero(0.0) && problem.Q.Q.isZero(0.0);
    if (settings.mode == ControlMode::Point || zero_spread) {
      target.endpoints.push_back(Fk * est.x);
    } else {
      const SigmaPointSet set = sigma_points(est, problem.Q, k, settings.eta);
      target.endpoints = sigma_endpoints(set, problem.model);
      if (settings.average_sigma) target.point_weight = 1.0 / set.count();
    }
    targets.push_back(std::move(target));
  }
  return ExpectedCrbObjective(std::move(targets), problem.sensors.models, problem.W);
}

// ---------------------------------------------------------------------------
// Interior-point solve

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/**
 * Linear structure of one sensor's plan u (k*d entries, step-major):
 * s_{t+j} = F^j s_t + R_j u. State rows are a_r . u <= b_r, identical across
 * sensors up to b. Input bounds |u_i| < bound are kept separate.
 */
struct SensorConstraints {
  Eigen::MatrixXd response_final;  // R_k, 2d x kd
  Eigen::MatrixXd A;               // state rows
  std::vector<Eigen::VectorXd> b;  // per sensor
  double bound = 0.0;
};

Eigen::MatrixXd step_response(const TransitionModel<double>& model, int j, int k) {
  const int n = model.state_dim();
  const int d = model.d;
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, k * d);
  for (int i = 1; i <= j; ++i) R.block(0, (i - 1) * d, n, d) = transition_power(model, j - i) * model.G;
  return R;
}

SensorConstraints build_constraints(const PlanningProblem& p) {
  const int k = p.horizon;
  const int n = p.model.state_dim();
  const int M = p.sensors.size();
  SensorConstraints c;
  c.bound = relaxed_bound(p.u_max, p.model.d);
  c.response_final = step_response(p.model, k, k);

  std::vector<Eigen::RowVectorXd> rows;
  std::vector<std::vector<double>> rhs(static_cast<std::size_t>(M));
  for (int j = 1; j <= k; ++j) {
    const Eigen::MatrixXd R = step_response(p.model, j, k);
    const StateMat Fj = transition_power(p.model, j);
    for (int comp = 0; comp < n; ++comp) {
      if (std::isfinite(p.bounds.upper(comp))) {
        rows.push_back(R.row(comp));
        for (int m = 0; m < M; ++m) {
          rhs[m].push_back(p.bounds.upper(comp) - Fj.row(comp).dot(p.sensors.states.col(m)));
        }
      }
      if (std::isfinite(p.bounds.lower(comp))) {
        rows.push_back(-R.row(comp));
        for (int m = 0; m < M; ++m) {
          rhs[m].push_back(Fj.row(comp).dot(p.sensors.states.col(m)) - p.bounds.lower(comp));
        }
      }
    }
  }
  c.A.resize(static_cast<Eigen::Index>(rows.size()), k * p.model.d);
  for (std::size_t r = 0; r < rows.size(); ++r) c.A.row(static_cast<Eigen::Index>(r)) = rows[r];
  for (int m = 0; m < M; ++m) {
    c.b.push_back(Eigen::Map<const Eigen::VectorXd>(rhs[m].data(), static_cast<Eigen::Index>(rhs[m].size())));
  }
  return c;
}

bool strictly_feasible(const SensorConstraints& c, int m, const Eigen::VectorXd& u) {
  if ((u.array().abs() >= c.bound).any()) return false;
  if (c.A.rows() == 0) return true;
  return ((c.b[m] - c.A * u).array() > 0.0).all();
}

/// Projected gradient on squared violations with a small interior margin.
Eigen::VectorXd phase_one(const SensorConstraints& c, int m, Eigen::VectorXd u, bool* ok) {
  const double inner = c.bound * (1.0 - 1e-6);
  const Eigen::VectorXd margin = 1e-6 * (1.0 + c.b[m].array().abs()).matrix();
  const double lipschitz = 2.0 * std::max(c.A.squaredNorm(), 1e-12);
  u = u.cwiseMax(-inner).cwiseMin(inner);
  for (int it = 0; it < 20000; ++it) {
    const Eigen::VectorXd excess = (c.A * u - c.b[m] + margin).cwiseMax(0.0);
    if (excess.isZero(0.0)) break;
    u -= (2.0 / lipschitz) * (c.A.transpose() * excess);
    u = u.cwiseMax(-inner).cwiseMin(inner);
  }
  *ok = strictly_feasible(c, m, u);
  return u;
}

Eigen::VectorXd plan_to_vector(const ControlPlan& plan) {
  const int kd = plan.horizon * plan.d;
  Eigen::VectorXd v(plan.sensors * kd);
  for (int m = 0; m < plan.sensors; ++m) {
    for (int i = 0; i < plan.horizon; ++i) v.segment(m * kd + i * plan.d, plan.d) = plan.input(m, i);
  }
  return v;
}

ControlPlan vector_to_plan(const Eigen::VectorXd& v, int sensors, int horizon, int d) {
  ControlPlan plan = ControlPlan::zeros(sensors, horizon, d);
  const int kd = horizon * d;
  for (int m = 0; m < sensors; ++m) {
    for (int i = 0; i < horizon; ++i) plan.U.block(m * d, i, d, 1) = v.segment(m * kd + i * d, d);
  }
  return plan;
}

class BarrierProblem {
 public:
  BarrierProblem(const PlanningProblem& p, const SensorConstraints& c, const ExpectedCrbObjective& f,
                 double fd_step)
      : c_(c), f_(f), fd_step_(fd_step), kd_(p.horizon * p.model.d), M_(p.sensors.size()) {
    base_final_ = transition_power(p.model, p.horizon) * p.sensors.states;
  }

  Eigen::MatrixXd final_states(const Eigen::VectorXd& v) const {
    Eigen::MatrixXd s = base_final_;
    for (int m = 0; m < M_; ++m) s.col(m) += c_.response_final * v.segment(m * kd_, kd_);
    return s;
  }

  double objective(const Eigen::VectorXd& v, int* singular = nullptr) const {
    return f_.value(final_states(v), singular);
  }

  Eigen::VectorXd objective_gradient(const Eigen::VectorXd& v) const {
    const Eigen::MatrixXd gs = f_.gradient(final_states(v), fd_step_);
    Eigen::VectorXd g(v.size());
    for (int m = 0; m < M_; ++m) g.segment(m * kd_, kd_) = c_.response_final.transpose() * gs.col(m);
    return g;
  }

  /// +inf outside the strict interior.
  double barrier(const Eigen::VectorXd& v) const {
    double sum = 0.0;
    for (int m = 0; m < M_; ++m) {
      const auto u = v.segment(m * kd_, kd_);
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double lo = c_.bound + u(i);
        const double hi = c_.bound - u(i);
        if (!(lo > 0.0) || !(hi > 0.0)) return kInf;
        sum -= std::log(lo) + std::log(hi);
      }
      if (c_.A.rows() > 0) {
        const Eigen::VectorXd slack = c_.b[m] - c_.A * u;
        if (!(slack.array() > 0.0).all()) return kInf;
        sum -= slack.array().log().sum();
      }
    }
    return sum;
  }

  Eigen::VectorXd barrier_gradient(const Eigen::VectorXd& v) const {
    Eigen::VectorXd g(v.size());
    for (int m = 0; m < M_; ++m) {
      const auto u = v.segment(m * kd_, kd_);
      Eigen::VectorXd gm = (1.0 / (c_.bound - u.array()) - 1.0 / (c_.bound + u.array())).matrix();
      if (c_.A.rows() > 0) {
        const Eigen::VectorXd slack = c_.b[m] - c_.A * u;
        gm += c_.A.transpose() * slack.cwiseInverse();
      }
      g.segment(m * kd_, kd_) = gm;
    }
    return g;
  }

  /// Largest step along dir that stays inside every constraint.
  double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dir) const {
    double alpha = kInf;
    for (int m = 0; m < M_; ++m) {
      const auto u = v.segment(m * kd_, kd_);
      const auto du = dir.segment(m * kd_, kd_);
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (du(i) > 0) alpha = std::min(alpha, (c_.bound - u(i)) / du(i));
        if (du(i) < 0) alpha = std::min(alpha, (c_.bound + u(i)) / -du(i));
      }
      if (c_.A.rows() > 0) {
        const Eigen::VectorXd slack = c_.b[m] - c_.A * u;
        const Eigen::VectorXd rate = c_.A * du;
        for (Eigen::Index r = 0; r < rate.size(); ++r) {
          if (rate(r) > 0) alpha = std::min(alpha, slack(r) / rate(r));
        }
      }
    }
    return alpha;
  }

 private:
  const SensorConstraints& c_;
  const ExpectedCrbObjective& f_;
  double fd_step_;
  int kd_;
  int M_;
  Eigen::MatrixXd base_final_;
};

struct InnerResult {
  bool converged = false;
  int iterations = 0;
};

/// BFGS on f(v)/scale + mu * barrier(v), keeping every iterate strictly feasible.
InnerResult minimize_barrier(const BarrierProblem& bp, double scale, double mu, const ControlSettings& settings,
                             Eigen::VectorXd& v) {
  auto phi = [&](const Eigen::VectorXd& x) {
    const double b = bp.barrier(x);
    if (!std::isfinite(b)) return kInf;
    return bp.objective(x) / scale + mu * b;
  };
  auto grad = [&](const Eigen::VectorXd& x) {
    return Eigen::VectorXd(bp.objective_gradient(x) / scale + mu * bp.barrier_gradient(x));
  };

  const auto n = v.size();
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  double value = phi(v);
  Eigen::VectorXd g = grad(v);
  InnerResult result;
  bool first = true;
  for (int it = 0; it < settings.max_inner_iterations; ++it) {
    result.iterations = it + 1;
    if (g.norm() < settings.inner_tolerance) {
      result.converged = true;
      break;
    }
    Eigen::VectorXd dir = -H * g;
    double slope = g.dot(dir);
    if (!(slope < 0)) {
      H.setIdentity();
      dir = -g;
      slope = -g.squaredNorm();
    }
    double alpha = std::min(1.0, 0.99 * bp.max_step(v, dir));
    Eigen::VectorXd trial;
    double trial_value = kInf;
    bool accepted = false;
    while (alpha > 1e-16) {
      trial = v + alpha * dir;
      trial_value = phi(trial);
      if (trial_value <= value + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // Line search stalled: the remaining decrease is below finite-difference resolution.
      result.converged = g.norm() < 1e2 * settings.inner_tolerance;
      break;
    }
    const Eigen::VectorXd g_new = grad(trial);
    const Eigen::VectorXd s = trial - v;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (first) {
        H *= sy / y.squaredNorm();
        first = false;
      }
      // (I - s y^T / sy) H (I - y s^T / sy) + s s^T / sy, expanded to stay O(n^2).
      const Eigen::VectorXd Hy = H * y;
      const double yHy = y.dot(Hy);
      H.noalias() += ((sy + yHy) / (sy * sy)) * s * s.transpose();
      H.noalias() -= (Hy * s.transpose() + s * Hy.transpose()) / sy;
    }
    v = trial;
    value = trial_value;
    g = g_new;
  }
  return result;
}

void validate_problem(const PlanningProblem& p) {
  const int n = p.model.state_dim();
  if (p.horizon < 1) throw std::invalid_argument("solve_control: horizon must be at least 1");
  if (p.sensors.size() < 1) throw std::invalid_argument("solve_control: at least one sensor is required");
  if (p.sensors.states.rows() != n || p.sensors.states.cols() != p.sensors.size()) {
    throw std::invalid_argument("solve_control: sensor state dimensions do not match the model");
  }
  if (p.targets.empty()) throw std::invalid_argument("solve_control: at least one target is required");
  if (p.bounds.lower.size() != n || p.bounds.upper.size() != n) {
    throw std::invalid_argument("solve_control: box bounds dimension mismatch");
  }
  if (!(p.u_max > 0)) throw std::invalid_argument("solve_control: u_max must be positive");
}

}  // namespace

ControlResult solve_control(const PlanningProblem& problem, const ControlSettings& settings,
                            const ControlPlan* warm_start) {
  validate_problem(problem);
  const int M = problem.sensors.size();
  const int k = problem.horizon;
  const int d = problem.model.d;
  const int kd = k * d;

  const SensorConstraints constraints = build_constraints(problem);
  const ExpectedCrbObjective f = build_objective(problem, settings);
  const BarrierProblem bp(problem, constraints, f, settings.fd_relative_step);

  ControlResult result;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(M * kd);
  bool zero_feasible = true;
  for (int m = 0; m < M; ++m) zero_feasible = zero_feasible && strictly_feasible(constraints, m, zero.segment(m * kd, kd));
  result.objective_zero = zero_feasible ? bp.objective(zero) : std::numeric_limits<double>::quiet_NaN();

  // Starting point, chosen per sensor: shifted warm start, coasting, then phase one.
  Eigen::VectorXd v = zero;
  Eigen::VectorXd shifted = zero;
  if (warm_start && warm_start->sensors == M && warm_start->horizon == k && warm_start->d == d) {
    ControlPlan moved = ControlPlan::zeros(M, k, d);
    moved.U.leftCols(k - 1) = warm_start->U.rightCols(k - 1);
    const double inner = constraints.bound * (1.0 - 1e-3);
    shifted = plan_to_vector(moved).cwiseMax(-inner).cwiseMin(inner);
  }
  for (int m = 0; m < M; ++m) {
    const Eigen::VectorXd warm = shifted.segment(m * kd, kd);
    if (strictly_feasible(constraints, m, warm)) {
      v.segment(m * kd, kd) = warm;
    } else if (!strictly_feasible(constraints, m, zero.segment(m * kd, kd))) {
      bool ok = false;
      v.segment(m * kd, kd) = phase_one(constraints, m, warm, &ok);
      result.feasible = result.feasible && ok;
    }
  }
  if (!result.feasible) {
    result.converged = false;
    result.plan = vector_to_plan(v, M, k, d);
    result.objective = bp.objective(v, &result.singular_events);
    return result;
  }

  const double scale = std::max(bp.objective(v), std::numeric_limits<double>::min());
  double mu = settings.barrier_initial;
  for (int round = 0; round < settings.barrier_rounds; ++round) {
    const InnerResult inner = minimize_barrier(bp, scale, mu, settings, v);
    result.iterations += inner.iterations;
    result.converged = inner.converged;
    mu *= settings.barrier_shrink;
  }

  result.objective = bp.objective(v, &result.singular_events);
  if (zero_feasible && result.objective > result.objective_zero) {
    v = zero;
    result.singular_events = 0;
    result.objective = bp.objective(v, &result.singular_events);
  }
  result.plan = vector_to_plan(v, M, k, d);
  return result;
}

}  // namespace mstrack
