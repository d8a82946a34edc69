#include <gtest/gtest.h>

#include <random>

#include "mstrack/control.hpp"
#include "oracles.hpp"

using namespace mstrack;
using oracle::vec;

namespace {

StateVec box_limit(int d, double pos, double vel) {
  StateVec v(2 * d);
  v << StateVec::Constant(d, pos), StateVec::Constant(d, vel);
  return v;
}

PlanningProblem make_problem(std::mt19937_64& rng, int sensors, int k, int d, int targets = 1) {
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  PlanningProblem p;
  p.model = make_transition(1.0, d);
  p.Q = process_noise_cov(5.0, d);
  p.W = weight_matrix(1.0, d);
  p.horizon = k;
  p.u_max = 2.0;
  p.bounds = {-box_limit(d, 200.0, 10.0), box_limit(d, 200.0, 10.0)};
  p.sensors.states.resize(2 * d, sensors);
  for (int m = 0; m < sensors; ++m) {
    p.sensors.models.push_back(m % 2 == 0 ? MeasurementModel::ranging() : MeasurementModel::doppler());
    for (int i = 0; i < d; ++i) p.sensors.states(i, m) = 60.0 * uniform(rng);
    for (int i = d; i < 2 * d; ++i) p.sensors.states(i, m) = 2.0 * uniform(rng);
  }
  for (int n = 0; n < targets; ++n) {
    StateVec x(2 * d);
    for (int i = 0; i < d; ++i) x(i) = 100.0 * uniform(rng);
    for (int i = d; i < 2 * d; ++i) x(i) = 3.0 * uniform(rng);
    p.targets.push_back({x, oracle::random_spd(rng, 2 * d, 0.5, 4.0)});
  }
  return p;
}

bool plan_feasible(const PlanningProblem& p, const ControlPlan& plan, double tol = 0.0) {
  const double bound = relaxed_bound(p.u_max, p.model.d);
  if (plan.U.cwiseAbs().maxCoeff() > bound + tol) return false;
  for (const auto& states : plan_states(plan, p.sensors.states, p.model)) {
    for (Eigen::Index m = 0; m < states.cols(); ++m) {
      if (!p.bounds.contains(states.col(m))) return false;
    }
  }
  return true;
}

}  // namespace

TEST(SigmaPoints, CenterAndCount) {
  std::mt19937_64 rng(1);
  const Estimate est{vec({1, 2, 3, 4}), oracle::random_spd(rng, 4, 0.5, 2.0)};
  const auto set = sigma_points(est, process_noise_cov(5.0, 2), 7, 3.0);
  EXPECT_EQ(set.dim(), 18);
  EXPECT_EQ(set.count(), 37);
  EXPECT_EQ(Eigen::VectorXd(set.points.col(0)), set.center);
  EXPECT_EQ(Eigen::VectorXd(set.center.head(4)), Eigen::VectorXd(est.x));
  EXPECT_TRUE(set.center.tail(14).isZero(0.0));
}

TEST(SigmaPoints, IdentitySquareRoot) {
  const Estimate est{vec({0, 0, 0, 0}), StateMat::Identity(4, 4)};
  ProcessNoiseCov<double> Q{AxisMat::Identity(2, 2), std::sqrt(3.0)};
  const auto set = sigma_points(est, Q, 1, 1.0);
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(6);
  expected(0) = 1.0;
  EXPECT_LT((set.points.col(1) - expected).norm(), 1e-15);
}

TEST(SigmaPoints, SymmetryIdentities) {
  std::mt19937_64 rng(2);
  for (int d : {2, 3}) {
    for (int k : {1, 7}) {
      const Estimate est{oracle::random_state(rng, d, 50.0, 2.0), oracle::random_spd(rng, 2 * d, 0.1, 20.0)};
      const double eta = 3.0;
      const auto set = sigma_points(est, process_noise_cov(5.0, d), k, eta);
      const Eigen::VectorXd sum = set.points.rowwise().sum();
      EXPECT_LT((sum - set.count() * set.center).norm(), 1e-10 * set.count() * (1.0 + set.center.norm()));
      const Eigen::MatrixXd dev = set.points.colwise() - set.center;
      EXPECT_LT(oracle::relative_error(dev * dev.transpose(), 2.0 * eta * set.spread), 1e-10);
      for (int l = 1; l <= set.dim(); ++l) {
        EXPECT_LT((set.points.col(l) + set.points.col(l + set.dim()) - 2.0 * set.center).norm(), 1e-9);
      }
    }
  }
}

TEST(SigmaPoints, RejectsBadInputs) {
  StateMat indefinite = StateMat::Identity(4, 4);
  indefinite(2, 2) = -1.0;
  const auto Q = process_noise_cov(5.0, 2);
  EXPECT_THROW(sigma_points({vec({0, 0, 0, 0}), indefinite}, Q, 3, 3.0), std::invalid_argument);
  EXPECT_THROW(sigma_points({vec({0, 0, 0, 0}), StateMat::Identity(4, 4)}, Q, 0, 3.0), std::invalid_argument);
  EXPECT_THROW(sigma_points({vec({0, 0, 0, 0}), StateMat::Identity(4, 4)}, Q, 3, 0.0), std::invalid_argument);
}

TEST(TrajectoryEndpoint, Examples) {
  const auto model = make_transition(0.5, 2);
  const StateVec x = vec({1, -2, 3, 0.5});
  Eigen::VectorXd z = Eigen::VectorXd::Zero(4 + 3 * 2);
  z.head(4) = x;
  EXPECT_LT((trajectory_endpoint(z, model) - transition_power(model, 3) * x).norm(), 1e-12);

  Eigen::VectorXd one(6);
  one << x, 0.7, -1.1;
  EXPECT_LT((trajectory_endpoint(one, model) - propagate<double>(x, one.tail(2), model)).norm(), 1e-14);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 2.0);
  Eigen::VectorXd random(4 + 5 * 2);
  for (Eigen::Index i = 0; i < random.size(); ++i) random(i) = normal(rng);
  StateVec seq = random.head(4);
  for (int i = 0; i < 5; ++i) seq = propagate<double>(seq, random.segment(4 + 2 * i, 2), model);
  EXPECT_LT((trajectory_endpoint(random, model) - seq).norm(), 1e-12);
  EXPECT_THROW(trajectory_endpoint(Eigen::VectorXd::Zero(5), model), std::invalid_argument);
}

TEST(RelaxedBound, Examples) {
  EXPECT_NEAR(relaxed_bound(2.0, 2), 1.414214, 1e-6);
  EXPECT_NEAR(relaxed_bound(2.0, 3), 1.154701, 1e-6);
  EXPECT_DOUBLE_EQ(relaxed_bound(1.7, 1), 1.7);
}

TEST(RelaxedBound, BoxCornersLieInsideBall) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  std::uniform_int_distribution<int> axis(0, 2);
  for (int d : {2, 3}) {
    const double b = relaxed_bound(2.0, d);
    for (int trial = 0; trial < 2000; ++trial) {
      Eigen::VectorXd u(d);
      for (int i = 0; i < d; ++i) u(i) = b * uniform(rng);
      u(axis(rng) % d) = uniform(rng) < 0 ? -b : b;
      EXPECT_LE(u.norm(), 2.0 * (1.0 + 1e-15));
    }
  }
}

TEST(StepControl, FirstColumn) {
  ControlPlan plan = ControlPlan::zeros(2, 3, 2);
  plan.U << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12;
  const auto u = step_control(plan);
  ASSERT_EQ(u.size(), 2u);
  EXPECT_EQ(u[0], vec({1, 4}));
  EXPECT_EQ(u[1], vec({7, 10}));
  ControlPlan single = ControlPlan::zeros(1, 1, 3);
  single.U << 0.1, 0.2, 0.3;
  EXPECT_EQ(step_control(single)[0], vec({0.1, 0.2, 0.3}));
}

TEST(Objective, DegenerateSpreadMatchesCrbScalar) {
  const auto model = make_transition(1.0, 2);
  const StateMat W = weight_matrix(1.0, 2);
  SensorArray sensors{{MeasurementModel::ranging(), MeasurementModel::ranging()}, Eigen::MatrixXd(4, 2)};
  sensors.states << -10, 30, 5, -20, 0, 1, 0, -1;
  const StateVec x = vec({40, 10, 1, -1});
  const StateMat C = StateMat::Identity(4, 4) * 2.0;
  ControlPlan plan = ControlPlan::zeros(2, 3, 2);
  plan.U.setConstant(0.3);
  const std::vector<StateVec> estimates{x};
  const std::vector<StateMat> covs{C};
  const Eigen::MatrixXd final_states = plan_endpoints(plan, sensors.states, model);
  const double expected =
      crb_scalar(transition_power(model, 3) * x, SensorArray{sensors.models, final_states}, C, W);
  EXPECT_NEAR(objective_point(plan, estimates, sensors, covs, W, model), expected, 1e-12 * expected);
}

TEST(Objective, AdditiveOverIdenticalTargets) {
  std::mt19937_64 rng(5);
  const auto model = make_transition(1.0, 2);
  const auto Q = process_noise_cov(5.0, 2);
  const StateMat W = weight_matrix(1.0, 2);
  auto p = make_problem(rng, 2, 3, 2);
  const Estimate est = p.targets.front();
  const auto set = sigma_points(est, Q, 3, 3.0);
  const StateMat pred_cov = predict(est, 3, model, Q).cov;
  ControlPlan plan = ControlPlan::zeros(2, 3, 2);
  plan.U.setConstant(-0.4);
  const std::vector<SigmaPointSet> one{set};
  const std::vector<SigmaPointSet> three{set, set, set};
  const std::vector<StateMat> c1{pred_cov};
  const std::vector<StateMat> c3{pred_cov, pred_cov, pred_cov};
  const double single = objective(plan, one, p.sensors, c1, W, model);
  EXPECT_NEAR(objective(plan, three, p.sensors, c3, W, model), 3.0 * single, 1e-12 * single);
  EXPECT_GT(single, 0.0);
  EXPECT_NEAR(objective(plan, one, p.sensors, c1, W, model, true), single / set.count(), 1e-12 * single);
}

TEST(Objective, ToyGridMatchesComposedOracle) {
  std::mt19937_64 rng(6);
  auto p = make_problem(rng, 1, 1, 2);
  const ControlSettings settings;
  const auto f = build_objective(p, settings);
  const auto set = sigma_points(p.targets[0], p.Q, 1, settings.eta);
  const std::vector<SigmaPointSet> sets{set};
  const std::vector<StateMat> covs{predict(p.targets[0], 1, p.model, p.Q).cov};
  const double b = relaxed_bound(p.u_max, 2);
  for (int i = -2; i <= 2; ++i) {
    for (int j = -2; j <= 2; ++j) {
      ControlPlan plan = ControlPlan::zeros(1, 1, 2);
      plan.U << b * i / 2.0, b * j / 2.0;
      const Eigen::MatrixXd final_states = plan_endpoints(plan, p.sensors.states, p.model);
      const double expected = oracle::composed_objective(p, settings, final_states);
      EXPECT_NEAR(objective(plan, sets, p.sensors, covs, p.W, p.model), expected, 1e-9 * expected);
      EXPECT_NEAR(f.value(final_states), expected, 1e-9 * expected);
    }
  }
}

TEST(Objective, PriorOnlyPointValue) {
  // A Doppler sensor sharing the target's velocity and far away contributes no information.
  const auto model = make_transition(1.0, 2);
  const auto Q = process_noise_cov(5.0, 2);
  const StateMat W = weight_matrix(1.0, 2);
  const Estimate est{vec({0, 0, 0, 0}), StateMat::Identity(4, 4)};
  const StateMat pred_cov = predict(est, 2, model, Q).cov;
  SensorArray sensors{{MeasurementModel::doppler(1e-30, 1.0)}, Eigen::MatrixXd(4, 1)};
  sensors.states << 500, 0, 0, 0;
  const std::vector<StateVec> x{est.x};
  const std::vector<StateMat> covs{pred_cov};
  EXPECT_NEAR(objective_point(ControlPlan::zeros(1, 2, 2), x, sensors, covs, W, model), (W * pred_cov).trace(),
              1e-9);
}

TEST(Objective, GradientMatchesFiniteDifferenceOfValue) {
  std::mt19937_64 rng(7);
  for (int d : {2, 3}) {
    auto p = make_problem(rng, 3, 4, d, 2);
    const auto f = build_objective(p, {});
    const Eigen::MatrixXd s = p.sensors.states;
    const Eigen::MatrixXd g = f.gradient(s, 1e-4);
    for (Eigen::Index m = 0; m < s.cols(); ++m) {
      const StateVec col = s.col(m);
      const StateVec fd = oracle::central_difference(
          [&](const StateVec& c) {
            Eigen::MatrixXd moved = s;
            moved.col(m) = c;
            return f.value(moved);
          },
          col);
      const bool velocity = p.sensors.models[m].kind == SensorKind::Doppler;
      const auto n = velocity ? 2 * d : d;
      EXPECT_LT((g.col(m).head(n) - fd.head(n)).norm(), 1e-5 * (1.0 + fd.norm())) << "d=" << d << " m=" << m;
      if (!velocity) EXPECT_TRUE(g.col(m).tail(d).isZero(0.0));
    }
  }
}

TEST(SolveControl, NotWorseThanCoastingAndFeasible) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 6; ++trial) {
    const int d = trial % 2 == 0 ? 2 : 3;
    auto p = make_problem(rng, 3, 7, d, 1 + trial % 2);
    const ControlResult r = solve_control(p, {});
    EXPECT_TRUE(r.feasible);
    EXPECT_TRUE(plan_feasible(p, r.plan));
    EXPECT_LE(r.objective, r.objective_zero + 1e-9);
    EXPECT_NEAR(r.objective, build_objective(p, {}).value(plan_endpoints(r.plan, p.sensors.states, p.model)),
                1e-12 * r.objective);
  }
}

TEST(SolveControl, MatchesToyGridMinimum) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    auto p = make_problem(rng, 1, 1, 2);
    const ControlSettings settings;
    const ControlResult r = solve_control(p, settings);
    const double b = relaxed_bound(p.u_max, 2);
    double grid_min = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 20; ++i) {
      for (int j = 0; j <= 20; ++j) {
        ControlPlan plan = ControlPlan::zeros(1, 1, 2);
        plan.U << -b + 2.0 * b * i / 20.0, -b + 2.0 * b * j / 20.0;
        if (!plan_feasible(p, plan)) continue;
        grid_min = std::min(grid_min, oracle::composed_objective(p, settings, plan_endpoints(plan, p.sensors.states, p.model)));
      }
    }
    EXPECT_LE(r.objective, grid_min * (1.0 + 1e-3)) << "trial " << trial;
  }
}

TEST(SolveControl, StaysInsideTightBox) {
  std::mt19937_64 rng(10);
  auto p = make_problem(rng, 2, 7, 2);
  // Sensor 0 is moving toward a nearby wall; coasting would leave the box.
  p.sensors.states.col(0) << 185, 0, 4, 0;
  p.bounds.upper(0) = 200.0;
  const ControlResult r = solve_control(p, {});
  EXPECT_TRUE(std::isnan(r.objective_zero));
  EXPECT_TRUE(r.feasible);
  EXPECT_TRUE(plan_feasible(p, r.plan));
}

TEST(SolveControl, InfeasibleStartIsFlagged) {
  std::mt19937_64 rng(11);
  auto p = make_problem(rng, 1, 3, 2);
  p.sensors.states.col(0) << 199, 0, 10, 0;
  p.bounds.upper(0) = 200.0;
  const ControlResult r = solve_control(p, {});
  EXPECT_FALSE(r.feasible);
  EXPECT_FALSE(r.converged);
  EXPECT_LE(r.plan.U.cwiseAbs().maxCoeff(), relaxed_bound(p.u_max, 2) + 1e-12);
}

TEST(SolveControl, VanishingInputBound) {
  std::mt19937_64 rng(12);
  auto p = make_problem(rng, 2, 5, 2);
  p.u_max = 1e-9;
  EXPECT_LE(solve_control(p, {}).plan.U.cwiseAbs().maxCoeff(), 1e-9);
}

TEST(SolveControl, MirrorSymmetricGeometry) {
  PlanningProblem p;
  p.model = make_transition(1.0, 2);
  p.Q = process_noise_cov(5.0, 2);
  p.W = weight_matrix(1.0, 2);
  p.horizon = 3;
  p.bounds = {-box_limit(2, 200.0, 10.0), box_limit(2, 200.0, 10.0)};
  p.sensors.models = {MeasurementModel::ranging(), MeasurementModel::ranging()};
  p.sensors.states.resize(4, 2);
  p.sensors.states << 0, 0, 20, -20, 0, 0, 0, 0;
  p.targets = {{vec({60, 0, 0, 0}), StateMat(vec({4, 2, 1, 1}).asDiagonal())}};
  const ControlResult r = solve_control(p, {});
  Eigen::MatrixXd mirrored = r.plan.U.middleRows(2, 2);
  mirrored.row(1) *= -1.0;
  EXPECT_LT((r.plan.U.topRows(2) - mirrored).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(SolveControl, DeterministicAndWarmStartFeasible) {
  std::mt19937_64 rng(13);
  auto p = make_problem(rng, 3, 7, 2);
  const ControlResult a = solve_control(p, {});
  const ControlResult b = solve_control(p, {});
  EXPECT_EQ(a.plan.U, b.plan.U);
  EXPECT_EQ(a.objective, b.objective);
  const ControlResult warm = solve_control(p, {}, &a.plan);
  EXPECT_TRUE(plan_feasible(p, warm.plan));
  EXPECT_LE(warm.objective, warm.objective_zero + 1e-9);
}

TEST(SolveControl, PointModeIsTheVanishingSpreadLimit) {
  std::mt19937_64 rng(14);
  auto p = make_problem(rng, 2, 4, 2);
  ControlSettings robust;
  robust.eta = 1e-12;
  robust.average_sigma = true;
  ControlSettings point;
  point.mode = ControlMode::Point;
  const ControlResult a = solve_control(p, robust);
  const ControlResult b = solve_control(p, point);
  EXPECT_NEAR(a.objective, b.objective, 1e-6 * b.objective);
  EXPECT_LT((a.plan.U - b.plan.U).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(SolveControl, ClosedLoopFirstInputsFeasible) {
  std::mt19937_64 rng(15);
  auto p = make_problem(rng, 3, 7, 2);
  std::optional<ControlPlan> previous;
  for (int step = 0; step < 8; ++step) {
    const ControlResult r = solve_control(p, {}, previous ? &*previous : nullptr);
    ASSERT_TRUE(r.feasible);
    const auto inputs = step_control(r.plan);
    for (int m = 0; m < 3; ++m) {
      EXPECT_LE(inputs[m].norm(), p.u_max);
      p.sensors.states.col(m) = propagate<double>(p.sensors.states.col(m), inputs[m], p.model);
      EXPECT_TRUE(p.bounds.contains(p.sensors.states.col(m)));
    }
    for (auto& t : p.targets) t = {propagate<double>(t.x, AxisVec::Zero(2), p.model), t.cov};
    previous = r.plan;
  }
}
