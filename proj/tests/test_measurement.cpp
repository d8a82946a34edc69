#include <gtest/gtest.h>

#include <random>

#include "mstrack/measurement.hpp"
#include "oracles.hpp"

using namespace mstrack;

namespace {

using oracle::central_difference;
using oracle::random_state;
using oracle::vec;

double relative_error(const StateVec& a, const StateVec& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

}  // namespace

TEST(MeanRtt, HandEvaluation) {
  const auto model = MeasurementModel::ranging(1.0, 0.0, 3e8);
  EXPECT_NEAR(mean_rtt(vec({300, 400, 0, 0}), vec({0, 0, 0, 0}), model), 2.0 * 500.0 / 3e8, 1e-20);
}

TEST(MeanRtt, UnitNormalizationAndVelocityIndependence) {
  const auto model = MeasurementModel::ranging(1.0, 0.0, 3e8);
  EXPECT_DOUBLE_EQ(mean_rtt(vec({1.5e8, 0, 0, 0}), vec({0, 0, 0, 0}), model), 1.0);
  const double a = mean_rtt(vec({30, 40, 1, 2}), vec({1, 1, 0, 0}), model);
  const double b = mean_rtt(vec({30, 40, -9, 7}), vec({1, 1, 5, 5}), model);
  EXPECT_EQ(a, b);
}

TEST(MeanRtt, SingularGeometryThrows) {
  const auto model = MeasurementModel::ranging();
  EXPECT_THROW(mean_rtt(vec({1, 1, 0, 0}), vec({1, 1, 3, 3}), model), SingularGeometry);
  EXPECT_THROW(mean_gradient(model, vec({1, 1, 0, 0}), vec({1, 1 + 1e-7, 3, 3})), SingularGeometry);
}

TEST(MeanDoppler, ZeroRelativeVelocity) {
  const auto model = MeasurementModel::doppler();
  EXPECT_EQ(mean_doppler(vec({100, 50, 3, 4}), vec({0, 0, 3, 4}), model), 0.0);
}

TEST(MeanDoppler, ClosingTargetHandEvaluation) {
  const auto model = MeasurementModel::doppler(2.3e9, 1.0, 3e8);
  const double expected = -(2.3e9 / 3e8) * (100.0 * -10.0 / 100.0);
  EXPECT_NEAR(mean_doppler(vec({100, 0, -10, 0}), vec({0, 0, 0, 0}), model), expected, 1e-9);
  EXPECT_NEAR(expected, 76.6666666667, 1e-9);
}

TEST(MeanDoppler, TangentialMotionIsZero) {
  const auto model = MeasurementModel::doppler();
  EXPECT_NEAR(mean_doppler(vec({100, 0, 0, 25}), vec({0, 0, 0, 0}), model), 0.0, 1e-12);
}

TEST(MeanDoppler, Invariances) {
  const auto model = MeasurementModel::doppler();
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const StateVec x = random_state(rng, 3, 200, 10);
    const StateVec s = random_state(rng, 3, 200, 10);
    StateVec shift = random_state(rng, 3, 50, 5);
    const double base = mean_doppler(x, s, model);
    EXPECT_NEAR(mean_doppler(StateVec(x + shift), StateVec(s + shift), model), base, 1e-9 * (1 + std::abs(base)));
    // Odd in relative velocity: mirror velocities about the sensor's.
    StateVec mirrored = x;
    mirrored.tail(3) = 2.0 * s.tail(3) - x.tail(3);
    EXPECT_NEAR(mean_doppler(mirrored, s, model), -base, 1e-9 * (1 + std::abs(base)));
  }
}

TEST(MeanRtt, TranslationInvariance) {
  const auto model = MeasurementModel::ranging();
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const StateVec x = random_state(rng, 2, 300, 10);
    const StateVec s = random_state(rng, 2, 300, 10);
    StateVec shift = random_state(rng, 2, 80, 5);
    shift.tail(2).setZero();
    StateVec vel_change = random_state(rng, 2, 0, 7);
    const double base = mean_rtt(x, s, model);
    EXPECT_NEAR(mean_rtt(StateVec(x + shift + vel_change), StateVec(s + shift), model), base, 1e-12 * base);
  }
}

TEST(Variance, DopplerConstant) {
  const auto model = MeasurementModel::doppler(2.3e9, 1.0);
  EXPECT_EQ(variance(model, vec({1, 2, 3, 4}), vec({5, 6, 7, 8})), 1.0);
  EXPECT_EQ(variance(model, vec({100, 2, 3, 4}), vec({5, -6, 7, 8})), 1.0);
}

TEST(Variance, RangingWithoutDistanceDependence) {
  const auto model = MeasurementModel::ranging(1.0, 0.0, 3e8);
  EXPECT_DOUBLE_EQ(variance(model, vec({1000, 0, 0, 0}), vec({0, 0, 0, 0})), 1.0 / 9e16);
  EXPECT_DOUBLE_EQ(variance(model, vec({10, 0, 0, 0}), vec({0, 0, 0, 0})), 1.0 / 9e16);
}

TEST(Variance, RangingDistanceDependentSubstitution) {
  const auto model = MeasurementModel::ranging(1.0, 0.01, 3e8);
  const StateVec x = vec({300, 400, 0, 0});
  const StateVec s = vec({0, 0, 0, 0});
  const double mu = 2.0 * 500.0 / 3e8;
  EXPECT_DOUBLE_EQ(variance(model, x, s), (1.0 / 9e16) * (1.0 + 0.01 * mu * mu));
  EXPECT_GE(variance(model, x, s), 1.0 / 9e16);
}

TEST(Gradient, RangingAnalyticExample) {
  const auto model = MeasurementModel::ranging(1.0, 0.0, 3e8);
  const StateVec g = mean_gradient(model, vec({100, 0, 0, 0}), vec({0, 0, 0, 0}));
  EXPECT_NEAR(g(0), 2.0 / 3e8, 1e-24);
  EXPECT_EQ(g(1), 0.0);
  EXPECT_EQ(g(2), 0.0);
  EXPECT_EQ(g(3), 0.0);
}

TEST(Gradient, DopplerZeroRelativeVelocityHasNoPositionGradient) {
  const auto model = MeasurementModel::doppler();
  const StateVec g = mean_gradient(model, vec({100, 30, 2, 2}), vec({0, 0, 2, 2}));
  EXPECT_EQ(g.head(2).norm(), 0.0);
  EXPECT_GT(g.tail(2).norm(), 0.0);
}

TEST(Gradient, ConstantVarianceModelsHaveZeroVarianceGradient) {
  const StateVec x = vec({100, 30, 2, 2});
  const StateVec s = vec({0, 0, 1, 2});
  EXPECT_EQ(variance_gradient(MeasurementModel::doppler(), x, s).norm(), 0.0);
  EXPECT_EQ(variance_gradient(MeasurementModel::ranging(1.0, 0.0), x, s).norm(), 0.0);
}

TEST(Gradient, MatchesFiniteDifferencesAtRandomGeometries) {
  std::mt19937_64 rng(11);
  // A large lambda makes the distance dependence visible at double precision.
  const MeasurementModel models[] = {MeasurementModel::ranging(1.0, 0.01), MeasurementModel::ranging(2.0, 4e12),
                                     MeasurementModel::doppler()};
  for (const auto& model : models) {
    for (int d : {2, 3}) {
      for (int trial = 0; trial < 100; ++trial) {
        const StateVec x = random_state(rng, d, 300, 10);
        const StateVec s = random_state(rng, d, 300, 10);
        if ((x.head(d) - s.head(d)).norm() < 5.0) continue;
        const StateVec g = mean_gradient(model, x, s);
        const StateVec g_fd = central_difference([&](const StateVec& p) { return mean(model, p, s); }, x);
        EXPECT_LT(relative_error(g, g_fd), 1e-6);
        const StateVec h = variance_gradient(model, x, s);
        if (model.kind == SensorKind::Ranging && model.lambda > 1.0) {
          const StateVec h_fd = central_difference([&](const StateVec& p) { return variance(model, p, s); }, x);
          EXPECT_LT(relative_error(h, h_fd), 1e-6);
        }
      }
    }
  }
}

TEST(Stack, SingleSensor) {
  SensorArray sensors{{MeasurementModel::ranging()}, Eigen::MatrixXd::Zero(4, 1)};
  const auto stacked = stack(sensors, vec({10, 0, 0, 0}));
  EXPECT_EQ(stacked.mean.size(), 1);
  EXPECT_EQ(stacked.covariance().rows(), 1);
}

TEST(Stack, MixedSensorsInIdOrder) {
  Eigen::MatrixXd states(4, 3);
  states << 0, 50, -20, 0, 10, 40, 0, 1, 0, 0, -1, 2;
  SensorArray sensors{{MeasurementModel::ranging(), MeasurementModel::doppler(), MeasurementModel::ranging(2.0, 0.0)},
                      states};
  const StateVec x = vec({100, 100, 3, -4});
  const auto stacked = stack(sensors, x);
  for (int m = 0; m < 3; ++m) {
    EXPECT_EQ(stacked.mean(m), mean(sensors.models[m], x, sensors.state(m)));
    EXPECT_EQ(stacked.variance(m), variance(sensors.models[m], x, sensors.state(m)));
  }
  EXPECT_TRUE(stacked.covariance().isDiagonal());
  EXPECT_THROW(stack(SensorArray{{}, Eigen::MatrixXd(4, 0)}, x), std::invalid_argument);
}

TEST(Sample, DeterministicGivenSeed) {
  const auto model = MeasurementModel::doppler();
  const StateVec x = vec({100, 10, -3, 1});
  const StateVec s = vec({0, 0, 0, 0});
  std::mt19937_64 a(99);
  std::mt19937_64 b(99);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(sample(a, model, x, s).value, sample(b, model, x, s).value);
}

TEST(Sample, VanishingNoiseReturnsMean) {
  const auto model = MeasurementModel::doppler(2.3e9, 1e-300);
  const StateVec x = vec({100, 10, -3, 1});
  const StateVec s = vec({0, 0, 0, 0});
  std::mt19937_64 rng(1);
  EXPECT_DOUBLE_EQ(sample(rng, model, x, s).value, mean(model, x, s));
}

TEST(Sample, EmpiricalMeanWithinFourStandardErrors) {
  const auto model = MeasurementModel::ranging(1.0, 0.01);
  const StateVec x = vec({300, 400, 0, 0});
  const StateVec s = vec({0, 0, 0, 0});
  std::mt19937_64 rng(2024);
  const int draws = 100000;
  double sum = 0.0;
  for (int i = 0; i < draws; ++i) sum += sample(rng, model, x, s, 1, 2, 3).value;
  const double se = std::sqrt(variance(model, x, s) / draws);
  EXPECT_LT(std::abs(sum / draws - mean(model, x, s)), 4.0 * se);
}
