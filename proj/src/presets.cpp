#include "mstrack/presets.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mstrack {

namespace {

constexpr double kHalfWidth = 200.0;  // perimeter half-width [m]
constexpr double kSpeedLimit = 10.0;  // sensor speed bound per axis [m/s]

StateVec state(std::initializer_list<double> values) {
  StateVec v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

AxisVec zeros(int d) { return AxisVec::Zero(d); }

Scenario base(const std::string& name, int d) {
  Scenario s;
  s.name = name;
  s.d = d;
  s.dt = 1.0;
  s.steps = 100;
  s.horizon = 7;
  s.a_max = 5.0;
  s.u_max = 2.0;
  s.bounds.lower = StateVec(2 * d);
  s.bounds.upper = StateVec(2 * d);
  s.bounds.lower << StateVec::Constant(d, -kHalfWidth), StateVec::Constant(d, -kSpeedLimit);
  s.bounds.upper << StateVec::Constant(d, kHalfWidth), StateVec::Constant(d, kSpeedLimit);
  return s;
}

SensorSpec ranging_at(const StateVec& s) { return {s, MeasurementModel::ranging()}; }
SensorSpec doppler_at(const StateVec& s) { return {s, MeasurementModel::doppler()}; }

TargetSpec constant_velocity(const StateVec& x, int d) {
  TargetSpec t;
  t.state = x;
  t.profile.kind = ProfileKind::Constant;
  t.profile.accel = zeros(d);
  return t;
}

/// Sensors clustered near the perimeter center, a few metres apart.
void center_cluster(Scenario& s) {
  s.sensors = {ranging_at(state({-2, -1, 0, 0})), ranging_at(state({2, -1, 0, 0})), ranging_at(state({0, 2, 0, 0}))};
}

Scenario fig1_two_targets() {
  Scenario s = base("fig1_two_targets", 2);
  center_cluster(s);
  // One target leaves the perimeter from near the center, the other enters from outside.
  TargetSpec out;
  out.state = state({15, 10, 1.5, 1.0});
  out.profile.kind = ProfileKind::Piecewise;
  out.profile.segments = {{0, zeros(2)}, {30, (AxisVec(2) << 0.05, -0.05).finished()}, {60, zeros(2)}};
  TargetSpec in;
  in.state = state({260, 120, -3.0, -1.0});
  in.profile.kind = ProfileKind::Piecewise;
  in.profile.segments = {{0, zeros(2)}, {30, (AxisVec(2) << 0.03, 0.02).finished()}, {60, zeros(2)}};
  s.targets = {out, in};
  return s;
}

Scenario fig3_single_target() {
  Scenario s = base("fig3_single_target", 2);
  center_cluster(s);
  s.targets = {constant_velocity(state({10, 5, -2.5, -2.5}), 2)};
  return s;
}

Scenario fig4_arc(ControlMode mode) {
  Scenario s = base(mode == ControlMode::Robust ? "fig4_arc_robust" : "fig4_arc_point", 2);
  s.controller.mode = mode;
  // Ranging noise variance doubles at about 39 m, so standoff distance matters.
  s.lambda_override = 1.5e13;
  center_cluster(s);
  // Half circle at constant speed: radius 120 m, speed 4 m/s, centred on the perimeter.
  const double speed = 4.0;
  const double radius = 120.0;
  TargetSpec arc;
  arc.state = state({radius, 0, 0, speed});
  arc.profile.kind = ProfileKind::Arc;
  arc.profile.turn_rate = speed / radius;
  arc.profile.start_step = 0;
  arc.profile.end_step = static_cast<int>(std::lround(std::numbers::pi * radius / speed));
  s.targets = {arc};
  return s;
}

Scenario fig5_doppler_3d(bool control_off) {
  Scenario s = base(control_off ? "fig5_doppler_3d_control_off" : "fig5_doppler_3d", 3);
  const double r = 30.0;
  s.sensors = {doppler_at(state({r, 0, 0, 0, 0, 0})),  doppler_at(state({-r, 0, 0, 0, 0, 0})),
               doppler_at(state({0, r, 0, 0, 0, 0})),  doppler_at(state({0, -r, 0, 0, 0, 0})),
               doppler_at(state({0, 0, r, 0, 0, 0})),  doppler_at(state({0, 0, -r, 0, 0, 0}))};
  // Arc from the top-right corner along the outer boundary toward the bottom-left.
  const double speed = 5.0;
  const double radius = 170.0;
  TargetSpec arc;
  const double start = std::numbers::pi / 4.0;
  arc.state = state({radius * std::cos(start), radius * std::sin(start), 20.0, -speed * std::sin(start),
                     speed * std::cos(start), 0.0});
  arc.profile.kind = ProfileKind::Arc;
  arc.profile.turn_rate = speed / radius;
  arc.profile.axis = (AxisVec(3) << 0, 0, 1).finished();
  s.targets = {arc};
  if (control_off) s.control_off_steps = s.steps / 2;
  return s;
}

Scenario fig7_mixed_sensors() {
  Scenario s = base("fig7_mixed_sensors", 3);
  const double c = 150.0;
  s.sensors = {ranging_at(state({-c, -c, -c, 0, 0, 0})), ranging_at(state({c, -c, c, 0, 0, 0})),
               doppler_at(state({-c, c, c, 0, 0, 0})), ranging_at(state({1, 1, 1, 0, 0, 0}))};
  s.targets = {constant_velocity(state({-60, -40, 10, 1.0, 0.8, 0.1}), 3)};
  return s;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"fig1_two_targets", "fig3_single_target",         "fig4_arc_robust",   "fig4_arc_point",
          "fig5_doppler_3d",  "fig5_doppler_3d_control_off", "fig7_mixed_sensors"};
}

bool has_preset(const std::string& name) {
  for (const auto& n : preset_names()) {
    if (n == name) return true;
  }
  return false;
}

Scenario preset(const std::string& name) {
  if (name == "fig1_two_targets") return fig1_two_targets();
  if (name == "fig3_single_target") return fig3_single_target();
  if (name == "fig4_arc_robust") return fig4_arc(ControlMode::Robust);
  if (name == "fig4_arc_point") return fig4_arc(ControlMode::Point);
  if (name == "fig5_doppler_3d") return fig5_doppler_3d(false);
  if (name == "fig5_doppler_3d_control_off") return fig5_doppler_3d(true);
  if (name == "fig7_mixed_sensors") return fig7_mixed_sensors();
  throw std::invalid_argument("unknown preset: " + name);
}

}  // namespace mstrack
