#include "mstrack/scenario_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

namespace mstrack {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string describe(const json& j) {
  switch (j.type()) {
    case json::value_t::null: return "null";
    case json::value_t::boolean: return "a boolean";
    case json::value_t::string: return "a string";
    case json::value_t::array: return "an array";
    case json::value_t::object: return "an object";
    default: return "a number";
  }
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ParseError(path, "expected a number, got " + describe(j));
  return j.get<double>();
}

int as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ParseError(path, "expected an integer, got " + describe(j));
  const auto v = j.get<std::int64_t>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ParseError(path, "integer out of range");
  }
  return static_cast<int>(v);
}

/// Reads an array of numbers; `null_as` replaces null entries when given.
Eigen::VectorXd as_vector(const json& j, const std::string& path, std::optional<double> null_as = std::nullopt) {
  if (!j.is_array()) throw ParseError(path, "expected an array, got " + describe(j));
  if (j.size() > static_cast<std::size_t>(kMaxState)) throw ParseError(path, "too many entries");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string item = path + "/" + std::to_string(i);
    if (j[i].is_null() && null_as) {
      v(static_cast<Eigen::Index>(i)) = *null_as;
    } else {
      v(static_cast<Eigen::Index>(i)) = as_number(j[i], item);
    }
  }
  return v;
}

/// Object view that remembers which keys were read so leftovers can be rejected.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ParseError(path_.empty() ? "/" : path_, "expected an object, got " + describe(j));
  }

  std::string at(const std::string& key) const { return path_ + "/" + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& require(const std::string& key) {
    const json* v = find(key);
    if (!v) throw ParseError(at(key), "missing required field");
    return *v;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) out = as_number(*v, at(key));
  }

  void integer(const std::string& key, int& out) {
    if (const json* v = find(key)) out = as_int(*v, at(key));
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ParseError(at(key), "expected a boolean, got " + describe(*v));
      out = v->get<bool>();
    }
  }

  std::string string(const std::string& key) {
    const json& v = require(key);
    if (!v.is_string()) throw ParseError(at(key), "expected a string, got " + describe(v));
    return v.get<std::string>();
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ParseError(at(item.key()), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

MeasurementModel parse_model(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  const std::string kind = r.string("kind");
  MeasurementModel m;
  if (kind == "ranging") {
    m = MeasurementModel::ranging();
    r.number("sigma_range", m.sigma_range);
    r.number("lambda", m.lambda);
  } else if (kind == "doppler") {
    m = MeasurementModel::doppler();
    r.number("carrier_hz", m.carrier_hz);
    r.number("sigma_doppler", m.sigma_doppler);
  } else {
    throw ParseError(r.at("kind"), "expected \"ranging\" or \"doppler\", got \"" + kind + "\"");
  }
  r.number("c", m.c);
  r.finish();
  return m;
}

AccelProfile parse_profile(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  const std::string kind = r.string("kind");
  AccelProfile p;
  if (kind == "constant") {
    p.kind = ProfileKind::Constant;
    p.accel = as_vector(r.require("accel"), r.at("accel"));
  } else if (kind == "piecewise") {
    p.kind = ProfileKind::Piecewise;
    const json& segments = r.require("segments");
    if (!segments.is_array()) throw ParseError(r.at("segments"), "expected an array, got " + describe(segments));
    for (std::size_t i = 0; i < segments.size(); ++i) {
      ObjectReader s(segments[i], r.at("segments") + "/" + std::to_string(i));
      AccelSegment seg;
      s.integer("start_step", seg.start_step);
      seg.accel = as_vector(s.require("accel"), s.at("accel"));
      s.finish();
      p.segments.push_back(seg);
    }
  } else if (kind == "arc") {
    p.kind = ProfileKind::Arc;
    p.turn_rate = as_number(r.require("turn_rate"), r.at("turn_rate"));
    r.integer("start_step", p.start_step);
    r.integer("end_step", p.end_step);
    if (const json* axis = r.find("axis")) p.axis = as_vector(*axis, r.at("axis"));
  } else if (kind == "waypoints") {
    p.kind = ProfileKind::Waypoints;
    const json& points = r.require("waypoints");
    if (!points.is_array()) throw ParseError(r.at("waypoints"), "expected an array, got " + describe(points));
    for (std::size_t i = 0; i < points.size(); ++i) {
      p.waypoints.push_back(as_vector(points[i], r.at("waypoints") + "/" + std::to_string(i)));
    }
    r.number("max_accel", p.max_accel);
    r.number("capture_radius", p.capture_radius);
    r.number("position_gain", p.position_gain);
    r.number("velocity_gain", p.velocity_gain);
  } else {
    throw ParseError(r.at("kind"), "unknown profile kind \"" + kind + "\"");
  }
  r.finish();
  return p;
}

ControlSettings parse_controller(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  ControlSettings c;
  if (const json* mode = r.find("mode")) {
    if (*mode == "robust") {
      c.mode = ControlMode::Robust;
    } else if (*mode == "point") {
      c.mode = ControlMode::Point;
    } else {
      throw ParseError(r.at("mode"), "expected \"robust\" or \"point\"");
    }
  }
  r.number("eta", c.eta);
  r.boolean("average_sigma", c.average_sigma);
  r.number("barrier_initial", c.barrier_initial);
  r.number("barrier_shrink", c.barrier_shrink);
  r.integer("barrier_rounds", c.barrier_rounds);
  r.number("inner_tolerance", c.inner_tolerance);
  r.integer("max_inner_iterations", c.max_inner_iterations);
  r.number("fd_relative_step", c.fd_relative_step);
  r.finish();
  return c;
}

InitialEstimateSpec parse_initial(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  InitialEstimateSpec init;
  if (const json* policy = r.find("policy")) {
    if (*policy == "truth_offset") {
      init.policy = InitPolicy::TruthOffset;
    } else if (*policy == "fixed_prior") {
      init.policy = InitPolicy::FixedPrior;
    } else {
      throw ParseError(r.at("policy"), "expected \"truth_offset\" or \"fixed_prior\"");
    }
  }
  r.number("offset_pos_sigma", init.offset_pos_sigma);
  r.number("offset_vel_sigma", init.offset_vel_sigma);
  r.number("prior_pos_sigma", init.prior_pos_sigma);
  r.number("prior_vel_sigma", init.prior_vel_sigma);
  if (const json* state = r.find("state")) init.fixed_state = as_vector(*state, r.at("state"));
  r.finish();
  return init;
}

std::string location(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

ordered_json vector_json(const Eigen::VectorXd& v) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

ordered_json bound_json(const Eigen::VectorXd& v) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isinf(v(i))) {
      out.push_back(nullptr);
    } else {
      out.push_back(v(i));
    }
  }
  return out;
}

ordered_json model_json(const MeasurementModel& m) {
  ordered_json j;
  j["kind"] = to_string(m.kind);
  if (m.kind == SensorKind::Ranging) {
    j["sigma_range"] = m.sigma_range;
    j["lambda"] = m.lambda;
  } else {
    j["carrier_hz"] = m.carrier_hz;
    j["sigma_doppler"] = m.sigma_doppler;
  }
  j["c"] = m.c;
  return j;
}

ordered_json profile_json(const AccelProfile& p) {
  ordered_json j;
  j["kind"] = to_string(p.kind);
  switch (p.kind) {
    case ProfileKind::Constant:
      j["accel"] = vector_json(p.accel);
      break;
    case ProfileKind::Piecewise:
      j["segments"] = ordered_json::array();
      for (const auto& seg : p.segments) {
        ordered_json s;
        s["start_step"] = seg.start_step;
        s["accel"] = vector_json(seg.accel);
        j["segments"].push_back(s);
      }
      break;
    case ProfileKind::Arc:
      j["turn_rate"] = p.turn_rate;
      j["start_step"] = p.start_step;
      if (p.end_step != std::numeric_limits<int>::max()) j["end_step"] = p.end_step;
      if (p.axis.size() > 0) j["axis"] = vector_json(p.axis);
      break;
    case ProfileKind::Waypoints:
      j["waypoints"] = ordered_json::array();
      for (const auto& w : p.waypoints) j["waypoints"].push_back(vector_json(w));
      j["max_accel"] = p.max_accel;
      j["capture_radius"] = p.capture_radius;
      j["position_gain"] = p.position_gain;
      j["velocity_gain"] = p.velocity_gain;
      break;
  }
  return j;
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(location(text, e.byte), "invalid JSON");
  }

  ObjectReader r(doc, "");
  const json& version = r.require("schema_version");
  if (as_int(version, "/schema_version") != kSchemaVersion) {
    throw ParseError("/schema_version", "unsupported version, expected " + std::to_string(kSchemaVersion));
  }

  Scenario s;
  if (const json* name = r.find("name")) {
    if (!name->is_string()) throw ParseError("/name", "expected a string, got " + describe(*name));
    s.name = name->get<std::string>();
  }
  s.d = as_int(r.require("d"), "/d");
  r.number("dt", s.dt);
  r.integer("steps", s.steps);
  r.integer("horizon", s.horizon);
  r.number("a_max", s.a_max);
  r.number("u_max", s.u_max);

  s.bounds.lower = StateVec::Constant(2 * std::clamp(s.d, 0, kMaxDim), -kInf);
  s.bounds.upper = StateVec::Constant(2 * std::clamp(s.d, 0, kMaxDim), kInf);
  if (const json* box = r.find("box")) {
    ObjectReader b(*box, "/box");
    if (const json* lo = b.find("min")) s.bounds.lower = as_vector(*lo, "/box/min", -kInf);
    if (const json* hi = b.find("max")) s.bounds.upper = as_vector(*hi, "/box/max", kInf);
    b.finish();
  }

  const json& sensors = r.require("sensors");
  if (!sensors.is_array()) throw ParseError("/sensors", "expected an array, got " + describe(sensors));
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    const std::string path = "/sensors/" + std::to_string(i);
    ObjectReader sr(sensors[i], path);
    SensorSpec spec;
    spec.state = as_vector(sr.require("state"), sr.at("state"));
    spec.model = parse_model(sr.require("model"), sr.at("model"));
    sr.finish();
    s.sensors.push_back(spec);
  }

  const json& targets = r.require("targets");
  if (!targets.is_array()) throw ParseError("/targets", "expected an array, got " + describe(targets));
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const std::string path = "/targets/" + std::to_string(i);
    ObjectReader tr(targets[i], path);
    TargetSpec spec;
    spec.state = as_vector(tr.require("state"), tr.at("state"));
    spec.profile = parse_profile(tr.require("profile"), tr.at("profile"));
    tr.finish();
    s.targets.push_back(spec);
  }

  if (const json* controller = r.find("controller")) s.controller = parse_controller(*controller, "/controller");
  if (const json* lambda = r.find("lambda_override"); lambda && !lambda->is_null()) {
    s.lambda_override = as_number(*lambda, "/lambda_override");
  }
  r.integer("control_off_steps", s.control_off_steps);
  if (const json* init = r.find("initial_estimate")) s.initial = parse_initial(*init, "/initial_estimate");
  r.finish();
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path);
  return parse_scenario(buffer.str());
}

std::string dump_scenario(const Scenario& s) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["name"] = s.name;
  j["d"] = s.d;
  j["dt"] = s.dt;
  j["steps"] = s.steps;
  j["horizon"] = s.horizon;
  j["a_max"] = s.a_max;
  j["u_max"] = s.u_max;
  j["box"] = {{"min", bound_json(s.bounds.lower)}, {"max", bound_json(s.bounds.upper)}};

  j["sensors"] = ordered_json::array();
  for (const auto& sensor : s.sensors) {
    ordered_json item;
    item["state"] = vector_json(sensor.state);
    item["model"] = model_json(sensor.model);
    j["sensors"].push_back(item);
  }
  j["targets"] = ordered_json::array();
  for (const auto& target : s.targets) {
    ordered_json item;
    item["state"] = vector_json(target.state);
    item["profile"] = profile_json(target.profile);
    j["targets"].push_back(item);
  }

  const auto& c = s.controller;
  j["controller"] = {{"mode", to_string(c.mode)},
                     {"eta", c.eta},
                     {"average_sigma", c.average_sigma},
                     {"barrier_initial", c.barrier_initial},
                     {"barrier_shrink", c.barrier_shrink},
                     {"barrier_rounds", c.barrier_rounds},
                     {"inner_tolerance", c.inner_tolerance},
                     {"max_inner_iterations", c.max_inner_iterations},
                     {"fd_relative_step", c.fd_relative_step}};
  j["lambda_override"] = s.lambda_override ? ordered_json(*s.lambda_override) : ordered_json(nullptr);
  j["control_off_steps"] = s.control_off_steps;

  const auto& init = s.initial;
  ordered_json ij;
  ij["policy"] = init.policy == InitPolicy::TruthOffset ? "truth_offset" : "fixed_prior";
  ij["offset_pos_sigma"] = init.offset_pos_sigma;
  ij["offset_vel_sigma"] = init.offset_vel_sigma;
  ij["prior_pos_sigma"] = init.prior_pos_sigma;
  ij["prior_vel_sigma"] = init.prior_vel_sigma;
  if (init.fixed_state) ij["state"] = vector_json(*init.fixed_state);
  j["initial_estimate"] = ij;
  return j.dump(2) + "\n";
}

}  // namespace mstrack
