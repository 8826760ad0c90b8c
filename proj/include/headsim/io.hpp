#pragma once

// File formats: scene files (JSON), trace files (CSV with a commented
// header), engine config (JSON), memory logs (JSON lines), and ingestion of
// spline-style UCY crowd annotations.

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "headsim/engine.hpp"
#include "headsim/eval.hpp"

namespace headsim {

using json = nlohmann::json;

inline constexpr std::string_view kSceneVersion = "headsim-scene/1";
inline constexpr std::string_view kTraceVersion = "headsim-trace/1";

namespace detail {

inline const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw SchemaError(path + key, "missing");
  return j.at(key);
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  return j.get<double>();
}

inline std::string string(const json& j, const std::string& path) {
  if (!j.is_string()) throw SchemaError(path, "expected a string");
  return j.get<std::string>();
}

inline Vec3 vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw SchemaError(path, "expected [x, y, z]");
  return {number(j[0], path + "[0]"), number(j[1], path + "[1]"), number(j[2], path + "[2]")};
}

inline json to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

inline UnitQuaternion quat(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 4) throw SchemaError(path, "expected [w, x, y, z]");
  try {
    return UnitQuaternion::checked(number(j[0], path), number(j[1], path), number(j[2], path), number(j[3], path));
  } catch (const ContractViolation&) {
    throw SchemaError(path, "quaternion is not unit-norm");
  }
}

inline json to_json(const UnitQuaternion& q) {
  const auto c = q.components();
  return json::array({c[0], c[1], c[2], c[3]});
}

}  // namespace detail

// ---------------------------------------------------------------- scenes

struct TrajectoryRecord {
  std::string agent;
  BodyTrajectory trajectory;
  // Set when the record was written as a path walked at constant speed.
  std::optional<std::vector<Vec3>> path;
  double speed{0.0};
  double start{0.0};
};

struct SceneFile {
  Scene scene;
  std::vector<TrajectoryRecord> trajectories;

  const TrajectoryRecord* trajectory(std::string_view agent) const {
    for (const auto& t : trajectories) {
      if (t.agent == agent) return &t;
    }
    return nullptr;
  }
};

inline Entity parse_entity(const json& j, const std::string& path, bool agent) {
  using namespace detail;
  Entity e;
  e.id = string(require(j, "id", path + "."), path + ".id");
  e.class_label = string(require(j, "class", path + "."), path + ".class");
  if (j.contains("tags")) {
    const json& tags = j.at("tags");
    if (!tags.is_array()) throw SchemaError(path + ".tags", "expected an array");
    for (std::size_t i = 0; i < tags.size(); ++i) {
      const std::string p = path + ".tags[" + std::to_string(i) + "]";
      const auto tag = parse_tag(string(tags[i], p));
      if (!tag) throw SchemaError(p, "unknown tag '" + tags[i].get<std::string>() + "'");
      e.tags.insert(*tag);
    }
  }
  const json& wps = require(j, "waypoints", path + ".");
  if (!wps.is_array()) throw SchemaError(path + ".waypoints", "expected an array");
  for (std::size_t i = 0; i < wps.size(); ++i) {
    const std::string p = path + ".waypoints[" + std::to_string(i) + "]";
    e.waypoints.push_back({number(require(wps[i], "t", p + "."), p + ".t"),
                           vec3(require(wps[i], "position", p + "."), p + ".position")});
  }
  e.extents = vec3(require(j, "extents", path + "."), path + ".extents");
  if (j.contains("velocity")) e.velocity = vec3(j.at("velocity"), path + ".velocity");
  if (j.contains("hint")) e.description_hint = string(j.at("hint"), path + ".hint");
  if (j.contains("appear_at")) e.appear_at = number(j.at("appear_at"), path + ".appear_at");
  if (j.contains("vanish_at")) e.vanish_at = number(j.at("vanish_at"), path + ".vanish_at");
  e.is_agent = agent;
  return e;
}

inline json entity_to_json(const Entity& e) {
  json j;
  j["id"] = e.id;
  j["class"] = e.class_label;
  json tags = json::array();
  for (Tag t : e.tags.to_vector()) tags.push_back(std::string(tag_name(t)));
  j["tags"] = tags;
  json wps = json::array();
  for (const auto& w : e.waypoints) wps.push_back({{"t", w.t}, {"position", detail::to_json(w.position)}});
  j["waypoints"] = wps;
  j["extents"] = detail::to_json(e.extents);
  if (e.velocity.norm() > 0.0) j["velocity"] = detail::to_json(e.velocity);
  if (!e.description_hint.empty()) j["hint"] = e.description_hint;
  if (e.appear_at) j["appear_at"] = *e.appear_at;
  if (e.vanish_at) j["vanish_at"] = *e.vanish_at;
  return j;
}

inline TrajectoryRecord parse_trajectory(const json& j, const std::string& path) {
  using namespace detail;
  TrajectoryRecord r;
  r.agent = string(require(j, "agent", path + "."), path + ".agent");
  try {
    if (j.contains("path")) {
      const json& pts = j.at("path");
      if (!pts.is_array()) throw SchemaError(path + ".path", "expected an array");
      std::vector<Vec3> p;
      for (std::size_t i = 0; i < pts.size(); ++i) p.push_back(vec3(pts[i], path + ".path[" + std::to_string(i) + "]"));
      r.speed = number(require(j, "speed", path + "."), path + ".speed");
      if (j.contains("start")) r.start = number(j.at("start"), path + ".start");
      r.trajectory = BodyTrajectory::walk(p, r.speed, 0.2, r.start);
      r.path = std::move(p);
      return r;
    }
    const json& samples = require(j, "samples", path + ".");
    if (!samples.is_array()) throw SchemaError(path + ".samples", "expected an array");
    std::vector<TrajectorySample> out;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const std::string p = path + ".samples[" + std::to_string(i) + "]";
      TrajectorySample s;
      s.t = number(require(samples[i], "t", p + "."), p + ".t");
      s.position = vec3(require(samples[i], "position", p + "."), p + ".position");
      if (samples[i].contains("heading")) {
        s.heading = quat(samples[i].at("heading"), p + ".heading");
      } else if (!out.empty()) {
        const Vec3 d = s.position - out.back().position;
        s.heading = d.norm_xy() > 1e-9 ? UnitQuaternion::from_yaw(std::atan2(d.y, d.x)) : out.back().heading;
        if (out.size() == 1 && !samples[0].contains("heading")) out[0].heading = s.heading;
      }
      out.push_back(s);
    }
    r.trajectory = BodyTrajectory(std::move(out));
  } catch (const ContractViolation& ex) {
    throw SchemaError(path, ex.what());
  }
  return r;
}

inline json trajectory_to_json(const TrajectoryRecord& r) {
  json j;
  j["agent"] = r.agent;
  if (r.path) {
    json pts = json::array();
    for (const auto& p : *r.path) pts.push_back(detail::to_json(p));
    j["path"] = pts;
    j["speed"] = r.speed;
    if (r.start != 0.0) j["start"] = r.start;
    return j;
  }
  json samples = json::array();
  for (const auto& s : r.trajectory.samples()) {
    samples.push_back({{"t", s.t}, {"position", detail::to_json(s.position)}, {"heading", detail::to_json(s.heading)}});
  }
  j["samples"] = samples;
  return j;
}

inline SceneFile parse_scene(const json& j) {
  using namespace detail;
  if (!j.is_object()) throw SchemaError("", "scene file must be a JSON object");
  const std::string version = string(require(j, "version", ""), "version");
  if (version != kSceneVersion) throw SchemaError("version", "unsupported version '" + version + "'");
  SceneFile f;
  if (j.contains("name")) f.scene.name = string(j.at("name"), "name");
  const json& goal = require(j, "goal", "");
  f.scene.goal.text = string(require(goal, "text", "goal."), "goal.text");
  f.scene.goal.position = vec3(require(goal, "position", "goal."), "goal.position");
  if (j.contains("condition")) {
    const auto c = parse_condition(string(j.at("condition"), "condition"));
    if (!c) throw SchemaError("condition", "expected MDC, APC or external");
    f.scene.condition = *c;
  }
  auto list = [&](const char* key, bool agent, std::vector<Entity>& dst) {
    if (!j.contains(key)) return;
    const json& arr = j.at(key);
    if (!arr.is_array()) throw SchemaError(key, "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      dst.push_back(parse_entity(arr[i], std::string(key) + "[" + std::to_string(i) + "]", agent));
    }
  };
  list("entities", false, f.scene.entities);
  list("agents", true, f.scene.agents);
  if (j.contains("trajectories")) {
    const json& arr = j.at("trajectories");
    if (!arr.is_array()) throw SchemaError("trajectories", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      f.trajectories.push_back(parse_trajectory(arr[i], "trajectories[" + std::to_string(i) + "]"));
    }
  }
  f.scene.validate();
  return f;
}

inline json scene_to_json(const SceneFile& f) {
  json j;
  j["version"] = std::string(kSceneVersion);
  j["name"] = f.scene.name;
  j["condition"] = std::string(condition_name(f.scene.condition));
  j["goal"] = {{"text", f.scene.goal.text}, {"position", detail::to_json(f.scene.goal.position)}};
  json ents = json::array();
  for (const auto& e : f.scene.entities) ents.push_back(entity_to_json(e));
  j["entities"] = ents;
  json agents = json::array();
  for (const auto& e : f.scene.agents) agents.push_back(entity_to_json(e));
  j["agents"] = agents;
  json trajs = json::array();
  for (const auto& t : f.trajectories) trajs.push_back(trajectory_to_json(t));
  j["trajectories"] = trajs;
  return j;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("path", "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& ex) {
    throw SchemaError(what, std::string("malformed JSON: ") + ex.what());
  }
}

inline SceneFile load_scene(const std::string& path) { return parse_scene(parse_json_text(read_text(path), path)); }

inline void save_scene(const std::string& path, const SceneFile& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError("out", "cannot write '" + path + "'");
  out << scene_to_json(f).dump(2) << '\n';
}

// ---------------------------------------------------------------- traces

struct TraceRow {
  double t{0.0};
  std::array<double, 4> q{1, 0, 0, 0};  // w, x, y, z as written
  std::string phase;
  std::string driver;
  bool operator==(const TraceRow&) const = default;
};

struct TraceFile {
  std::string agent;
  std::string scenario;
  std::string condition;
  double tick{0.2};
  std::uint64_t seed{0};
  std::vector<TraceRow> rows;

  bool operator==(const TraceFile&) const = default;

  std::vector<UnitQuaternion> orientations() const {
    std::vector<UnitQuaternion> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(UnitQuaternion::normalized(r.q[0], r.q[1], r.q[2], r.q[3]));
    return out;
  }

  HeadTrace head_trace() const {
    HeadTrace h;
    h.agent = agent;
    h.scenario = scenario;
    h.condition = parse_condition(condition).value_or(Condition::External);
    h.tick = tick;
    h.samples = orientations();
    return h;
  }
};

inline TraceFile make_trace_file(const std::vector<TickRecord>& ticks, std::string agent, std::string scenario,
                                 std::string condition, std::uint64_t seed, double tick = 0.2) {
  TraceFile f{std::move(agent), std::move(scenario), std::move(condition), tick, seed, {}};
  for (const auto& r : ticks) {
    TraceRow row;
    row.t = r.t;
    row.q = r.head.components();
    row.phase = std::string(phase_name(r.phase));
    if (r.driver) row.driver = std::string(driver_name(*r.driver));
    f.rows.push_back(std::move(row));
  }
  return f;
}

inline void write_trace(std::ostream& os, const TraceFile& f) {
  os << "# " << kTraceVersion << '\n';
  os << "# agent=" << f.agent << '\n';
  os << "# scenario=" << f.scenario << '\n';
  os << "# condition=" << f.condition << '\n';
  char buf[160];
  std::snprintf(buf, sizeof buf, "# tick=%.3f\n", f.tick);
  os << buf;
  os << "# seed=" << f.seed << '\n';
  os << "t,qw,qx,qy,qz,phase,driver\n";
  for (const auto& r : f.rows) {
    std::snprintf(buf, sizeof buf, "%.12f,%.12f,%.12f,%.12f,%.12f,", r.t, r.q[0], r.q[1], r.q[2], r.q[3]);
    os << buf << r.phase << ',' << r.driver << '\n';
  }
}

inline TraceFile parse_trace(std::istream& in) {
  TraceFile f;
  std::string line;
  std::size_t lineno = 0;
  bool versioned = false, header_seen = false;
  auto field_error = [&](const std::string& field, const std::string& msg) {
    return SchemaError(field, "line " + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string body = line.size() > 2 ? line.substr(2) : "";
      if (body == kTraceVersion) {
        versioned = true;
        continue;
      }
      const auto eq = body.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = body.substr(0, eq), value = body.substr(eq + 1);
      try {
        if (key == "agent") f.agent = value;
        else if (key == "scenario") f.scenario = value;
        else if (key == "condition") f.condition = value;
        else if (key == "tick") f.tick = std::stod(value);
        else if (key == "seed") f.seed = std::stoull(value);
      } catch (const std::exception&) {
        throw field_error(key, "bad header value '" + value + "'");
      }
      continue;
    }
    if (!header_seen) {
      if (line != "t,qw,qx,qy,qz,phase,driver") throw field_error("header", "unexpected column header");
      header_seen = true;
      continue;
    }
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    if (!line.empty() && line.back() == ',') cols.emplace_back();
    if (cols.size() != 7) throw field_error("row", "expected 7 columns");
    TraceRow r;
    try {
      r.t = std::stod(cols[0]);
      for (int i = 0; i < 4; ++i) r.q[static_cast<std::size_t>(i)] = std::stod(cols[static_cast<std::size_t>(i) + 1]);
    } catch (const std::exception&) {
      throw field_error("row", "non-numeric value");
    }
    const double n = std::sqrt(r.q[0] * r.q[0] + r.q[1] * r.q[1] + r.q[2] * r.q[2] + r.q[3] * r.q[3]);
    if (std::abs(n - 1.0) > 1e-6) throw field_error("q", "quaternion is not unit-norm");
    if (!cols[5].empty() && !parse_phase(cols[5])) throw field_error("phase", "unknown phase '" + cols[5] + "'");
    if (!cols[6].empty() && !parse_driver(cols[6])) throw field_error("driver", "unknown driver '" + cols[6] + "'");
    if (!f.rows.empty() && !(r.t > f.rows.back().t)) throw field_error("t", "timestamps must increase");
    r.phase = cols[5];
    r.driver = cols[6];
    f.rows.push_back(std::move(r));
  }
  if (!versioned) throw SchemaError("version", "missing '# " + std::string(kTraceVersion) + "' line");
  return f;
}

inline TraceFile load_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("path", "cannot open '" + path + "'");
  return parse_trace(in);
}

inline void save_trace(const std::string& path, const TraceFile& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError("out", "cannot write '" + path + "'");
  write_trace(out, f);
}

// ---------------------------------------------------------------- config

inline EngineConfig parse_config(const json& j, EngineConfig cfg = {}) {
  using namespace detail;
  if (!j.is_object()) throw SchemaError("", "config must be a JSON object");
  static const std::set<std::string> known{"tick",         "turn_rate",      "hold",     "lookahead", "ssim_threshold",
                                           "fmm",          "drivers",        "oracle",   "latency",   "seed",
                                           "fov",          "charge_latency", "use_res", "use_llm"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw SchemaError(it.key(), "unknown config key");
  }
  auto num = [&](const json& obj, const char* key, double& dst, const std::string& prefix) {
    if (obj.contains(key)) dst = number(obj.at(key), prefix + key);
  };
  num(j, "tick", cfg.tick, "");
  if (j.contains("turn_rate")) {
    try {
      cfg.turn_rate = AngularRate(number(j.at("turn_rate"), "turn_rate"));
    } catch (const ContractViolation& ex) {
      throw SchemaError("turn_rate", ex.what());
    }
  }
  if (j.contains("hold")) {
    const json& h = j.at("hold");
    num(h, "mean", cfg.hold.mean, "hold.");
    num(h, "sd", cfg.hold.sd, "hold.");
    num(h, "min", cfg.hold.min, "hold.");
    num(h, "max", cfg.hold.max, "hold.");
  }
  num(j, "lookahead", cfg.lookahead, "");
  num(j, "ssim_threshold", cfg.ssim_threshold, "");
  if (j.contains("fmm")) {
    const json& m = j.at("fmm");
    if (m.contains("recent")) cfg.fmm_recent = static_cast<std::size_t>(number(m.at("recent"), "fmm.recent"));
    if (m.contains("relevant")) cfg.fmm_relevant = static_cast<std::size_t>(number(m.at("relevant"), "fmm.relevant"));
  }
  if (j.contains("drivers")) {
    const json& d = j.at("drivers");
    if (!d.is_object()) throw SchemaError("drivers", "expected an object of driver flags");
    for (auto it = d.begin(); it != d.end(); ++it) {
      const auto drv = parse_driver(it.key());
      if (!drv) throw SchemaError("drivers." + it.key(), "unknown driver");
      if (!it.value().is_boolean()) throw SchemaError("drivers." + it.key(), "expected a boolean");
      cfg.drivers = it.value().get<bool>() ? cfg.drivers.with(*drv) : cfg.drivers.without(*drv);
    }
  }
  if (j.contains("oracle")) {
    const json& o = j.at("oracle");
    num(o, "hazard_range", cfg.oracle.hazard_range, "oracle.");
    num(o, "crossing_distance", cfg.oracle.crossing_distance, "oracle.");
    num(o, "crossing_horizon", cfg.oracle.crossing_horizon, "oracle.");
    num(o, "min_crossing_speed", cfg.oracle.min_crossing_speed, "oracle.");
    num(o, "flow_cone_deg", cfg.oracle.flow_cone_deg, "oracle.");
    num(o, "flow_min_speed", cfg.oracle.flow_min_speed, "oracle.");
    num(o, "habit_period", cfg.oracle.habit_period, "oracle.");
    num(o, "habit_sweep_deg", cfg.oracle.habit_sweep_deg, "oracle.");
    if (o.contains("flow_min_agents")) {
      cfg.oracle.flow_min_agents = static_cast<int>(number(o.at("flow_min_agents"), "oracle.flow_min_agents"));
    }
  }
  if (j.contains("latency")) {
    const json& l = j.at("latency");
    auto role = [&](const char* key, LatencyModel::Role& r) {
      if (!l.contains(key)) return;
      const std::string p = std::string("latency.") + key + ".";
      num(l.at(key), "mean", r.mean, p);
      num(l.at(key), "spread", r.spread, p);
    };
    role("describe", cfg.latency.describe);
    role("plan", cfg.latency.plan);
    role("validate", cfg.latency.validate);
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw SchemaError("seed", "expected a non-negative integer");
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("fov")) {
    const json& v = j.at("fov");
    num(v, "horizontal_deg", cfg.fov.horizontal_fov_deg, "fov.");
    num(v, "vertical_deg", cfg.fov.vertical_fov_deg, "fov.");
    num(v, "max_range", cfg.fov.max_range, "fov.");
    if (v.contains("raster")) {
      const int r = static_cast<int>(number(v.at("raster"), "fov.raster"));
      cfg.fov.raster_width = cfg.fov.raster_height = r;
    }
  }
  auto flag = [&](const char* key, bool& dst) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_boolean()) throw SchemaError(key, "expected a boolean");
    dst = j.at(key).get<bool>();
  };
  flag("charge_latency", cfg.charge_latency);
  flag("use_res", cfg.use_res);
  flag("use_llm", cfg.use_llm);

  if (!(cfg.tick > 0.0)) throw SchemaError("tick", "must be positive");
  if (!(cfg.lookahead >= 0.0)) throw SchemaError("lookahead", "must be non-negative");
  if (!(cfg.hold.min <= cfg.hold.max)) throw SchemaError("hold", "min exceeds max");
  if (cfg.fmm_recent == 0) throw SchemaError("fmm.recent", "must be positive");
  try {
    cfg.fov.validate();
  } catch (const ContractViolation& ex) {
    throw SchemaError("fov", ex.what());
  }
  return cfg;
}

inline EngineConfig load_config(const std::string& path) { return parse_config(parse_json_text(read_text(path), path)); }

// ---------------------------------------------------------------- memory log

inline json action_to_json(const ActionReason& a) {
  json j;
  if (const auto* id = a.target_entity()) {
    j["target"] = {{"entity", *id}};
  } else {
    j["target"] = {{"orientation", detail::to_json(*a.target_orientation())}};
  }
  j["driver"] = std::string(driver_name(a.driver));
  j["rationale"] = a.rationale;
  j["issued_at"] = a.issued_at;
  return j;
}

inline ActionReason action_from_json(const json& j, const std::string& path) {
  using namespace detail;
  ActionReason a;
  const json& target = require(j, "target", path + ".");
  if (target.contains("entity")) {
    a.target = string(target.at("entity"), path + ".target.entity");
  } else if (target.contains("orientation")) {
    a.target = quat(target.at("orientation"), path + ".target.orientation");
  } else {
    throw SchemaError(path + ".target", "expected entity or orientation");
  }
  const auto d = parse_driver(string(require(j, "driver", path + "."), path + ".driver"));
  if (!d) throw SchemaError(path + ".driver", "unknown driver");
  a.driver = *d;
  if (j.contains("rationale")) a.rationale = string(j.at("rationale"), path + ".rationale");
  if (j.contains("issued_at")) a.issued_at = number(j.at("issued_at"), path + ".issued_at");
  return a;
}

inline json memory_entry_to_json(const MemoryEntry& e) {
  json j;
  j["t"] = e.t;
  json objs = json::array(), agents = json::array(), descs = json::array();
  for (const auto& o : e.objects) objs.push_back(o.id);
  for (const auto& a : e.agents) agents.push_back(a.id);
  for (const auto& d : e.descriptions) descs.push_back({{"id", d.id}, {"text", d.text}});
  j["objects"] = objs;
  j["agents"] = agents;
  j["descriptions"] = descs;
  j["action"] = e.action ? action_to_json(*e.action) : json(nullptr);
  j["relevance"] = e.relevance ? json(*e.relevance) : json(nullptr);
  j["executed"] = e.executed;
  j["goal_in_view"] = e.goal_in_view;
  if (e.relevance_fallback) j["relevance_fallback"] = true;
  return j;
}

inline void write_memory_log(std::ostream& os, const Fmm& fmm) {
  for (const auto& e : fmm.entries()) os << memory_entry_to_json(e).dump() << '\n';
}

// ---------------------------------------------------------------- UCY

struct UcyPoint {
  double x{0.0};
  double y{0.0};
  int frame{0};
  double gaze_deg{0.0};
};

struct UcyPedestrian {
  std::vector<UcyPoint> points;
  std::size_t first_line{0};
};

struct UcyIngest {
  SceneFile scene;                            // agents plus one trajectory per agent
  std::map<std::string, HeadTrace> head_traces;
  std::map<std::string, std::vector<double>> head_times;
  std::vector<std::string> warnings;
};

/// Parses the spline annotation text: a count line ("N - ..."), then per
/// pedestrian a control-point count line followed by "x y frame gaze" rows.
/// Malformed pedestrians are skipped with a warning naming the line.
inline std::vector<UcyPedestrian> parse_ucy(std::istream& in, std::vector<std::string>& warnings) {
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
    lines.push_back(l);
  }
  std::size_t i = 0;
  auto skip_blank = [&] {
    while (i < lines.size() && lines[i].find_first_not_of(" \t") == std::string::npos) ++i;
  };
  auto leading_int = [](const std::string& s) -> std::optional<long> {
    std::istringstream ss(s);
    long v;
    if (ss >> v) return v;
    return std::nullopt;
  };
  std::vector<UcyPedestrian> out;
  skip_blank();
  if (i >= lines.size()) {
    warnings.push_back("empty annotation file");
    return out;
  }
  const auto count = leading_int(lines[i]);
  if (!count || *count < 0) {
    warnings.push_back("line " + std::to_string(i + 1) + ": expected the spline count");
    return out;
  }
  ++i;
  for (long s = 0; s < *count; ++s) {
    skip_blank();
    if (i >= lines.size()) {
      warnings.push_back("file ends after " + std::to_string(s) + " of " + std::to_string(*count) + " splines");
      break;
    }
    const std::size_t header_line = i + 1;
    const auto n = leading_int(lines[i]);
    ++i;
    if (!n || *n < 0) {
      warnings.push_back("line " + std::to_string(header_line) + ": expected a control-point count");
      break;  // cannot resynchronize without a count
    }
    UcyPedestrian ped;
    ped.first_line = header_line;
    std::optional<std::size_t> bad_line;
    for (long k = 0; k < *n && i < lines.size(); ++k, ++i) {
      std::istringstream ss(lines[i]);
      UcyPoint p;
      if (!(ss >> p.x >> p.y >> p.frame >> p.gaze_deg)) {
        if (!bad_line) bad_line = i + 1;
        continue;
      }
      if (!ped.points.empty() && p.frame <= ped.points.back().frame && !bad_line) bad_line = i + 1;
      ped.points.push_back(p);
    }
    if (bad_line) {
      warnings.push_back("line " + std::to_string(*bad_line) + ": malformed record, pedestrian " + std::to_string(s) +
                         " skipped");
      continue;
    }
    out.push_back(std::move(ped));
  }
  return out;
}

struct UcyTemplate {
  SceneFile base;  // static entities and goal; may be empty
  double meters_per_pixel{0.02};
  double fps{25.0};
  double tick{0.2};
};

inline UcyTemplate parse_ucy_template(const json& j) {
  UcyTemplate t;
  if (j.contains("version")) t.base = parse_scene(j);
  if (j.contains("meters_per_pixel")) t.meters_per_pixel = detail::number(j.at("meters_per_pixel"), "meters_per_pixel");
  if (j.contains("fps")) t.fps = detail::number(j.at("fps"), "fps");
  if (!(t.meters_per_pixel > 0.0)) throw SchemaError("meters_per_pixel", "must be positive");
  if (!(t.fps > 0.0)) throw SchemaError("fps", "must be positive");
  return t;
}

/// Lifts annotated pedestrians into a scene: each becomes an agent entity
/// with its own 5 Hz trajectory and ground-truth yaw-only head trace.
inline UcyIngest ingest_ucy(std::istream& annotation, const UcyTemplate& tpl) {
  UcyIngest r;
  r.scene = tpl.base;
  if (r.scene.scene.name.empty()) r.scene.scene.name = "ucy";
  r.scene.scene.condition = Condition::External;
  const auto peds = parse_ucy(annotation, r.warnings);
  for (std::size_t p = 0; p < peds.size(); ++p) {
    const auto& pts = peds[p].points;
    if (pts.size() < 2) {
      r.warnings.push_back("line " + std::to_string(peds[p].first_line) + ": pedestrian with fewer than 2 points skipped");
      continue;
    }
    std::vector<double> times;
    std::vector<Vec3> pos;
    std::vector<UnitQuaternion> gaze;
    for (const auto& pt : pts) {
      times.push_back(pt.frame / tpl.fps);
      pos.push_back({pt.x * tpl.meters_per_pixel, pt.y * tpl.meters_per_pixel, 0.0});
      gaze.push_back(UnitQuaternion::from_yaw(deg_to_rad(pt.gaze_deg)));
    }
    const std::string id = "ped" + std::to_string(p);
    const auto head = resample(times, gaze, tpl.tick);

    std::vector<TrajectorySample> samples;
    std::size_t seg = 0;
    for (std::size_t k = 0; k < head.size(); ++k) {
      const double t = times.front() + static_cast<double>(k) * tpl.tick;
      while (seg + 2 < times.size() && times[seg + 1] <= t) ++seg;
      const double u = std::clamp((t - times[seg]) / (times[seg + 1] - times[seg]), 0.0, 1.0);
      const Vec3 a = pos[seg], b = pos[seg + 1];
      const Vec3 d = b - a;
      TrajectorySample s;
      s.t = t;
      s.position = a + d * u;
      s.heading = d.norm_xy() > 1e-9 ? UnitQuaternion::from_yaw(std::atan2(d.y, d.x))
                                     : (samples.empty() ? head[k] : samples.back().heading);
      samples.push_back(s);
    }

    Entity e;
    e.id = id;
    e.class_label = "pedestrian";
    e.tags.insert(Tag::Social);
    e.is_agent = true;
    e.extents = {0.25, 0.25, 0.9};
    auto& stamp = r.head_times[id];
    for (const auto& s : samples) {
      e.waypoints.push_back({s.t, s.position});
      stamp.push_back(s.t);
    }
    e.appear_at = samples.front().t;
    e.vanish_at = samples.back().t;
    r.scene.scene.agents.push_back(e);

    TrajectoryRecord rec;
    rec.agent = id;
    rec.trajectory = BodyTrajectory(std::move(samples));
    r.scene.trajectories.push_back(std::move(rec));

    HeadTrace h;
    h.agent = id;
    h.scenario = r.scene.scene.name;
    h.condition = Condition::External;
    h.tick = tpl.tick;
    h.samples = head;
    r.head_traces[id] = std::move(h);
  }
  // Without a template goal, aim at the mean end point of the walks so the
  // ingested scene can be simulated as is.
  if (r.scene.scene.goal.text.empty() && !r.scene.trajectories.empty()) {
    Vec3 sum;
    for (const auto& rec : r.scene.trajectories) sum = sum + rec.trajectory.samples().back().position;
    r.scene.scene.goal.text = "cross the scene";
    r.scene.scene.goal.position = sum * (1.0 / static_cast<double>(r.scene.trajectories.size()));
  }
  return r;
}

}  // namespace headsim
