#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "headsim/engine.hpp"
#include "headsim/io.hpp"
#include "helpers.hpp"

using namespace headsim;

namespace {

std::string fixture(const std::string& name) { return std::string(HEADSIM_FIXTURES_DIR) + "/" + name; }

std::string field_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const SchemaError& e) {
    return e.field();
  }
  return "<no error>";
}

json minimal_scene() {
  return json::parse(R"({
    "version": "headsim-scene/1", "name": "m", "condition": "APC",
    "goal": {"text": "go", "position": [10, 0, 0]},
    "entities": [{"id": "a", "class": "box", "tags": ["hazard"], "waypoints": [{"t": 0, "position": [1, 2, 0]}],
                  "extents": [0.5, 0.5, 0.5]}],
    "trajectories": [{"agent": "self", "path": [[0, 0, 1.6], [2.8, 0, 1.6]], "speed": 1.4}]
  })");
}

}  // namespace

TEST(SceneIo, FixturesLoadAndRoundTrip) {
  for (const char* name : {"bus_mdc.json", "bus_apc.json", "hazard.json", "flow.json", "injected_apc.json"}) {
    const SceneFile f = load_scene(fixture(name));
    EXPECT_FALSE(f.trajectories.empty()) << name;
    const SceneFile back = parse_scene(scene_to_json(f));
    EXPECT_EQ(back.scene, f.scene) << name;
    ASSERT_EQ(back.trajectories.size(), f.trajectories.size());
    EXPECT_EQ(back.trajectories[0].trajectory.samples().size(), f.trajectories[0].trajectory.samples().size());
  }
}

TEST(SceneIo, SampleTrajectoryRoundTrip) {
  json j = minimal_scene();
  j["trajectories"] = json::parse(R"([{"agent": "p", "samples": [{"t": 0, "position": [0, 0, 0]},
                                                                  {"t": 1, "position": [0, 1, 0]}]}])");
  const SceneFile f = parse_scene(j);
  const auto& s = f.trajectories[0].trajectory.samples();
  EXPECT_NEAR(s[0].heading.yaw(), kPi / 2, 1e-12);
  const SceneFile back = parse_scene(scene_to_json(f));
  EXPECT_TRUE(back.trajectories[0].trajectory.samples()[1].heading.bitwise_equal(s[1].heading));
}

TEST(SceneIo, ErrorsNameTheField) {
  json j = minimal_scene();
  j["version"] = "other/2";
  EXPECT_EQ(field_of([&] { parse_scene(j); }), "version");
  j = minimal_scene();
  j["entities"][0]["tags"][0] = "spooky";
  EXPECT_EQ(field_of([&] { parse_scene(j); }), "entities[0].tags[0]");
  j = minimal_scene();
  j["entities"][0].erase("extents");
  EXPECT_EQ(field_of([&] { parse_scene(j); }), "entities[0].extents");
  j = minimal_scene();
  j["entities"][0]["waypoints"][0]["position"] = json::array({1, 2});
  EXPECT_EQ(field_of([&] { parse_scene(j); }), "entities[0].waypoints[0].position");
  j = minimal_scene();
  j["trajectories"][0]["speed"] = -1;
  EXPECT_EQ(field_of([&] { parse_scene(j); }), "trajectories[0]");
  EXPECT_THROW(parse_json_text("{oops", "x"), SchemaError);
  EXPECT_THROW(load_scene("/nonexistent/scene.json"), SchemaError);
}

TEST(TraceIo, WriteParseRoundTrip) {
  std::vector<TickRecord> ticks(3);
  for (int k = 0; k < 3; ++k) {
    ticks[k].t = 0.2 * k;
    ticks[k].head = UnitQuaternion::from_yaw(0.1 * k);
  }
  ticks[1].phase = Phase::Turning;
  ticks[1].driver = Driver::Interest;
  const TraceFile f = make_trace_file(ticks, "self", "bus", "APC", 7);
  std::ostringstream os;
  write_trace(os, f);
  std::istringstream is(os.str());
  const TraceFile back = parse_trace(is);
  EXPECT_EQ(back.agent, "self");
  EXPECT_EQ(back.seed, 7u);
  ASSERT_EQ(back.rows.size(), 3u);
  EXPECT_EQ(back.rows[1].phase, "TURNING");
  EXPECT_EQ(back.rows[1].driver, "Interest");
  EXPECT_NEAR(angular_distance(back.orientations()[2], ticks[2].head), 0.0, 1e-9);
  std::ostringstream again;
  write_trace(again, back);
  EXPECT_EQ(again.str(), os.str());
}

TEST(TraceIo, RejectsBadRows) {
  const std::string head = "# headsim-trace/1\n# agent=a\n# scenario=s\n# condition=APC\n# tick=0.200\n# seed=1\n"
                           "t,qw,qx,qy,qz,phase,driver\n";
  auto parse = [](const std::string& text) {
    std::istringstream is(text);
    return parse_trace(is);
  };
  EXPECT_NO_THROW(parse(head + "0,1,0,0,0,ALIGNED,\n"));
  EXPECT_THROW(parse(head + "0,2,0,0,0,ALIGNED,\n"), SchemaError);
  EXPECT_THROW(parse(head + "0,1,0,0,0,SPINNING,\n"), SchemaError);
  EXPECT_THROW(parse(head + "0,1,0,0,0,TURNING,Boredom\n"), SchemaError);
  EXPECT_THROW(parse(head + "0.2,1,0,0,0,ALIGNED,\n0.2,1,0,0,0,ALIGNED,\n"), SchemaError);
  EXPECT_THROW(parse("t,qw,qx,qy,qz,phase,driver\n"), SchemaError);
}

TEST(ConfigIo, DefaultsOverridesAndErrors) {
  EngineConfig c = parse_config(json::object());
  EXPECT_EQ(c.tick, 0.2);
  c = parse_config(json::parse(R"({"turn_rate": 45, "hold": {"sd": 0.3}, "drivers": {"Safety": false},
                                   "latency": {"plan": {"mean": 1, "spread": 0}}, "seed": 12, "use_res": false})"));
  EXPECT_EQ(c.turn_rate.degrees_per_second(), 45.0);
  EXPECT_EQ(c.hold.sd, 0.3);
  EXPECT_FALSE(c.drivers.enabled(Driver::Safety));
  EXPECT_EQ(c.latency.plan.mean, 1.0);
  EXPECT_EQ(c.seed, 12u);
  EXPECT_FALSE(c.use_res);

  EXPECT_EQ(field_of([] { parse_config(json::parse(R"({"tick_rate": 1})")); }), "tick_rate");
  EXPECT_EQ(field_of([] { parse_config(json::parse(R"({"turn_rate": 0})")); }), "turn_rate");
  EXPECT_EQ(field_of([] { parse_config(json::parse(R"({"drivers": {"Boredom": true}})")); }), "drivers.Boredom");
  EXPECT_EQ(field_of([] { parse_config(json::parse(R"({"hold": {"min": 3, "max": 2}})")); }), "hold");
  EXPECT_EQ(field_of([] { parse_config(json::parse(R"({"seed": -1})")); }), "seed");
  EXPECT_EQ(field_of([] { parse_config(json::parse(R"({"fov": {"raster": 4}})")); }), "fov");
}

TEST(MemoryLog, OneJsonObjectPerEntry) {
  Fmm fmm;
  MemoryEntry e;
  e.t = 1.0;
  e.relevance = 2.0;
  e.action = ActionReason{std::string("statue"), Driver::Interest, "odd", 1.0};
  fmm.insert(e);
  e.t = 2.0;
  e.action = ActionReason{UnitQuaternion::from_yaw(0.3), Driver::Habit, "scan", 2.0};
  fmm.insert(e);
  std::ostringstream os;
  write_memory_log(os, fmm);
  std::istringstream is(os.str());
  std::string line;
  std::vector<json> rows;
  while (std::getline(is, line)) rows.push_back(json::parse(line));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0]["action"]["target"]["entity"], "statue");
  const ActionReason back = action_from_json(rows[1]["action"], "action");
  EXPECT_NEAR(back.target_orientation()->yaw(), 0.3, 1e-12);
  EXPECT_EQ(back.driver, Driver::Habit);
}

TEST(Ucy, TwoPointsGiveThreeSamples) {
  std::istringstream in("1 - the number of splines\n2 - control points\n0 0 0 0\n10 0 10 0\n");
  UcyTemplate tpl;
  const auto r = ingest_ucy(in, tpl);
  EXPECT_TRUE(r.warnings.empty());
  ASSERT_EQ(r.head_traces.size(), 1u);
  const auto& h = r.head_traces.at("ped0");
  ASSERT_EQ(h.samples.size(), 3u);
  for (const auto& q : h.samples) EXPECT_TRUE(q.bitwise_equal(UnitQuaternion::identity()));
  const auto* tr = r.scene.trajectory("ped0");
  ASSERT_NE(tr, nullptr);
  EXPECT_NEAR(tr->trajectory.pose_at(0.4).position.x, 0.2, 1e-12);
  EXPECT_EQ(r.scene.scene.agents.size(), 1u);
}

TEST(Ucy, GazeBecomesYaw) {
  std::istringstream in("1\n3\n0 0 0 90\n5 5 5 90\n10 10 10 90\n");
  const auto r = ingest_ucy(in, {});
  for (const auto& q : r.head_traces.at("ped0").samples) EXPECT_NEAR(q.yaw(), kPi / 2, 1e-12);
}

TEST(Ucy, MalformedAndEmptyInputsWarn) {
  std::istringstream empty("");
  auto r = ingest_ucy(empty, {});
  EXPECT_TRUE(r.head_traces.empty());
  ASSERT_EQ(r.warnings.size(), 1u);

  std::istringstream bad("2\n2\n0 0 0 0\nx y z w\n2\n0 0 0 0\n5 0 5 0\n");
  r = ingest_ucy(bad, {});
  EXPECT_EQ(r.head_traces.size(), 1u);
  ASSERT_FALSE(r.warnings.empty());
  EXPECT_NE(r.warnings[0].find("line 4"), std::string::npos);
  EXPECT_TRUE(r.head_traces.count("ped0"));
}

TEST(Ucy, TemplateScalesAndSetsRate) {
  const auto tpl = parse_ucy_template(json::parse(R"({"meters_per_pixel": 0.1, "fps": 10})"));
  std::istringstream in("1\n2\n0 0 0 0\n10 0 10 0\n");
  const auto r = ingest_ucy(in, tpl);
  EXPECT_NEAR(r.scene.trajectory("ped0")->trajectory.end(), 1.0, 1e-12);
  EXPECT_NEAR(r.scene.trajectory("ped0")->trajectory.pose_at(1.0).position.x, 1.0, 1e-12);
  EXPECT_THROW(parse_ucy_template(json::parse(R"({"fps": 0})")), SchemaError);
}
