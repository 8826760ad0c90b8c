#include <map>
#include <random>

#include <gtest/gtest.h>

#include "headsim/engine.hpp"
#include "headsim/io.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace headsim;
using testutil::box;

namespace {

bool legal(Phase from, Phase to) {
  switch (from) {
    case Phase::Aligned: return to == Phase::Aligned || to == Phase::Turning;
    case Phase::Turning: return to == Phase::Turning || to == Phase::Holding;
    case Phase::Holding: return to == Phase::Holding || to == Phase::Returning;
    case Phase::Returning: return to == Phase::Returning || to == Phase::Aligned;
  }
  return false;
}

void expect_well_formed(const std::vector<TickRecord>& ticks, const EngineConfig& cfg) {
  const double bound = cfg.turn_rate.radians_per_second() * cfg.tick + 1e-9;
  for (std::size_t k = 1; k < ticks.size(); ++k) {
    EXPECT_TRUE(legal(ticks[k - 1].phase, ticks[k].phase))
        << phase_name(ticks[k - 1].phase) << " -> " << phase_name(ticks[k].phase) << " at " << ticks[k].t;
    EXPECT_LE(angular_distance(ticks[k - 1].head, ticks[k].head), bound) << "at " << ticks[k].t;
    EXPECT_NEAR(ticks[k].t - ticks[k - 1].t, cfg.tick, 1e-9);
  }
}

/// A walk past a novel object and a hazard, short enough to keep tests quick.
Scene small_scene() {
  Scene s = testutil::empty_scene("small");
  for (int i = 0; i < 12; ++i) {
    s.entities.push_back(box("wall" + std::to_string(i), {4.0 + 2.5 * i, i % 2 ? 5.0 : -5.0, 2.0}, {0.8, 0.5, 2.0},
                             {Tag::StaticBackground}, i % 3 ? "shopfront" : "lamp post"));
  }
  s.entities.push_back(box("statue", {14, 3.5, 1}, {0.4, 0.4, 1}, {Tag::Novel}, "statue"));
  s.entities.push_back(box("hole", {22, -3, 0.2}, {0.5, 0.5, 0.2}, {Tag::Hazard}, "manhole"));
  return s;
}

std::string trace_text(const PipelineResult& r) {
  std::ostringstream os;
  write_trace(os, make_trace_file(r.trace.ticks, "self", "small", "APC", 0));
  return os.str();
}

}  // namespace

TEST(Hold, MonteCarloMatchesClosedForm) {
  std::mt19937_64 rng(2024);
  const int n = 100000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double h = sample_hold(rng);
    ASSERT_GE(h, 1.0);
    ASSERT_LE(h, 2.0);
    sum += h;
    sq += h * h;
  }
  const double mean = sum / n, sd = std::sqrt(sq / n - mean * mean);
  const auto cf = oracle::clamped_normal(1.5, 0.25, 1.0, 2.0);
  EXPECT_NEAR(cf.mean, 1.5, 1e-12);
  EXPECT_NEAR(mean, cf.mean, 0.005);
  EXPECT_NEAR(sd, cf.sd, 0.005);
}

TEST(Latency, NonNegativeAndCentered) {
  std::mt19937_64 rng(3);
  LatencyModel m;
  double sum = 0;
  for (int i = 0; i < 20000; ++i) {
    const double v = LatencyModel::sample(m.plan, rng);
    ASSERT_GE(v, 0.0);
    sum += v;
  }
  EXPECT_NEAR(sum / 20000, 7.10, 0.05);
  EXPECT_EQ(LatencyModel::sample({-1.0, 0.0}, rng), 0.0);
}

TEST(Kinematics, NinetyDegreeTurnTakesThirteenTicks) {
  HeadState s;
  const auto body = UnitQuaternion::identity();
  const auto target = UnitQuaternion::from_yaw(kPi / 2);
  ActionReason a{target, Driver::Habit, "", 0.0};
  ASSERT_TRUE(start_action(s, a, 1.5));
  int turning = 1;  // the start tick itself is labelled TURNING
  double t = 0.0;
  while (true) {
    t += 0.2;
    const bool reached = step_head(s, body, target, t, 0.2, AngularRate(36.0));
    if (reached) break;
    ++turning;
    ASSERT_LT(turning, 100);
  }
  EXPECT_EQ(turning, 13);
  EXPECT_EQ(s.phase, Phase::Holding);
  EXPECT_NEAR(*s.hold_deadline, t + 1.5, 1e-12);
}

TEST(Kinematics, HoldThenReturnThenAligned) {
  HeadState s;
  const auto body = UnitQuaternion::identity();
  const auto target = UnitQuaternion::from_yaw(0.1);
  ActionReason a{target, Driver::Habit, "", 0.0};
  start_action(s, a, 1.0);
  double t = 0.2;
  step_head(s, body, target, t, 0.2, AngularRate(36.0));
  EXPECT_EQ(s.phase, Phase::Holding);
  EXPECT_FALSE(start_action(s, a, 1.0));
  while (s.phase == Phase::Holding) step_head(s, body, target, t += 0.2, 0.2, AngularRate(36.0));
  EXPECT_NEAR(t, 1.2, 1e-9);
  EXPECT_EQ(s.phase, Phase::Returning);
  step_head(s, body, target, t += 0.2, 0.2, AngularRate(36.0));
  EXPECT_EQ(s.phase, Phase::Aligned);
  EXPECT_FALSE(s.active_action);
}

TEST(Kinematics, LostTargetKeepsLastOrientation) {
  HeadState s;
  const auto body = UnitQuaternion::identity();
  ActionReason a{std::string("gone"), Driver::Interest, "", 0.0};
  start_action(s, a, 1.0);
  step_head(s, body, UnitQuaternion::from_yaw(1.0), 0.2, 0.2, AngularRate(36.0));
  const double yaw = s.orientation.yaw();
  step_head(s, body, std::nullopt, 0.4, 0.2, AngularRate(36.0));
  EXPECT_GT(s.orientation.yaw(), yaw);
  EXPECT_EQ(s.phase, Phase::Turning);
}

TEST(Supersede, PriorityAware) {
  const ActionReason safety{std::string("h"), Driver::Safety, "", 0};
  const ActionReason habit{UnitQuaternion::identity(), Driver::Habit, "", 0};
  EXPECT_TRUE(supersedes(safety, habit));
  EXPECT_FALSE(supersedes(habit, safety));
  EXPECT_TRUE(supersedes(habit, habit));
}

TEST(Pipeline, TracesAreWellFormed) {
  const Scene s = small_scene();
  const auto traj = testutil::straight();
  EngineConfig cfg;
  cfg.seed = 4;
  const auto r = run_pipeline(s, s, traj, cfg);
  ASSERT_EQ(r.trace.ticks.size(), cfg.tick_count(traj.duration()));
  ASSERT_EQ(r.plan.track.size(), r.trace.ticks.size());
  expect_well_formed(r.plan.track, cfg);
  expect_well_formed(r.trace.ticks, cfg);
  EXPECT_GT(r.plan.novel_views, 0u);
  for (const auto& v : r.trace.validations) EXPECT_NEAR(v.predicted_t - v.tick_t, cfg.lookahead, 1e-9);
}

TEST(Pipeline, DeterministicPerSeed) {
  const Scene s = small_scene();
  const auto traj = testutil::straight();
  EngineConfig cfg;
  cfg.seed = 17;
  EXPECT_EQ(trace_text(run_pipeline(s, s, traj, cfg)), trace_text(run_pipeline(s, s, traj, cfg)));
}

TEST(Pipeline, WithoutResExecutesThePlanTrack) {
  const Scene s = small_scene();
  Scene live = s;
  live.entities.push_back(box("debris", {16, -2, 0.5}, {1, 1, 0.5}, {Tag::Hazard}, "debris"));
  EngineConfig cfg;
  cfg.seed = 2;
  cfg.use_res = false;
  const auto r = run_pipeline(s, live, testutil::straight(), cfg);
  ASSERT_EQ(r.trace.ticks.size(), r.plan.track.size());
  for (std::size_t k = 0; k < r.plan.track.size(); ++k) {
    EXPECT_TRUE(r.trace.ticks[k].head.bitwise_equal(r.plan.track[k].head));
    EXPECT_EQ(r.trace.ticks[k].phase, r.plan.track[k].phase);
  }
}

TEST(Pipeline, UnchangedSceneExecutesAsPlanned) {
  const Scene s = small_scene();
  EngineConfig cfg;
  cfg.seed = 9;
  const auto r = run_pipeline(s, s, testutil::straight(), cfg);
  for (const auto& e : r.trace.log) {
    EXPECT_NE(e.kind, EventKind::Inserted);
    EXPECT_NE(e.kind, EventKind::Replaced);
  }
  for (std::size_t k = 0; k < r.plan.track.size(); ++k) {
    EXPECT_LE(angular_distance(r.trace.ticks[k].head, r.plan.track[k].head), 1e-9) << "tick " << k;
  }
}

TEST(Pipeline, ResReactsToUnplannedHazard) {
  const Scene s = small_scene();
  Scene live = s;
  live.entities.push_back(box("debris", {17, -2.5, 0.5}, {1, 1, 0.5}, {Tag::Hazard}, "debris"));
  EngineConfig cfg;
  cfg.seed = 1;
  const auto r = run_pipeline(s, live, testutil::straight(), cfg);
  bool looked = false;
  for (const auto& e : r.trace.log) {
    const ActionReason& a = e.replacement ? *e.replacement : e.action;
    if (a.target_entity() && *a.target_entity() == "debris") looked = true;
  }
  EXPECT_TRUE(looked);
  expect_well_formed(r.trace.ticks, cfg);
}

TEST(Pipeline, MaskedDriverNeverAppears) {
  const Scene s = small_scene();
  EngineConfig cfg;
  cfg.drivers = DriverSet::all().without(Driver::Safety);
  for (std::uint64_t seed : {1u, 2u}) {
    cfg.seed = seed;
    const auto r = run_pipeline(s, s, testutil::straight(), cfg);
    for (const auto& t : r.trace.ticks) EXPECT_NE(t.driver, Driver::Safety);
    for (const auto& a : r.plan.actions) EXPECT_NE(a.action.driver, Driver::Safety);
  }
}

TEST(Pipeline, NoDriversMeansNoMotionRelativeToBody) {
  const Scene s = small_scene();
  EngineConfig cfg;
  cfg.drivers = DriverSet::none();
  const auto traj = testutil::straight();
  const auto r = run_pipeline(s, s, traj, cfg);
  EXPECT_TRUE(r.plan.actions.empty());
  for (const auto& t : r.trace.ticks) EXPECT_EQ(t.phase, Phase::Aligned);
}

TEST(Pipeline, WithoutLlmStillActsOnTags) {
  const Scene s = small_scene();
  EngineConfig cfg;
  cfg.use_llm = false;
  const auto r = run_pipeline(s, s, testutil::straight(), cfg);
  bool safety = false;
  for (const auto& a : r.plan.actions) {
    EXPECT_NE(a.action.driver, Driver::Habit);
    safety = safety || a.action.driver == Driver::Safety;
  }
  EXPECT_TRUE(safety);
}

TEST(Pipeline, EmptyTrajectoryGivesEmptyTrace) {
  const auto r = run_pipeline(small_scene(), small_scene(), BodyTrajectory{}, EngineConfig{});
  EXPECT_TRUE(r.trace.ticks.empty());
}

TEST(MultiAgent, SingleAgentReproducesPipeline) {
  const Scene s = small_scene();
  const auto traj = testutil::straight();
  EngineConfig cfg;
  cfg.seed = 6;
  const auto multi = run_multi(s, {{"self", traj}}, cfg);
  const auto single = run_pipeline(s, s, traj, cfg);
  EXPECT_EQ(trace_text(multi.at("self")), trace_text(single));
}

TEST(MultiAgent, OthersAppearAsPedestrians) {
  const Scene s = small_scene();
  std::map<std::string, BodyTrajectory> agents{
      {"a", testutil::straight()},
      {"b", BodyTrajectory::walk({{28, 1, 1.6}, {0, 1, 1.6}}, 1.4)}};
  const Scene view = scene_for_agent(s, agents, "a");
  const Entity* other = view.find("b");
  ASSERT_NE(other, nullptr);
  EXPECT_TRUE(other->is_agent);
  EXPECT_EQ(view.find("a"), nullptr);
  const auto seq = run_multi(s, agents, EngineConfig{}, {}, false);
  const auto par = run_multi(s, agents, EngineConfig{}, {}, true);
  EXPECT_EQ(trace_text(seq.at("b")), trace_text(par.at("b")));
}
