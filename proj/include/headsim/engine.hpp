#pragma once

// Two-stage head-motion pipeline.
//
// run_dps walks the trajectory once on a simulated clock, feeds novel views
// through describe/plan and simulates the resulting head motion; the result
// is a Plan (scheduled action-reason pairs plus the simulated head track).
// run_res replays the trajectory against the live scene, validates each
// planned pose against a view predicted `lookahead` seconds ahead, applies
// replacements, and re-simulates the head kinematics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <future>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "headsim/memory.hpp"
#include "headsim/perception.hpp"
#include "headsim/reasoning.hpp"
#include "headsim/world.hpp"

namespace headsim {

enum class Phase : std::uint8_t { Aligned, Turning, Holding, Returning };

constexpr std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::Aligned: return "ALIGNED";
    case Phase::Turning: return "TURNING";
    case Phase::Holding: return "HOLDING";
    case Phase::Returning: return "RETURNING";
  }
  return "?";
}

inline std::optional<Phase> parse_phase(std::string_view s) {
  for (Phase p : {Phase::Aligned, Phase::Turning, Phase::Holding, Phase::Returning}) {
    if (phase_name(p) == s) return p;
  }
  return std::nullopt;
}

struct HoldParams {
  double mean{1.5};
  double sd{0.25};
  double min{1.0};
  double max{2.0};
};

/// Hold duration ~ N(mean, sd^2) clamped to [min, max].
inline double sample_hold(std::mt19937_64& rng, const HoldParams& p = {}) {
  std::normal_distribution<double> dist(p.mean, p.sd);
  return std::clamp(dist(rng), p.min, p.max);
}

struct LatencyModel {
  struct Role {
    double mean;
    double spread;  // standard deviation
  };
  Role describe{3.50, 0.64};
  Role plan{7.10, 1.22};
  Role validate{1.49, 0.41};

  /// Normal draw truncated (by rejection) to non-negative values.
  static double sample(const Role& r, std::mt19937_64& rng) {
    if (r.spread <= 0.0) return std::max(0.0, r.mean);
    std::normal_distribution<double> dist(r.mean, r.spread);
    for (int i = 0; i < 1000; ++i) {
      const double v = dist(rng);
      if (v >= 0.0) return v;
    }
    return 0.0;
  }
};

struct EngineConfig {
  double tick{0.2};
  AngularRate turn_rate{36.0};
  HoldParams hold{};
  double lookahead{2.0};
  double ssim_threshold{60.0};
  std::size_t fmm_recent{10};
  std::size_t fmm_relevant{10};
  DriverSet drivers{DriverSet::all()};
  OracleParams oracle{};
  LatencyModel latency{};
  FovParams fov{};
  bool charge_latency{true};
  bool use_llm{true};
  bool use_res{true};
  std::uint64_t seed{0};

  /// Number of ticks covering [0, duration].
  std::size_t tick_count(double duration) const {
    return static_cast<std::size_t>(std::floor(duration / tick + 1e-9)) + 1;
  }
  std::size_t lookahead_ticks() const { return static_cast<std::size_t>(std::llround(lookahead / tick)); }
};

struct HeadState {
  UnitQuaternion orientation;
  Phase phase{Phase::Aligned};
  std::optional<double> hold_deadline;
  std::optional<ActionReason> active_action;
  double hold_duration{0.0};
  std::optional<UnitQuaternion> last_target;
};

/// Orientation the head should take for `action` at time t, from `eye`.
inline std::optional<UnitQuaternion> resolve_target(const ActionReason& action, const Scene& scene, const Vec3& eye,
                                                    double t) {
  if (const auto* q = action.target_orientation()) return *q;
  const Entity* e = scene.find(*action.target_entity());
  if (!e || !e->present_at(t)) return std::nullopt;
  const Vec3 dir = e->position_at(t) - eye;
  if (dir.norm() < 1e-6) return std::nullopt;
  return UnitQuaternion::looking_along(dir);
}

/// Kinematics for the interval ending at `clock`, then the hold-deadline
/// transition at `clock`. A target that cannot be resolved keeps the last
/// resolved orientation. Returns true when the turn completed this tick.
inline bool step_head(HeadState& s, const UnitQuaternion& body_heading, std::optional<UnitQuaternion> target,
                      double clock, double dt, AngularRate rate) {
  if (target) s.last_target = target;
  const UnitQuaternion aim = s.last_target.value_or(body_heading);
  bool reached = false;
  switch (s.phase) {
    case Phase::Aligned:
      s.orientation = step_toward(s.orientation, body_heading, rate, dt);
      break;
    case Phase::Turning:
      s.orientation = step_toward(s.orientation, aim, rate, dt);
      if (same_rotation(s.orientation, aim, 1e-12)) {
        s.phase = Phase::Holding;
        s.hold_deadline = clock + s.hold_duration;
        reached = true;
      }
      break;
    case Phase::Holding:
      s.orientation = step_toward(s.orientation, aim, rate, dt);
      break;
    case Phase::Returning:
      s.orientation = step_toward(s.orientation, body_heading, rate, dt);
      if (same_rotation(s.orientation, body_heading, 1e-12)) {
        s.phase = Phase::Aligned;
        s.active_action.reset();
        s.last_target.reset();
      }
      break;
  }
  if (s.phase == Phase::Holding && s.hold_deadline && clock >= *s.hold_deadline - 1e-9) {
    s.phase = Phase::Returning;
    s.hold_deadline.reset();
  }
  return reached;
}

/// Whether a newly due action should displace one still waiting to start.
inline bool supersedes(const ActionReason& newer, const ActionReason& waiting) {
  return priority_rank(newer.driver) <= priority_rank(waiting.driver);
}

/// Starts (or retargets) a turn. Refused while holding or returning.
inline bool start_action(HeadState& s, const ActionReason& action, double hold) {
  if (s.phase == Phase::Holding || s.phase == Phase::Returning) return false;
  s.phase = Phase::Turning;
  s.active_action = action;
  s.hold_duration = hold;
  s.hold_deadline.reset();
  s.last_target.reset();
  return true;
}

struct TickRecord {
  double t{0.0};
  UnitQuaternion head;
  Phase phase{Phase::Aligned};
  int action_index{-1};  // index into the plan (DPS) or the execution log (RES); -1 when idle
  std::optional<Driver> driver;
};

struct PlannedAction {
  double scheduled_t{0.0};
  ActionReason action;
  double hold{1.5};
};

struct Plan {
  std::vector<PlannedAction> actions;
  std::vector<TickRecord> track;
  Fmm memory;
  Scene scene;  // the scene planning saw
  std::size_t novel_views{0};
  std::size_t plan_calls{0};
  std::size_t fallbacks{0};
  bool aborted{false};
  std::vector<std::string> diagnostics;
};

enum class EventKind : std::uint8_t { Executed, Replaced, Inserted, Cancelled, Superseded, Unvalidated };

constexpr std::string_view event_name(EventKind k) {
  switch (k) {
    case EventKind::Executed: return "executed";
    case EventKind::Replaced: return "replaced";
    case EventKind::Inserted: return "inserted";
    case EventKind::Cancelled: return "cancelled";
    case EventKind::Superseded: return "superseded";
    case EventKind::Unvalidated: return "unvalidated";
  }
  return "?";
}

struct ExecutionEvent {
  double t{0.0};
  EventKind kind{EventKind::Executed};
  ActionReason action;
  std::optional<ActionReason> replacement;
};

struct ValidationRecord {
  double tick_t{0.0};
  double predicted_t{0.0};
  Decision decision{Decision::Keep};
  bool subject_pending{false};
  bool fallback{false};
  bool late{false};
};

struct ExecutedTrace {
  std::vector<TickRecord> ticks;
  std::vector<ExecutionEvent> log;
  std::vector<ValidationRecord> validations;
  Fmm memory;
  std::size_t unvalidated{0};

  std::vector<UnitQuaternion> orientations() const {
    std::vector<UnitQuaternion> out;
    out.reserve(ticks.size());
    for (const auto& t : ticks) out.push_back(t.head);
    return out;
  }
};

/// Non-owning handles to the backend serving each role. Null selects the
/// built-in oracle.
struct Backends {
  ReasoningBackend* describe{nullptr};
  ReasoningBackend* plan{nullptr};
  ReasoningBackend* validate{nullptr};
  const RelevanceScorer* relevance{nullptr};
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace detail {

inline TickRecord record(double t, const HeadState& s, int index) {
  TickRecord r;
  r.t = t;
  r.head = s.orientation;
  r.phase = s.phase;
  r.action_index = s.phase == Phase::Aligned ? -1 : index;
  if (s.phase != Phase::Aligned && s.active_action) r.driver = s.active_action->driver;
  return r;
}

}  // namespace detail

/// Deliberative pass over the whole trajectory.
inline Plan run_dps(const Scene& scene, const BodyTrajectory& traj, const EngineConfig& cfg, const Backends& backends,
                    std::mt19937_64& rng) {
  Plan plan;
  plan.scene = scene;
  plan.memory = Fmm(cfg.fmm_recent, cfg.fmm_relevant);
  if (traj.empty()) return plan;

  OracleBackend oracle(cfg.oracle);
  ReasoningBackend& describer = backends.describe ? *backends.describe : oracle;
  ReasoningBackend& planner = backends.plan ? *backends.plan : oracle;
  TokenOverlapScorer token_scorer;
  const RelevanceScorer& scorer = backends.relevance ? *backends.relevance : token_scorer;
  const NoveltyGate gate{cfg.ssim_threshold};

  struct Pending {
    double ready_at;
    std::optional<ActionReason> action;
  };
  std::deque<Pending> in_flight;  // delivered in issue order
  std::optional<ActionReason> due;
  NoveltyState pem;
  HeadState head;
  head.orientation = traj.pose_at(traj.start()).heading;
  double last_start = -std::numeric_limits<double>::infinity();
  double last_request = -std::numeric_limits<double>::infinity();
  int active_index = -1;

  auto latency = [&](const LatencyModel::Role& r) { return cfg.charge_latency ? LatencyModel::sample(r, rng) : 0.0; };
  auto submit = [&](double now, double delay, std::optional<ActionReason> action) {
    double ready_at = now + delay;
    if (!in_flight.empty()) ready_at = std::max(ready_at, in_flight.back().ready_at);
    in_flight.push_back({ready_at, std::move(action)});
    last_request = now;
  };

  const std::size_t n = cfg.tick_count(traj.duration());
  for (std::size_t k = 0; k < n; ++k) {
    const double t = traj.start() + static_cast<double>(k) * cfg.tick;
    const Pose body = traj.pose_at(std::min(t, traj.end()));

    // A head that finishes returning this tick is recorded ALIGNED before
    // it may turn again, so sampled phases never skip ALIGNED.
    const bool was_returning = head.phase == Phase::Returning;
    if (k > 0) {
      std::optional<UnitQuaternion> target;
      if (head.active_action) target = resolve_target(*head.active_action, scene, body.position, t);
      if (step_head(head, body.heading, target, t, cfg.tick, cfg.turn_rate)) {
        pem.resume_at(t + head.hold_duration / 2.0);
      }
    }

    while (!in_flight.empty() && t >= in_flight.front().ready_at - 1e-9) {
      if (auto& a = in_flight.front().action) {
        if (!due || supersedes(*a, *due)) {
          if (due) plan.diagnostics.push_back("superseded action issued at " + std::to_string(due->issued_at));
          due = a;
        } else {
          plan.diagnostics.push_back("dropped action issued at " + std::to_string(a->issued_at));
        }
      }
      in_flight.pop_front();
    }

    if (due && !was_returning) {
      const double hold = sample_hold(rng, cfg.hold);
      if (start_action(head, *due, hold)) {
        plan.actions.push_back({t, *due, hold});
        active_index = static_cast<int>(plan.actions.size()) - 1;
        last_start = t;
        pem.pause();
        due.reset();
      }
    }

    try {
      if (auto obs = capture(pem, t, scene, body, head.orientation, cfg.fov, gate)) {
        ++plan.novel_views;
        MemoryEntry entry;
        entry.t = t;
        assign_entities(entry, obs->entities);
        entry.goal_in_view = view_coordinates(body.position, head.orientation, scene.goal.position, cfg.fov).in_cone;
        const DescribeResult described = describe_entities(*obs, scene.goal, describer, oracle);
        entry.descriptions = described.descriptions;
        plan.fallbacks += described.fallback ? 1 : 0;
        double delay = latency(cfg.latency.describe);
        std::optional<ActionReason> action;
        if (cfg.use_llm) {
          insert(plan.memory, std::move(entry), scene.goal.text, scorer);
          PlanRequest req{scene.goal, body, &plan.memory, cfg.drivers, t};
          PlanResult r = plan_action(req, planner, oracle);
          plan.fallbacks += r.fallback ? 1 : 0;
          action = r.action;
          delay += latency(cfg.latency.plan);
          if (action) plan.memory.attach_action(*action);
        } else {
          action = select_from_descriptions(*obs, described.descriptions, cfg.drivers);
          if (action) action->issued_at = t;
          entry.action = action;
          insert(plan.memory, std::move(entry), scene.goal.text, scorer);
        }
        ++plan.plan_calls;
        submit(t, delay, action);
      } else if (cfg.use_llm && cfg.drivers.enabled(Driver::Habit) && in_flight.empty() && !due &&
                 head.phase == Phase::Aligned && !pem.paused && !plan.memory.empty() &&
                 t - last_start >= cfg.oracle.habit_period - 1e-9 &&
                 t - last_request >= cfg.oracle.habit_period - 1e-9) {
        // Periodic re-plan from memory alone so habitual scanning recurs in
        // views that never change enough to count as novel.
        PlanRequest req{scene.goal, body, &plan.memory, cfg.drivers, t};
        PlanResult r = plan_action(req, planner, oracle);
        plan.fallbacks += r.fallback ? 1 : 0;
        if (r.action) {
          MemoryEntry entry;
          entry.t = t;
          entry.action = r.action;
          insert(plan.memory, std::move(entry), scene.goal.text, scorer);
        }
        ++plan.plan_calls;
        submit(t, latency(cfg.latency.plan), r.action);
      }
    } catch (const std::exception& ex) {
      plan.aborted = true;
      plan.diagnostics.push_back(std::string("aborted at t=") + std::to_string(t) + ": " + ex.what());
      plan.track.push_back(detail::record(t, head, active_index));
      return plan;
    }

    plan.track.push_back(detail::record(t, head, active_index));
  }
  return plan;
}

namespace detail {

/// Entities present at `t`, moved along their current velocity to t + dt.
inline Scene extrapolate(const Scene& scene, double t, double dt) {
  Scene out;
  out.name = scene.name;
  out.goal = scene.goal;
  out.condition = scene.condition;
  auto move = [&](const Entity& e, std::vector<Entity>& dst) {
    if (!e.present_at(t)) return;
    Entity c = e;
    const Vec3 v = e.velocity_at(t);
    c.waypoints = {{t + dt, e.position_at(t) + v * dt}};
    c.velocity = v;
    c.appear_at.reset();
    c.vanish_at.reset();
    dst.push_back(std::move(c));
  };
  for (const auto& e : scene.entities) move(e, out.entities);
  for (const auto& e : scene.agents) move(e, out.agents);
  return out;
}

inline std::set<std::string> present_ids(const Scene& scene, double t) {
  std::set<std::string> ids;
  scene.for_each_entity([&](const Entity& e) {
    if (e.present_at(t)) ids.insert(e.id);
  });
  return ids;
}

}  // namespace detail

/// Builds the look-ahead bundle for tick time t: the live scene and the
/// planning scene both extrapolated to t + lookahead and viewed from the
/// trajectory pose and planned head orientation at that time.
inline LookaheadBundle build_bundle(const Scene& live, const Scene& planned_scene, const BodyTrajectory& traj,
                                    const UnitQuaternion& planned_head, double t, const EngineConfig& cfg,
                                    bool with_raster) {
  LookaheadBundle b;
  b.tick_t = t;
  b.predicted_t = t + cfg.lookahead;
  b.goal = live.goal;
  const Pose self = traj.pose_clamped(b.predicted_t);
  const Scene future = detail::extrapolate(live, t, cfg.lookahead);
  const Scene reference = detail::extrapolate(planned_scene, t, cfg.lookahead);
  b.predicted.t = b.predicted_t;
  b.predicted.body = self;
  b.predicted.head = planned_head;
  b.predicted.entities = visible_entities(future, self.position, planned_head, cfg.fov, b.predicted_t);
  if (with_raster) b.predicted.raster = render_semantic_raster(future, self.position, planned_head, cfg.fov, b.predicted_t);
  b.reachable = reachable_entities(future, self.position, cfg.fov.max_range, b.predicted_t);
  b.reference_reachable = reachable_entities(reference, self.position, cfg.fov.max_range, b.predicted_t);
  b.reference_ids = detail::present_ids(planned_scene, t);
  return b;
}

/// Reactive pass: validates and executes `plan` against `live`.
inline ExecutedTrace run_res(const Scene& live, const BodyTrajectory& traj, const Plan& plan, const EngineConfig& cfg,
                             const Backends& backends, std::mt19937_64& rng) {
  ExecutedTrace out;
  out.memory = Fmm(cfg.fmm_recent, cfg.fmm_relevant);
  if (traj.empty()) return out;
  if (!cfg.use_res) {
    out.ticks = plan.track;
    for (const auto& pa : plan.actions) out.log.push_back({pa.scheduled_t, EventKind::Executed, pa.action, {}});
    return out;
  }

  OracleBackend oracle(cfg.oracle);
  ReasoningBackend& validator = backends.validate ? *backends.validate : oracle;
  TokenOverlapScorer token_scorer;
  const RelevanceScorer& scorer = backends.relevance ? *backends.relevance : token_scorer;
  const bool want_raster = backends.validate != nullptr;

  struct Slot {
    double scheduled_t;
    ActionReason action;
    double hold;
    bool validated{false};
    std::optional<ActionReason> original;  // set when this slot replaced a planned action
  };
  std::vector<Slot> pending;
  for (const auto& pa : plan.actions) pending.push_back({pa.scheduled_t, pa.action, pa.hold, false, std::nullopt});
  auto by_time = [](const Slot& a, const Slot& b) { return a.scheduled_t < b.scheduled_t; };

  HeadState head;
  head.orientation = traj.pose_at(traj.start()).heading;
  std::optional<Slot> due;
  std::vector<ActionReason> executed;
  int active_index = -1;
  const std::size_t n = cfg.tick_count(traj.duration());
  const std::size_t ahead = cfg.lookahead_ticks();

  for (std::size_t k = 0; k < n; ++k) {
    const double t = traj.start() + static_cast<double>(k) * cfg.tick;
    const Pose body = traj.pose_at(std::min(t, traj.end()));

    const bool was_returning = head.phase == Phase::Returning;
    if (k > 0) {
      std::optional<UnitQuaternion> target;
      if (head.active_action) target = resolve_target(*head.active_action, live, body.position, t);
      step_head(head, body.heading, target, t, cfg.tick, cfg.turn_rate);
    }

    // Validate the pose planned for t + lookahead.
    {
      const std::size_t ka = std::min(k + ahead, plan.track.empty() ? 0 : plan.track.size() - 1);
      const UnitQuaternion planned_head = plan.track.empty() ? body.heading : plan.track[ka].head;
      LookaheadBundle bundle = build_bundle(live, plan.scene, traj, planned_head, t, cfg, want_raster);
      Slot* subject = nullptr;
      for (auto& s : pending) {
        if (!s.validated && s.scheduled_t <= bundle.predicted_t + 1e-9) {
          subject = &s;
          break;
        }
      }
      if (subject) {
        bundle.planned = subject->action;
      } else if (!plan.track.empty() && plan.track[ka].action_index >= 0) {
        bundle.planned = plan.actions[static_cast<std::size_t>(plan.track[ka].action_index)].action;
      }
      // Everything already committed to, so a stimulus answered by a queued
      // action does not trigger a second one.
      bundle.executed = executed;
      if (due) bundle.executed.push_back(due->action);
      for (const auto& s : pending) {
        if (&s != subject) bundle.executed.push_back(s.action);
      }
      if (!executed.empty()) bundle.last_action = executed.back();

      const double delay = LatencyModel::sample(cfg.latency.validate, rng);
      ValidationRecord rec{t, bundle.predicted_t, Decision::Keep, subject != nullptr, false, delay > cfg.lookahead};
      if (rec.late) {
        ++out.unvalidated;
        if (subject) {
          subject->validated = true;
          out.log.push_back({t, EventKind::Unvalidated, subject->action, {}});
        }
      } else {
        const Verdict v = validate_plan(bundle, cfg.drivers, validator);
        rec.decision = v.decision;
        rec.fallback = v.fallback;
        if (subject) {
          subject->validated = true;
          if (v.decision == Decision::Replace) {
            out.log.push_back({t, EventKind::Replaced, subject->action, v.replacement});
            subject->original = subject->action;
            subject->action = *v.replacement;
            subject->hold = sample_hold(rng, cfg.hold);
          } else if (v.decision == Decision::Cancel) {
            out.log.push_back({t, EventKind::Cancelled, subject->action, {}});
            const double when = subject->scheduled_t;
            std::erase_if(pending, [&](const Slot& s) { return s.scheduled_t == when; });
          }
        } else if (v.decision == Decision::Replace) {
          Slot s{bundle.predicted_t, *v.replacement, sample_hold(rng, cfg.hold), true, std::nullopt};
          out.log.push_back({t, EventKind::Inserted, s.action, {}});
          std::erase_if(pending, [&](const Slot& p) {
            if (std::abs(p.scheduled_t - s.scheduled_t) < 1e-9) {
              out.log.push_back({t, EventKind::Superseded, p.action, s.action});
              return true;
            }
            return false;
          });
          pending.insert(std::upper_bound(pending.begin(), pending.end(), s, by_time), s);
        }
      }
      out.validations.push_back(rec);
    }

    // Collect due actions; a newer one supersedes one still waiting unless
    // it has lower priority.
    while (!pending.empty() && pending.front().scheduled_t <= t + 1e-9) {
      if (!due || supersedes(pending.front().action, due->action)) {
        if (due) out.log.push_back({t, EventKind::Superseded, due->action, pending.front().action});
        due = pending.front();
      } else {
        out.log.push_back({t, EventKind::Superseded, pending.front().action, due->action});
      }
      pending.erase(pending.begin());
    }
    if (due && !was_returning && start_action(head, due->action, due->hold)) {
      if (due->original) {
        record_substitution(out.memory, *due->original, due->action, t, live.goal.text, scorer);
      } else {
        MemoryEntry e;
        e.t = t;
        e.action = due->action;
        insert(out.memory, std::move(e), live.goal.text, scorer);
        out.memory.mark_executed(due->action);
      }
      out.log.push_back({t, EventKind::Executed, due->action, {}});
      executed.push_back(due->action);
      active_index = static_cast<int>(out.log.size()) - 1;
      due.reset();
    }

    out.ticks.push_back(detail::record(t, head, active_index));
  }
  return out;
}

/// Plan then execute. `planning_scene` is what DPS sees; `live` is what RES sees.
struct PipelineResult {
  Plan plan;
  ExecutedTrace trace;
};

inline PipelineResult run_pipeline(const Scene& planning_scene, const Scene& live, const BodyTrajectory& traj,
                                   const EngineConfig& cfg, const Backends& backends = {}) {
  std::mt19937_64 dps_rng(mix_seed(cfg.seed, 1));
  std::mt19937_64 res_rng(mix_seed(cfg.seed, 2));
  PipelineResult r;
  r.plan = run_dps(planning_scene, traj, cfg, backends, dps_rng);
  r.trace = run_res(live, traj, r.plan, cfg, backends, res_rng);
  return r;
}

/// Scene seen by `self`: the base scene with every other agent present as a
/// moving social pedestrian following its own trajectory.
inline Scene scene_for_agent(const Scene& base, const std::map<std::string, BodyTrajectory>& agents,
                             const std::string& self) {
  Scene s = base;
  std::erase_if(s.agents, [&](const Entity& e) { return agents.count(e.id) > 0; });
  for (const auto& [id, traj] : agents) {
    if (id == self || traj.empty()) continue;
    Entity e;
    e.id = id;
    e.class_label = "pedestrian";
    e.tags.insert(Tag::Social);
    e.is_agent = true;
    e.extents = {0.25, 0.25, 0.9};
    for (const auto& smp : traj.samples()) e.waypoints.push_back({smp.t, smp.position});
    e.appear_at = traj.start();
    e.vanish_at = traj.end();
    s.agents.push_back(std::move(e));
  }
  return s;
}

/// Independent pipeline per agent on a shared clock. Agent i (in id order)
/// runs with seed `cfg.seed + i`, so a single agent reproduces run_pipeline.
inline std::map<std::string, PipelineResult> run_multi(const Scene& base,
                                                       const std::map<std::string, BodyTrajectory>& agents,
                                                       const EngineConfig& cfg, const Backends& backends = {},
                                                       bool parallel = false) {
  std::vector<std::string> ids;
  for (const auto& [id, traj] : agents) ids.push_back(id);
  std::vector<PipelineResult> results(ids.size());
  auto one = [&](std::size_t i) {
    EngineConfig c = cfg;
    c.seed = cfg.seed + i;
    const Scene view = scene_for_agent(base, agents, ids[i]);
    results[i] = run_pipeline(view, view, agents.at(ids[i]), c, backends);
  };
  if (parallel && ids.size() > 1) {
    std::vector<std::future<void>> jobs;
    for (std::size_t i = 0; i < ids.size(); ++i) jobs.push_back(std::async(std::launch::async, one, i));
    for (auto& j : jobs) j.get();
  } else {
    for (std::size_t i = 0; i < ids.size(); ++i) one(i);
  }
  std::map<std::string, PipelineResult> out;
  for (std::size_t i = 0; i < ids.size(); ++i) out.emplace(ids[i], std::move(results[i]));
  return out;
}

}  // namespace headsim
