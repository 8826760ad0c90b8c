#pragma once

// Reasoning backends. Three roles are served: describe (entity captions),
// plan (pick the next action-reason pair) and validate (keep or revise a
// planned pose against a look-ahead view). The symbolic oracle serves all
// three deterministically; remote backends are wrapped so any failure falls
// back to the oracle (describe, plan) or to keep (validate).

#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "headsim/memory.hpp"
#include "headsim/perception.hpp"

namespace headsim {

/// Lower rank wins when several predicates fire.
constexpr int priority_rank(Driver d) {
  switch (d) {
    case Driver::Safety: return 0;
    case Driver::InformationSeeking: return 1;
    case Driver::SocialSchema: return 2;
    case Driver::Interest: return 3;
    case Driver::Habit: return 4;
  }
  return 5;
}

inline constexpr std::array<Driver, 5> kDriversByPriority{Driver::Safety, Driver::InformationSeeking,
                                                          Driver::SocialSchema, Driver::Interest, Driver::Habit};

struct OracleParams {
  double hazard_range{15.0};
  double crossing_distance{2.0};
  double crossing_horizon{4.0};
  double min_crossing_speed{0.1};
  double flow_cone_deg{30.0};
  int flow_min_agents{3};
  double flow_min_speed{0.2};
  double habit_period{4.0};
  double habit_sweep_deg{30.0};
};

struct PlanRequest {
  Goal goal;
  Pose self_pose;
  const Fmm* fmm{nullptr};
  DriverSet drivers;
  double t{0.0};
};

struct LookaheadBundle {
  double tick_t{0.0};
  double predicted_t{0.0};
  Observation predicted;                           // frame expected at predicted_t
  std::vector<EntitySnapshot> reachable;           // in range and unblocked at predicted_t, any bearing
  std::vector<EntitySnapshot> reference_reachable; // the same query against the planning scene
  std::set<std::string> reference_ids;             // ids present in the planning scene at tick_t
  Goal goal;
  std::optional<ActionReason> planned;             // nullopt: the plan holds the head forward here
  std::optional<ActionReason> last_action;
  std::vector<ActionReason> executed;
};

enum class Decision : std::uint8_t { Keep, Replace, Cancel };

constexpr std::string_view decision_name(Decision d) {
  switch (d) {
    case Decision::Keep: return "keep";
    case Decision::Replace: return "replace";
    case Decision::Cancel: return "cancel";
  }
  return "?";
}

struct Verdict {
  Decision decision{Decision::Keep};
  std::optional<ActionReason> replacement;  // present iff decision == Replace
  bool fallback{false};                     // remote failure; kept by default
};

class ReasoningBackend {
 public:
  virtual ~ReasoningBackend() = default;
  virtual std::string name() const = 0;
  virtual std::vector<EntityDescription> describe(const Observation& obs, const Goal& goal) = 0;
  /// nullopt keeps the head forward-aligned.
  virtual std::optional<ActionReason> plan(const PlanRequest& request) = 0;
  virtual Verdict validate(const LookaheadBundle& bundle, const DriverSet& drivers) = 0;
};

namespace detail {

inline std::string format_fixed(double v, int digits = 1) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string tag_list(const TagSet& tags) {
  std::string out;
  for (Tag t : tags.to_vector()) {
    if (!out.empty()) out += ", ";
    out += tag_name(t);
  }
  return out;
}

inline double yaw_between(const Vec3& a, const Vec3& b) {
  return std::abs(wrap_angle(std::atan2(a.y, a.x) - std::atan2(b.y, b.x)));
}

}  // namespace detail

/// Everything the symbolic predicates look at.
struct PredicateContext {
  Pose self;
  double t{0.0};
  Goal goal;
  bool goal_observed{true};
  std::vector<EntitySnapshot> entities;
  std::vector<const ActionReason*> history;  // earlier actions, oldest first
  DriverSet drivers;
  int max_rank{4};  // only drivers with rank <= max_rank may fire
  const std::set<std::string>* only_ids{nullptr};  // restricts entity-based predicates
};

/// The symbolic predicate table, evaluated in priority order.
class SymbolicOracle {
 public:
  explicit SymbolicOracle(OracleParams params = {}) : p_(params) {}

  const OracleParams& params() const { return p_; }

  std::optional<ActionReason> evaluate(const PredicateContext& ctx) const {
    for (Driver d : kDriversByPriority) {
      if (priority_rank(d) > ctx.max_rank || !ctx.drivers.enabled(d)) continue;
      std::optional<ActionReason> a;
      switch (d) {
        case Driver::Safety: a = safety(ctx); break;
        case Driver::InformationSeeking: a = information_seeking(ctx); break;
        case Driver::SocialSchema: a = social_schema(ctx); break;
        case Driver::Interest: a = interest(ctx); break;
        case Driver::Habit: a = habit(ctx); break;
      }
      if (a) {
        a->issued_at = ctx.t;
        return a;
      }
    }
    return std::nullopt;
  }

  /// Which drivers' predicates fire on this context, ignoring the mask.
  std::vector<Driver> firing(PredicateContext ctx) const {
    ctx.drivers = DriverSet::all();
    std::vector<Driver> out;
    for (Driver d : kDriversByPriority) {
      if (priority_rank(d) > ctx.max_rank) continue;
      std::optional<ActionReason> a;
      switch (d) {
        case Driver::Safety: a = safety(ctx); break;
        case Driver::InformationSeeking: a = information_seeking(ctx); break;
        case Driver::SocialSchema: a = social_schema(ctx); break;
        case Driver::Interest: a = interest(ctx); break;
        case Driver::Habit: a = habit(ctx); break;
      }
      if (a) out.push_back(d);
    }
    return out;
  }

  /// Closest approach between entity and agent over the crossing horizon,
  /// both extrapolated linearly.
  double closest_approach(const EntitySnapshot& e, const Pose& self) const {
    const Vec3 r = e.position - self.position;
    const Vec3 v = e.velocity - self.velocity;
    const double vv = v.dot(v);
    double tau = vv > 1e-12 ? -r.dot(v) / vv : 0.0;
    tau = std::clamp(tau, 0.0, p_.crossing_horizon);
    return (r + v * tau).norm();
  }

 private:
  static bool targeted(const PredicateContext& ctx, const std::string& id, std::optional<Driver> by = std::nullopt) {
    for (const ActionReason* a : ctx.history) {
      const std::string* tid = a->target_entity();
      if (tid && *tid == id && (!by || a->driver == *by)) return true;
    }
    return false;
  }

  static bool eligible(const PredicateContext& ctx, const EntitySnapshot& e) {
    return !ctx.only_ids || ctx.only_ids->count(e.id) > 0;
  }

  std::optional<ActionReason> safety(const PredicateContext& ctx) const {
    for (const auto& e : ctx.entities) {
      if (!eligible(ctx, e) || targeted(ctx, e.id, Driver::Safety)) continue;
      const double range = (e.position - ctx.self.position).norm();
      if (e.tags.contains(Tag::Hazard) && range < p_.hazard_range) {
        return ActionReason{e.id, Driver::Safety,
                            "hazard " + e.class_label + " at " + detail::format_fixed(range) + " m", 0.0};
      }
      if (e.velocity.norm() > p_.min_crossing_speed && closest_approach(e, ctx.self) < p_.crossing_distance) {
        return ActionReason{e.id, Driver::Safety,
                            e.class_label + " on a crossing course at " + detail::format_fixed(range) + " m", 0.0};
      }
    }
    return std::nullopt;
  }

  std::optional<ActionReason> information_seeking(const PredicateContext& ctx) const {
    if (!ctx.goal_observed && !ctx.only_ids) {
      const Vec3 dir = ctx.goal.position - ctx.self.position;
      bool looked = false;
      for (const ActionReason* a : ctx.history) {
        if (a->driver == Driver::InformationSeeking && a->target_orientation()) looked = true;
      }
      if (!looked && dir.norm() > 1e-6) {
        return ActionReason{UnitQuaternion::looking_along(dir), Driver::InformationSeeking,
                            "locate the goal: " + ctx.goal.text, 0.0};
      }
    }
    for (const auto& e : ctx.entities) {
      if (!eligible(ctx, e) || !e.tags.contains(Tag::GoalRelevant) || targeted(ctx, e.id)) continue;
      return ActionReason{e.id, Driver::InformationSeeking, e.class_label + " bears on the goal: " + ctx.goal.text,
                          0.0};
    }
    return std::nullopt;
  }

  std::optional<ActionReason> social_schema(const PredicateContext& ctx) const {
    std::vector<const EntitySnapshot*> movers;
    for (const auto& e : ctx.entities) {
      if ((e.is_agent || e.tags.contains(Tag::Social)) && e.velocity.norm_xy() > p_.flow_min_speed) {
        movers.push_back(&e);
      }
    }
    const double cone = deg_to_rad(p_.flow_cone_deg);
    std::vector<const EntitySnapshot*> best;
    for (const auto* anchor : movers) {
      std::vector<const EntitySnapshot*> group;
      for (const auto* m : movers) {
        if (detail::yaw_between(m->velocity, anchor->velocity) <= cone) group.push_back(m);
      }
      if (group.size() > best.size()) best = std::move(group);
    }
    if (static_cast<int>(best.size()) < p_.flow_min_agents) return std::nullopt;
    if (ctx.only_ids) {
      bool any_new = false;
      for (const auto* m : best) any_new = any_new || ctx.only_ids->count(m->id) > 0;
      if (!any_new) return std::nullopt;
    }
    Vec3 mean;
    for (const auto* m : best) {
      const Vec3 v{m->velocity.x, m->velocity.y, 0.0};
      mean += v * (1.0 / v.norm());
    }
    if (mean.norm_xy() < 1e-6) return std::nullopt;
    const double flow_yaw = std::atan2(mean.y, mean.x);
    for (const ActionReason* a : ctx.history) {
      if (a->driver != Driver::SocialSchema) continue;
      if (const auto* q = a->target_orientation()) {
        if (std::abs(wrap_angle(q->yaw() - flow_yaw)) <= cone) return std::nullopt;
      }
    }
    return ActionReason{UnitQuaternion::from_yaw(flow_yaw), Driver::SocialSchema,
                        "survey the flow of " + std::to_string(best.size()) + " pedestrians", 0.0};
  }

  std::optional<ActionReason> interest(const PredicateContext& ctx) const {
    for (const auto& e : ctx.entities) {
      if (!eligible(ctx, e) || !e.tags.contains(Tag::Novel) || targeted(ctx, e.id)) continue;
      return ActionReason{e.id, Driver::Interest, "unusual " + e.class_label + " draws attention", 0.0};
    }
    return std::nullopt;
  }

  std::optional<ActionReason> habit(const PredicateContext& ctx) const {
    int sweeps = 0;
    for (const ActionReason* a : ctx.history) {
      if (a->issued_at > ctx.t - p_.habit_period) return std::nullopt;
      if (a->driver == Driver::Habit) ++sweeps;
    }
    const double sign = sweeps % 2 == 0 ? 1.0 : -1.0;
    const double yaw = ctx.self.heading.yaw() + sign * deg_to_rad(p_.habit_sweep_deg);
    return ActionReason{UnitQuaternion::from_yaw(yaw), Driver::Habit,
                        sign > 0 ? "habitual scan to the left" : "habitual scan to the right", 0.0};
  }

  OracleParams p_;
};

/// Whether the goal position counts as observed anywhere in memory.
inline bool goal_observed(const Fmm& fmm) {
  for (const auto& e : fmm.entries()) {
    if (e.goal_in_view) return true;
  }
  return false;
}

/// Deterministic backend built on the symbolic predicate table.
class OracleBackend final : public ReasoningBackend {
 public:
  explicit OracleBackend(OracleParams params = {}) : oracle_(params) {}

  std::string name() const override { return "oracle"; }
  const SymbolicOracle& oracle() const { return oracle_; }

  std::vector<EntityDescription> describe(const Observation& obs, const Goal& goal) override {
    (void)goal;
    std::vector<EntityDescription> out;
    out.reserve(obs.entities.size());
    for (const auto& e : obs.entities) {
      std::string text = e.class_label;
      if (!e.tags.empty()) text += " (" + detail::tag_list(e.tags) + ")";
      text += " at " + detail::format_fixed(e.range) + " m, bearing " +
              detail::format_fixed(rad_to_deg(e.bearing)) + " deg";
      if (!e.description_hint.empty()) text += ": " + e.description_hint;
      out.push_back({e.id, std::move(text)});
    }
    return out;
  }

  std::optional<ActionReason> plan(const PlanRequest& req) override {
    if (!req.fmm || req.fmm->empty()) throw ContractViolation("plan needs at least one memory entry");
    const MemoryEntry& latest = req.fmm->latest();
    PredicateContext ctx;
    ctx.self = req.self_pose;
    ctx.t = req.t;
    ctx.goal = req.goal;
    ctx.goal_observed = goal_observed(*req.fmm);
    ctx.entities = latest.objects;
    ctx.entities.insert(ctx.entities.end(), latest.agents.begin(), latest.agents.end());
    sort_by_range(ctx.entities, req.self_pose.position);
    ctx.history = req.fmm->actions();
    ctx.drivers = req.drivers;
    return oracle_.evaluate(ctx);
  }

  Verdict validate(const LookaheadBundle& b, const DriverSet& drivers) override {
    const Pose& self = b.predicted.body;

    // Entities in the predicted view that the planning scene did not have.
    std::map<std::string, const EntitySnapshot*> reference;
    for (const auto& e : b.reference_reachable) reference[e.id] = &e;
    std::set<std::string> fresh;
    for (const auto& e : b.predicted.entities) {
      auto it = reference.find(e.id);
      const bool known = b.reference_ids.count(e.id) > 0;
      if (!known || (it != reference.end() && it->second->tags != e.tags)) fresh.insert(e.id);
    }

    std::vector<const ActionReason*> history;
    for (const auto& a : b.executed) history.push_back(&a);
    if (b.planned) history.push_back(&*b.planned);

    PredicateContext ctx;
    ctx.self = self;
    ctx.t = b.tick_t;
    ctx.goal = b.goal;
    ctx.goal_observed = true;
    ctx.entities = b.predicted.entities;
    ctx.history = history;
    ctx.drivers = drivers;
    ctx.max_rank = b.planned ? priority_rank(b.planned->driver) - 1 : priority_rank(Driver::Habit) - 1;
    ctx.only_ids = &fresh;

    Verdict v;
    if (!fresh.empty() && ctx.max_rank >= 0) {
      if (auto a = oracle_.evaluate(ctx)) {
        v.decision = Decision::Replace;
        v.replacement = std::move(a);
        return v;
      }
    }

    if (b.planned && b.planned->target_entity()) {
      const std::string& id = *b.planned->target_entity();
      auto has = [&](const std::vector<EntitySnapshot>& list) {
        return std::any_of(list.begin(), list.end(), [&](const EntitySnapshot& e) { return e.id == id; });
      };
      // Lost: the planning scene expected the target within reach, the live one does not.
      const bool lost = !has(b.reachable) && has(b.reference_reachable);
      if (lost) {
        PredicateContext alt = ctx;
        alt.only_ids = nullptr;
        alt.max_rank = priority_rank(Driver::Interest);
        std::erase_if(alt.entities, [&](const EntitySnapshot& e) { return e.id == id; });
        if (auto a = oracle_.evaluate(alt)) {
          v.decision = Decision::Replace;
          v.replacement = std::move(a);
          return v;
        }
        if (drivers.enabled(Driver::Habit)) {
          const double yaw = self.heading.yaw() + deg_to_rad(oracle_.params().habit_sweep_deg);
          v.decision = Decision::Replace;
          v.replacement = ActionReason{UnitQuaternion::from_yaw(yaw), Driver::Habit,
                                       "target gone; resume scanning", b.tick_t};
          return v;
        }
        v.decision = Decision::Cancel;
        return v;
      }
    }
    return v;
  }

 private:
  static void sort_by_range(std::vector<EntitySnapshot>& v, const Vec3& from) {
    std::stable_sort(v.begin(), v.end(), [&](const EntitySnapshot& a, const EntitySnapshot& b) {
      const double ra = (a.position - from).norm();
      const double rb = (b.position - from).norm();
      return ra != rb ? ra < rb : a.id < b.id;
    });
  }

  SymbolicOracle oracle_;
};

// --- fallback wrappers -----------------------------------------------------

struct DescribeResult {
  std::vector<EntityDescription> descriptions;
  bool fallback{false};
  std::string diagnostic;
};

inline DescribeResult describe_entities(const Observation& obs, const Goal& goal, ReasoningBackend& backend,
                                        ReasoningBackend& fallback) {
  DescribeResult r;
  if (obs.entities.empty()) return r;
  try {
    r.descriptions = backend.describe(obs, goal);
    std::set<std::string> want;
    for (const auto& e : obs.entities) want.insert(e.id);
    std::set<std::string> got;
    for (const auto& d : r.descriptions) got.insert(d.id);
    if (got != want || r.descriptions.size() != obs.entities.size()) {
      throw BackendError("describe reply does not cover the visible entities");
    }
    // Keep the range order of the observation.
    std::vector<EntityDescription> ordered;
    for (const auto& e : obs.entities) {
      for (const auto& d : r.descriptions) {
        if (d.id == e.id) ordered.push_back(d);
      }
    }
    r.descriptions = std::move(ordered);
  } catch (const BackendError& ex) {
    r.descriptions = fallback.describe(obs, goal);
    r.fallback = true;
    r.diagnostic = ex.what();
  }
  return r;
}

struct PlanResult {
  std::optional<ActionReason> action;
  bool fallback{false};
  std::string diagnostic;
};

/// Checks a backend's action against the request: the driver must be
/// enabled and an entity target must exist in memory.
inline void check_action(const ActionReason& a, const PlanRequest& req) {
  if (!req.drivers.enabled(a.driver)) {
    throw BackendError("reply names disabled driver " + std::string(driver_name(a.driver)));
  }
  if (const std::string* id = a.target_entity()) {
    bool known = false;
    for (const auto& e : req.fmm->entries()) {
      for (const auto& o : e.objects) known = known || o.id == *id;
      for (const auto& o : e.agents) known = known || o.id == *id;
    }
    if (!known) throw BackendError("reply targets unknown entity '" + *id + "'");
  }
}

inline PlanResult plan_action(const PlanRequest& req, ReasoningBackend& backend, ReasoningBackend& fallback) {
  PlanResult r;
  try {
    r.action = backend.plan(req);
    if (r.action) check_action(*r.action, req);
  } catch (const BackendError& ex) {
    r.action = fallback.plan(req);
    r.fallback = true;
    r.diagnostic = ex.what();
  }
  return r;
}

/// Remote failures keep the planned pose.
inline Verdict validate_plan(const LookaheadBundle& bundle, const DriverSet& drivers, ReasoningBackend& backend) {
  try {
    Verdict v = backend.validate(bundle, drivers);
    if (v.decision == Decision::Replace) {
      if (!v.replacement) throw BackendError("replace verdict without replacement");
      if (!drivers.enabled(v.replacement->driver)) throw BackendError("replacement uses a disabled driver");
    } else {
      v.replacement.reset();
    }
    return v;
  } catch (const BackendError&) {
    Verdict v;
    v.fallback = true;
    return v;
  }
}

/// Planning without the language-model stage: pick the highest-priority
/// described entity directly from its tags, nearest first on ties. No
/// memory, no thresholds, no habit scan.
inline std::optional<ActionReason> select_from_descriptions(const Observation& obs,
                                                            const std::vector<EntityDescription>& descriptions,
                                                            const DriverSet& drivers) {
  auto driver_for = [](const EntitySnapshot& e) -> std::optional<Driver> {
    if (e.tags.contains(Tag::Hazard)) return Driver::Safety;
    if (e.tags.contains(Tag::GoalRelevant)) return Driver::InformationSeeking;
    if (e.is_agent || e.tags.contains(Tag::Social)) return Driver::SocialSchema;
    if (e.tags.contains(Tag::Novel)) return Driver::Interest;
    return std::nullopt;
  };
  const EntitySnapshot* best = nullptr;
  Driver best_driver = Driver::Habit;
  for (const auto& e : obs.entities) {
    const bool described = std::any_of(descriptions.begin(), descriptions.end(),
                                       [&](const EntityDescription& d) { return d.id == e.id; });
    if (!described) continue;
    auto d = driver_for(e);
    if (!d || !drivers.enabled(*d)) continue;
    if (!best || priority_rank(*d) < priority_rank(best_driver)) {
      best = &e;
      best_driver = *d;
    }
  }
  if (!best) return std::nullopt;
  std::string why;
  for (const auto& d : descriptions) {
    if (d.id == best->id) why = d.text;
  }
  return ActionReason{best->id, best_driver, why, obs.t};
}

}  // namespace headsim
