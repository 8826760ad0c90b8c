#pragma once

// Scene model, body-trajectory replay and field-of-view queries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "headsim/error.hpp"
#include "headsim/geom.hpp"

namespace headsim {

enum class Tag : std::uint8_t { Hazard, Social, Novel, GoalRelevant, StaticBackground };

inline constexpr std::array<Tag, 5> kAllTags{Tag::Hazard, Tag::Social, Tag::Novel,
                                             Tag::GoalRelevant, Tag::StaticBackground};

constexpr std::string_view tag_name(Tag t) {
  switch (t) {
    case Tag::Hazard: return "hazard";
    case Tag::Social: return "social";
    case Tag::Novel: return "novel";
    case Tag::GoalRelevant: return "goal_relevant";
    case Tag::StaticBackground: return "static_background";
  }
  return "?";
}

inline std::optional<Tag> parse_tag(std::string_view s) {
  for (Tag t : kAllTags) {
    if (tag_name(t) == s) return t;
  }
  return std::nullopt;
}

class TagSet {
 public:
  constexpr TagSet() = default;
  constexpr TagSet(std::initializer_list<Tag> tags) {
    for (Tag t : tags) insert(t);
  }
  constexpr void insert(Tag t) { bits_ |= bit(t); }
  constexpr bool contains(Tag t) const { return (bits_ & bit(t)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool operator==(const TagSet&) const = default;
  std::vector<Tag> to_vector() const {
    std::vector<Tag> out;
    for (Tag t : kAllTags) {
      if (contains(t)) out.push_back(t);
    }
    return out;
  }

 private:
  static constexpr std::uint8_t bit(Tag t) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(t)); }
  std::uint8_t bits_{0};
};

enum class Condition : std::uint8_t { MDC, APC, External };

constexpr std::string_view condition_name(Condition c) {
  switch (c) {
    case Condition::MDC: return "MDC";
    case Condition::APC: return "APC";
    case Condition::External: return "external";
  }
  return "?";
}

inline std::optional<Condition> parse_condition(std::string_view s) {
  if (s == "MDC") return Condition::MDC;
  if (s == "APC") return Condition::APC;
  if (s == "external") return Condition::External;
  return std::nullopt;
}

struct Waypoint {
  double t{0.0};
  Vec3 position;
  bool operator==(const Waypoint&) const = default;
};

/// A tagged world object or pedestrian.
///
/// With a single waypoint the entity moves at constant `velocity` from that
/// waypoint (zero velocity means static). With several waypoints motion is
/// piecewise linear and `velocity` is ignored. Outside the waypoint span the
/// position holds at the nearest end.
struct Entity {
  std::string id;
  std::string class_label;
  std::vector<Waypoint> waypoints;
  Vec3 extents;  // half sizes, meters
  Vec3 velocity;
  TagSet tags;
  std::string description_hint;
  bool is_agent{false};
  std::optional<double> appear_at;
  std::optional<double> vanish_at;

  bool operator==(const Entity&) const = default;

  bool present_at(double t) const {
    if (appear_at && t < *appear_at) return false;
    if (vanish_at && t > *vanish_at) return false;
    return true;
  }

  Vec3 position_at(double t) const {
    if (waypoints.empty()) throw ContractViolation("entity '" + id + "' has no waypoints");
    if (waypoints.size() == 1) return waypoints.front().position + velocity * (t - waypoints.front().t);
    if (t <= waypoints.front().t) return waypoints.front().position;
    if (t >= waypoints.back().t) return waypoints.back().position;
    auto it = std::upper_bound(waypoints.begin(), waypoints.end(), t,
                               [](double v, const Waypoint& w) { return v < w.t; });
    const Waypoint& b = *it;
    const Waypoint& a = *(it - 1);
    const double u = (t - a.t) / (b.t - a.t);
    return a.position + (b.position - a.position) * u;
  }

  Vec3 velocity_at(double t) const {
    if (waypoints.size() <= 1) return velocity;
    if (t < waypoints.front().t || t >= waypoints.back().t) return {};
    auto it = std::upper_bound(waypoints.begin(), waypoints.end(), t,
                               [](double v, const Waypoint& w) { return v < w.t; });
    const Waypoint& b = *it;
    const Waypoint& a = *(it - 1);
    return (b.position - a.position) * (1.0 / (b.t - a.t));
  }
};

struct Goal {
  std::string text;
  Vec3 position;
  bool operator==(const Goal&) const = default;
};

struct Scene {
  std::string name;
  Goal goal;
  Condition condition{Condition::MDC};
  std::vector<Entity> entities;
  std::vector<Entity> agents;  // pedestrians; is_agent is forced on load

  bool operator==(const Scene&) const = default;

  template <typename F>
  void for_each_entity(F&& f) const {
    for (const auto& e : entities) f(e);
    for (const auto& e : agents) f(e);
  }

  const Entity* find(std::string_view id) const {
    for (const auto& e : entities) {
      if (e.id == id) return &e;
    }
    for (const auto& e : agents) {
      if (e.id == id) return &e;
    }
    return nullptr;
  }

  /// Throws SchemaError on duplicate ids, negative extents, empty waypoint
  /// lists, unordered waypoints or a non-finite goal.
  void validate() const {
    std::vector<std::string> ids;
    auto check = [&](const Entity& e, const std::string& path) {
      if (e.id.empty()) throw SchemaError(path + ".id", "empty id");
      ids.push_back(e.id);
      if (e.extents.x < 0 || e.extents.y < 0 || e.extents.z < 0) {
        throw SchemaError(path + ".extents", "negative extent");
      }
      if (e.waypoints.empty()) throw SchemaError(path + ".waypoints", "no position");
      for (std::size_t i = 1; i < e.waypoints.size(); ++i) {
        if (!(e.waypoints[i].t > e.waypoints[i - 1].t)) {
          throw SchemaError(path + ".waypoints[" + std::to_string(i) + "].t", "timestamps not increasing");
        }
      }
    };
    for (std::size_t i = 0; i < entities.size(); ++i) check(entities[i], "entities[" + std::to_string(i) + "]");
    for (std::size_t i = 0; i < agents.size(); ++i) check(agents[i], "agents[" + std::to_string(i) + "]");
    std::sort(ids.begin(), ids.end());
    if (auto it = std::adjacent_find(ids.begin(), ids.end()); it != ids.end()) {
      throw SchemaError("entities", "duplicate id '" + *it + "'");
    }
    if (!std::isfinite(goal.position.x) || !std::isfinite(goal.position.y) || !std::isfinite(goal.position.z)) {
      throw SchemaError("goal.position", "not finite");
    }
  }
};

struct Pose {
  double t{0.0};
  Vec3 position;
  UnitQuaternion heading;
  Vec3 velocity;
};

struct TrajectorySample {
  double t{0.0};
  Vec3 position;
  UnitQuaternion heading;
};

/// Time-ordered body samples replayed by interpolation.
class BodyTrajectory {
 public:
  BodyTrajectory() = default;

  explicit BodyTrajectory(std::vector<TrajectorySample> samples) : samples_(std::move(samples)) {
    for (std::size_t i = 1; i < samples_.size(); ++i) {
      if (!(samples_[i].t > samples_[i - 1].t)) {
        throw ContractViolation("trajectory timestamps must be strictly increasing");
      }
    }
  }

  /// Constant-speed walk along a polyline, sampled every `dt` seconds.
  /// Heading follows the current segment direction.
  static BodyTrajectory walk(const std::vector<Vec3>& path, double speed, double dt = 0.2, double t0 = 0.0) {
    if (path.size() < 2) throw ContractViolation("walk needs at least two path points");
    if (!(speed > 0.0) || !(dt > 0.0)) throw ContractViolation("walk needs positive speed and dt");
    std::vector<double> cumulative{0.0};
    for (std::size_t i = 1; i < path.size(); ++i) {
      cumulative.push_back(cumulative.back() + (path[i] - path[i - 1]).norm());
    }
    const double total = cumulative.back();
    const auto steps = static_cast<std::size_t>(std::floor(total / (speed * dt) + 1e-9));
    std::vector<TrajectorySample> out;
    out.reserve(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
      const double s = std::min(total, static_cast<double>(k) * speed * dt);
      std::size_t seg = 1;
      while (seg + 1 < path.size() && cumulative[seg] <= s) ++seg;
      const Vec3 a = path[seg - 1];
      const Vec3 b = path[seg];
      const double len = cumulative[seg] - cumulative[seg - 1];
      const double u = len > 0 ? (s - cumulative[seg - 1]) / len : 0.0;
      const Vec3 dir = b - a;
      out.push_back({t0 + static_cast<double>(k) * dt, a + dir * u, UnitQuaternion::from_yaw(std::atan2(dir.y, dir.x))});
    }
    return BodyTrajectory(std::move(out));
  }

  const std::vector<TrajectorySample>& samples() const { return samples_; }
  bool empty() const { return samples_.empty(); }
  double start() const { return samples_.empty() ? 0.0 : samples_.front().t; }
  double end() const { return samples_.empty() ? 0.0 : samples_.back().t; }
  double duration() const { return end() - start(); }

  /// Interpolated pose. Throws OutOfBounds outside [start, end].
  Pose pose_at(double t) const {
    if (samples_.empty() || t < start() - 1e-9 || t > end() + 1e-9) {
      throw OutOfBounds("pose_at(" + std::to_string(t) + ") outside trajectory span");
    }
    if (samples_.size() == 1) return {t, samples_[0].position, samples_[0].heading, {}};
    t = std::clamp(t, start(), end());
    auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                               [](double v, const TrajectorySample& s) { return v < s.t; });
    if (it == samples_.end()) --it;
    if (it == samples_.begin()) ++it;
    const TrajectorySample& a = *(it - 1);
    const TrajectorySample& b = *it;
    const double u = (t - a.t) / (b.t - a.t);
    const Vec3 vel = (b.position - a.position) * (1.0 / (b.t - a.t));
    if (u <= 0.0) return {t, a.position, a.heading, vel};
    if (u >= 1.0) return {t, b.position, b.heading, vel};
    return {t, a.position + (b.position - a.position) * u, slerp(a.heading, b.heading, u), vel};
  }

  /// Like pose_at but clamps t into the span.
  Pose pose_clamped(double t) const {
    Pose p = pose_at(std::clamp(t, start(), end()));
    p.t = t;
    return p;
  }

 private:
  std::vector<TrajectorySample> samples_;
};

struct FovParams {
  double horizontal_fov_deg{100.0};
  double vertical_fov_deg{80.0};
  double max_range{40.0};
  int raster_width{64};
  int raster_height{64};

  void validate() const {
    if (!(horizontal_fov_deg > 0 && horizontal_fov_deg < 180)) throw ContractViolation("horizontal_fov outside (0, 180)");
    if (!(vertical_fov_deg > 0 && vertical_fov_deg < 180)) throw ContractViolation("vertical_fov outside (0, 180)");
    if (!(max_range > 0)) throw ContractViolation("max_range must be positive");
    if (raster_width < 16 || raster_height < 16) throw ContractViolation("raster resolution below 16x16");
  }
};

/// Entity state captured at observation time, plus where it sat in the view.
struct EntitySnapshot {
  std::string id;
  std::string class_label;
  TagSet tags;
  bool is_agent{false};
  Vec3 position;
  Vec3 velocity;
  Vec3 extents;
  std::string description_hint;
  double bearing{0.0};    // radians, positive to the left of the head forward axis
  double elevation{0.0};  // radians, positive up
  double range{0.0};      // meters from the eye to the entity center

  bool operator==(const EntitySnapshot&) const = default;
};

inline EntitySnapshot snapshot(const Entity& e, double t) {
  EntitySnapshot s;
  s.id = e.id;
  s.class_label = e.class_label;
  s.tags = e.tags;
  s.is_agent = e.is_agent;
  s.position = e.position_at(t);
  s.velocity = e.velocity_at(t);
  s.extents = e.extents;
  s.description_hint = e.description_hint;
  return s;
}

namespace detail {

/// Slab test of the ray origin + s*dir against an axis-aligned box. Returns
/// the entry parameter, or nullopt on a miss or when the origin is inside.
inline std::optional<double> ray_box_entry(const Vec3& origin, const Vec3& dir, const Vec3& center,
                                           const Vec3& half) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  const double o[3] = {origin.x, origin.y, origin.z};
  const double d[3] = {dir.x, dir.y, dir.z};
  const double lo[3] = {center.x - half.x, center.y - half.y, center.z - half.z};
  const double hi[3] = {center.x + half.x, center.y + half.y, center.z + half.z};
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-15) {
      if (o[i] < lo[i] || o[i] > hi[i]) return std::nullopt;
      continue;
    }
    double t1 = (lo[i] - o[i]) / d[i];
    double t2 = (hi[i] - o[i]) / d[i];
    if (t1 > t2) std::swap(t1, t2);
    t_near = std::max(t_near, t1);
    t_far = std::min(t_far, t2);
    if (t_near > t_far) return std::nullopt;
  }
  if (t_far < 0.0) return std::nullopt;
  if (t_near <= 0.0) return std::nullopt;  // origin inside the box
  return t_near;
}

struct Placed {
  const Entity* entity;
  Vec3 position;
};

inline std::vector<Placed> place(const Scene& scene, double t) {
  std::vector<Placed> out;
  scene.for_each_entity([&](const Entity& e) {
    if (e.present_at(t)) out.push_back({&e, e.position_at(t)});
  });
  return out;
}

}  // namespace detail

/// Where `target` sits relative to a viewer, in the viewer's frustum terms.
struct ViewCoordinates {
  double bearing;
  double elevation;
  double range;
  bool in_front;
  bool in_cone;
};

inline ViewCoordinates view_coordinates(const Vec3& eye, const UnitQuaternion& head, const Vec3& target,
                                        const FovParams& fov) {
  const Vec3 rel = target - eye;
  const Vec3 local = head.conjugate().rotate(rel);
  ViewCoordinates vc{};
  vc.range = rel.norm();
  vc.bearing = std::atan2(local.y, local.x);
  vc.elevation = std::atan2(local.z, std::hypot(local.x, local.y));
  vc.in_front = local.x > 1e-9;
  if (vc.in_front) {
    const double h = std::atan(std::abs(local.y) / local.x);
    const double v = std::atan(std::abs(local.z) / local.x);
    vc.in_cone = h <= deg_to_rad(fov.horizontal_fov_deg) / 2.0 + 1e-12 &&
                 v <= deg_to_rad(fov.vertical_fov_deg) / 2.0 + 1e-12;
  } else {
    vc.in_cone = false;
  }
  return vc;
}

/// True when no other present entity's box blocks the segment from `eye`
/// to `target_pos` before it arrives.
inline bool center_ray_clear(const std::vector<detail::Placed>& placed, const Entity* target,
                             const Vec3& eye, const Vec3& target_pos) {
  const Vec3 rel = target_pos - eye;
  const double dist = rel.norm();
  if (dist < 1e-12) return true;
  const Vec3 dir = rel * (1.0 / dist);
  for (const auto& p : placed) {
    if (p.entity == target) continue;
    if (auto hit = detail::ray_box_entry(eye, dir, p.position, p.entity->extents)) {
      if (*hit < dist - 1e-9) return false;
    }
  }
  return true;
}

/// Entities whose center lies inside the view frustum, within range, and
/// unblocked along the center ray. Sorted by range, then id.
inline std::vector<EntitySnapshot> visible_entities(const Scene& scene, const Vec3& eye,
                                                    const UnitQuaternion& head, const FovParams& fov, double t) {
  const auto placed = detail::place(scene, t);
  std::vector<EntitySnapshot> out;
  for (const auto& p : placed) {
    const ViewCoordinates vc = view_coordinates(eye, head, p.position, fov);
    if (!vc.in_cone || vc.range > fov.max_range) continue;
    if (!center_ray_clear(placed, p.entity, eye, p.position)) continue;
    EntitySnapshot s = snapshot(*p.entity, t);
    s.bearing = vc.bearing;
    s.elevation = vc.elevation;
    s.range = vc.range;
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end(), [](const EntitySnapshot& a, const EntitySnapshot& b) {
    return a.range != b.range ? a.range < b.range : a.id < b.id;
  });
  return out;
}

inline std::vector<EntitySnapshot> visible_entities(const Scene& scene, const Pose& body, const UnitQuaternion& head,
                                                    const FovParams& fov) {
  return visible_entities(scene, body.position, head, fov, body.t);
}

/// Entities a head could see by turning: within range and unblocked,
/// regardless of the current cone.
inline std::vector<EntitySnapshot> reachable_entities(const Scene& scene, const Vec3& eye, double max_range, double t) {
  const auto placed = detail::place(scene, t);
  std::vector<EntitySnapshot> out;
  for (const auto& p : placed) {
    const Vec3 rel = p.position - eye;
    if (rel.norm() > max_range) continue;
    if (!center_ray_clear(placed, p.entity, eye, p.position)) continue;
    EntitySnapshot s = snapshot(*p.entity, t);
    s.range = rel.norm();
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end(), [](const EntitySnapshot& a, const EntitySnapshot& b) {
    return a.range != b.range ? a.range < b.range : a.id < b.id;
  });
  return out;
}

/// Grayscale image, row-major, row 0 at the top of the view.
struct Raster {
  int width{0};
  int height{0};
  std::vector<std::uint8_t> cells;

  Raster() = default;
  Raster(int w, int h, std::uint8_t fill = 0) : width(w), height(h), cells(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t& at(int row, int col) { return cells[static_cast<std::size_t>(row) * width + col]; }
  std::uint8_t at(int row, int col) const { return cells[static_cast<std::size_t>(row) * width + col]; }
  bool operator==(const Raster&) const = default;
};

/// Stable non-zero intensity for a class label (FNV-1a folded into 1..255).
inline std::uint8_t label_intensity(std::string_view label) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : label) {
    h ^= c;
    h *= 16777619u;
  }
  return static_cast<std::uint8_t>(1 + h % 255);
}

/// Casts one ray per cell through the view frustum and writes the label
/// intensity of the nearest box hit within range; 0 where nothing is hit.
inline Raster render_semantic_raster(const Scene& scene, const Vec3& eye, const UnitQuaternion& head,
                                     const FovParams& fov, double t) {
  fov.validate();
  Raster r(fov.raster_width, fov.raster_height);
  const auto placed = detail::place(scene, t);
  struct Candidate {
    Vec3 center;
    Vec3 half;
    std::uint8_t intensity;
  };
  std::vector<Candidate> candidates;
  for (const auto& p : placed) {
    const Vec3& h = p.entity->extents;
    if ((p.position - eye).norm() - h.norm() > fov.max_range) continue;
    candidates.push_back({p.position, h, label_intensity(p.entity->class_label)});
  }
  if (candidates.empty()) return r;
  const double th = std::tan(deg_to_rad(fov.horizontal_fov_deg) / 2.0);
  const double tv = std::tan(deg_to_rad(fov.vertical_fov_deg) / 2.0);
  for (int row = 0; row < r.height; ++row) {
    const double v = 1.0 - 2.0 * (row + 0.5) / r.height;
    for (int col = 0; col < r.width; ++col) {
      const double u = 1.0 - 2.0 * (col + 0.5) / r.width;
      Vec3 local{1.0, u * th, v * tv};
      local = local * (1.0 / local.norm());
      const Vec3 dir = head.rotate(local);
      double best = fov.max_range;
      std::uint8_t value = 0;
      for (const auto& c : candidates) {
        if (auto hit = detail::ray_box_entry(eye, dir, c.center, c.half)) {
          if (*hit <= best) {
            if (*hit < best || c.intensity > value) value = c.intensity;
            best = *hit;
          }
        }
      }
      r.at(row, col) = value;
    }
  }
  return r;
}

}  // namespace headsim
