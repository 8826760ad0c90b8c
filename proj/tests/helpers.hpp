#pragma once

// Small scene builders shared by the unit tests.

#include <string>
#include <vector>

#include "headsim/world.hpp"

namespace testutil {

inline headsim::Entity box(std::string id, headsim::Vec3 pos, headsim::Vec3 half = {0.5, 0.5, 0.5},
                           headsim::TagSet tags = {}, std::string label = "crate") {
  headsim::Entity e;
  e.id = std::move(id);
  e.class_label = std::move(label);
  e.waypoints = {{0.0, pos}};
  e.extents = half;
  e.tags = tags;
  return e;
}

inline headsim::Entity walker(std::string id, headsim::Vec3 pos, headsim::Vec3 vel) {
  headsim::Entity e = box(std::move(id), pos, {0.25, 0.25, 0.9}, {headsim::Tag::Social}, "pedestrian");
  e.velocity = vel;
  e.is_agent = true;
  return e;
}

inline headsim::Scene empty_scene(std::string name = "unit") {
  headsim::Scene s;
  s.name = std::move(name);
  s.goal = {"reach the far end", {100.0, 0.0, 1.6}};
  return s;
}

/// Straight walk along +x at eye height.
inline headsim::BodyTrajectory straight(double length = 28.0, double speed = 1.4) {
  return headsim::BodyTrajectory::walk({{0, 0, 1.6}, {length, 0, 1.6}}, speed);
}

}  // namespace testutil
