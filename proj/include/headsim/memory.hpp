#pragma once

// Foundational memory: a bounded, time-ordered log of observations and
// action-reason pairs. Retention keeps the newest entries plus the entries
// scored most relevant to the scenario goal.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "headsim/world.hpp"

namespace headsim {

enum class Driver : std::uint8_t { Interest, InformationSeeking, Safety, SocialSchema, Habit };

inline constexpr std::array<Driver, 5> kAllDrivers{Driver::Interest, Driver::InformationSeeking, Driver::Safety,
                                                   Driver::SocialSchema, Driver::Habit};

constexpr std::string_view driver_name(Driver d) {
  switch (d) {
    case Driver::Interest: return "Interest";
    case Driver::InformationSeeking: return "InformationSeeking";
    case Driver::Safety: return "Safety";
    case Driver::SocialSchema: return "SocialSchema";
    case Driver::Habit: return "Habit";
  }
  return "?";
}

inline std::optional<Driver> parse_driver(std::string_view s) {
  for (Driver d : kAllDrivers) {
    if (driver_name(d) == s) return d;
  }
  return std::nullopt;
}

/// Enabled/disabled flag per motivational driver.
class DriverSet {
 public:
  constexpr DriverSet() = default;
  static constexpr DriverSet all() { return DriverSet(0x1f); }
  static constexpr DriverSet none() { return DriverSet(0); }

  constexpr bool enabled(Driver d) const { return (bits_ & bit(d)) != 0; }
  constexpr DriverSet without(Driver d) const { return DriverSet(bits_ & static_cast<std::uint8_t>(~bit(d))); }
  constexpr DriverSet with(Driver d) const { return DriverSet(bits_ | bit(d)); }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool operator==(const DriverSet&) const = default;

  std::vector<Driver> to_vector() const {
    std::vector<Driver> out;
    for (Driver d : kAllDrivers) {
      if (enabled(d)) out.push_back(d);
    }
    return out;
  }

 private:
  constexpr explicit DriverSet(std::uint8_t bits) : bits_(bits) {}
  static constexpr std::uint8_t bit(Driver d) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(d)); }
  std::uint8_t bits_{0x1f};
};

/// Where the head should point: an entity to look at, or an absolute orientation.
using ActionTarget = std::variant<std::string, UnitQuaternion>;

inline bool same_target(const ActionTarget& a, const ActionTarget& b) {
  if (a.index() != b.index()) return false;
  if (const auto* s = std::get_if<std::string>(&a)) return *s == std::get<std::string>(b);
  return std::get<UnitQuaternion>(a).bitwise_equal(std::get<UnitQuaternion>(b));
}

struct ActionReason {
  ActionTarget target;
  Driver driver{Driver::Habit};
  std::string rationale;
  double issued_at{0.0};

  const std::string* target_entity() const { return std::get_if<std::string>(&target); }
  const UnitQuaternion* target_orientation() const { return std::get_if<UnitQuaternion>(&target); }

  bool operator==(const ActionReason& o) const {
    return driver == o.driver && issued_at == o.issued_at && rationale == o.rationale && same_target(target, o.target);
  }
};

struct EntityDescription {
  std::string id;
  std::string text;
  bool operator==(const EntityDescription&) const = default;
};

struct MemoryEntry {
  double t{0.0};
  std::vector<EntitySnapshot> objects;
  std::vector<EntitySnapshot> agents;
  std::vector<EntityDescription> descriptions;
  std::optional<ActionReason> action;
  std::optional<double> relevance;
  bool executed{false};
  bool goal_in_view{false};
  bool relevance_fallback{false};
  std::uint64_t serial{0};  // insertion order, assigned by Fmm
};

/// Splits an entry's visible entities into objects and agents.
inline void assign_entities(MemoryEntry& entry, const std::vector<EntitySnapshot>& visible) {
  for (const auto& e : visible) (e.is_agent ? entry.agents : entry.objects).push_back(e);
}

class Fmm {
 public:
  explicit Fmm(std::size_t recent = 10, std::size_t relevant = 10) : recent_(recent), relevant_(relevant) {}

  std::size_t capacity() const { return recent_ + relevant_; }
  std::size_t recent_count() const { return recent_; }
  const std::vector<MemoryEntry>& entries() const { return entries_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  bool empty() const { return entries_.empty(); }
  const MemoryEntry& latest() const {
    if (entries_.empty()) throw ContractViolation("memory is empty");
    return entries_.back();
  }

  /// Appends an entry whose relevance is already set, then evicts the
  /// least relevant non-recent entry while over capacity. Ties keep the
  /// newer entry.
  void insert(MemoryEntry entry) {
    if (!entries_.empty() && entry.t < entries_.back().t) {
      throw ContractViolation("memory insert out of time order");
    }
    entry.serial = next_serial_++;
    entries_.push_back(std::move(entry));
    while (entries_.size() > capacity()) evict_one();
  }

  /// Records the action decided on from the newest entry.
  void attach_action(const ActionReason& action) {
    if (entries_.empty()) throw ContractViolation("memory is empty");
    entries_.back().action = action;
  }

  /// Flags the entry holding `action` as executed. Unknown actions are
  /// recorded as a warning and otherwise ignored.
  bool mark_executed(const ActionReason& action) {
    for (auto& e : entries_) {
      if (e.action && *e.action == action) {
        e.executed = true;
        return true;
      }
    }
    warnings_.push_back("mark_executed: no entry for action issued at " + std::to_string(action.issued_at));
    return false;
  }

  /// Actions recorded in memory, oldest first.
  std::vector<const ActionReason*> actions() const {
    std::vector<const ActionReason*> out;
    for (const auto& e : entries_) {
      if (e.action) out.push_back(&*e.action);
    }
    return out;
  }

 private:
  static bool less_relevant(const MemoryEntry& a, const MemoryEntry& b) {
    const double ra = a.relevance.value_or(0.0);
    const double rb = b.relevance.value_or(0.0);
    if (ra != rb) return ra < rb;
    if (a.t != b.t) return a.t < b.t;
    return a.serial < b.serial;
  }

  void evict_one() {
    const auto older_end = entries_.end() - static_cast<std::ptrdiff_t>(recent_);
    auto victim = std::min_element(entries_.begin(), older_end, less_relevant);
    entries_.erase(victim);
  }

  std::size_t recent_;
  std::size_t relevant_;
  std::vector<MemoryEntry> entries_;
  std::vector<std::string> warnings_;
  std::uint64_t next_serial_{0};
};

/// Scores how relevant a memory entry is to the scenario goal. Remote
/// implementations may throw BackendError.
class RelevanceScorer {
 public:
  virtual ~RelevanceScorer() = default;
  virtual double score(const MemoryEntry& entry, std::string_view goal) const = 0;
};

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/// Goal-token hits in entity labels and tag names, plus two points per
/// goal_relevant entity.
class TokenOverlapScorer final : public RelevanceScorer {
 public:
  double score(const MemoryEntry& entry, std::string_view goal) const override {
    const auto goal_tokens = tokenize(goal);
    const std::set<std::string> unique(goal_tokens.begin(), goal_tokens.end());
    double total = 0.0;
    auto visit = [&](const EntitySnapshot& e) {
      const auto label_tokens = tokenize(e.class_label);
      std::set<std::string> vocab(label_tokens.begin(), label_tokens.end());
      for (Tag t : e.tags.to_vector()) vocab.insert(std::string(tag_name(t)));
      for (const auto& g : unique) {
        if (vocab.count(g)) total += 1.0;
      }
      if (e.tags.contains(Tag::GoalRelevant)) total += 2.0;
    };
    for (const auto& e : entry.objects) visit(e);
    for (const auto& e : entry.agents) visit(e);
    return total;
  }
};

struct RelevanceResult {
  double score{0.0};
  bool fallback{false};
};

/// Scores with `scorer`, falling back to token overlap if it fails.
inline RelevanceResult tag_relevance(const MemoryEntry& entry, std::string_view goal, const RelevanceScorer& scorer) {
  if (goal.empty()) throw ContractViolation("relevance needs a non-empty goal");
  try {
    const double s = scorer.score(entry, goal);
    if (!(s >= 0.0)) throw BackendError("relevance score is negative or NaN");
    return {s, false};
  } catch (const BackendError&) {
    return {TokenOverlapScorer{}.score(entry, goal), true};
  }
}

/// Scores `entry` against the goal and inserts it.
inline void insert(Fmm& fmm, MemoryEntry entry, std::string_view goal, const RelevanceScorer& scorer) {
  const RelevanceResult r = tag_relevance(entry, goal, scorer);
  entry.relevance = r.score;
  entry.relevance_fallback = r.fallback;
  fmm.insert(std::move(entry));
}

/// Logs that `substitute` ran in place of `original` at time t: the
/// original stays unexecuted and the substitute is appended as executed.
inline void record_substitution(Fmm& fmm, const ActionReason& original, const ActionReason& substitute, double t,
                                std::string_view goal, const RelevanceScorer& scorer) {
  bool found = false;
  for (const auto& e : fmm.entries()) {
    if (e.action && *e.action == original) found = true;
  }
  if (!found) {
    MemoryEntry orig;
    orig.t = t;
    orig.action = original;
    insert(fmm, std::move(orig), goal, scorer);
  }
  MemoryEntry sub;
  sub.t = t;
  sub.action = substitute;
  sub.executed = true;
  insert(fmm, std::move(sub), goal, scorer);
}

}  // namespace headsim
