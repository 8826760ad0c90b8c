#pragma once

// Evaluation harness: quaternion DTW, split-half human baseline, t-based
// confidence intervals, and the responsiveness/ablation runners.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "headsim/engine.hpp"

namespace headsim {

struct HeadTrace {
  std::string agent;
  std::string scenario;
  Condition condition{Condition::External};
  double tick{0.2};
  std::vector<UnitQuaternion> samples;

  void validate() const {
    if (samples.size() < 2) throw ContractViolation("head trace needs at least 2 samples");
  }
};

inline HeadTrace to_head_trace(const ExecutedTrace& tr, std::string agent, std::string scenario, Condition c) {
  HeadTrace h;
  h.agent = std::move(agent);
  h.scenario = std::move(scenario);
  h.condition = c;
  h.samples = tr.orientations();
  return h;
}

struct DtwResult {
  double total_cost{0.0};
  double normalized_cost{0.0};
  std::vector<std::pair<std::size_t, std::size_t>> alignment_path;
};

inline DtwResult dtw(const std::vector<UnitQuaternion>& a, const std::vector<UnitQuaternion>& b) {
  if (a.empty() || b.empty()) throw ContractViolation("dtw: empty trace");
  const std::size_t n = a.size(), m = b.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> acc(n * m, inf);
  auto at = [m](std::size_t i, std::size_t j) { return i * m + j; };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double c = angular_distance(a[i], b[j]);
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else {
        best = inf;
        if (i > 0) best = std::min(best, acc[at(i - 1, j)]);
        if (j > 0) best = std::min(best, acc[at(i, j - 1)]);
        if (i > 0 && j > 0) best = std::min(best, acc[at(i - 1, j - 1)]);
      }
      acc[at(i, j)] = best + c;
    }
  }

  DtwResult r;
  r.total_cost = acc[at(n - 1, m - 1)];
  r.normalized_cost = r.total_cost / (static_cast<double>(n + m) / 2.0);

  // Backtrack; prefer the diagonal on ties so the path is deterministic.
  std::size_t i = n - 1, j = m - 1;
  r.alignment_path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      const double d = acc[at(i - 1, j - 1)], up = acc[at(i - 1, j)], left = acc[at(i, j - 1)];
      if (d <= up && d <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    }
    r.alignment_path.emplace_back(i, j);
  }
  std::reverse(r.alignment_path.begin(), r.alignment_path.end());
  return r;
}

inline DtwResult dtw(const HeadTrace& a, const HeadTrace& b) { return dtw(a.samples, b.samples); }

/// Mean normalized DTW of `candidate` against every reference.
inline double mean_dtw(const std::vector<UnitQuaternion>& candidate, const std::vector<HeadTrace>& refs) {
  if (refs.empty()) throw ContractViolation("mean_dtw: no references");
  double sum = 0.0;
  for (const auto& r : refs) sum += dtw(candidate, r.samples).normalized_cost;
  return sum / static_cast<double>(refs.size());
}

/// Resamples timestamped orientations onto a uniform grid starting at the
/// first timestamp, using slerp between bracketing samples.
inline std::vector<UnitQuaternion> resample(const std::vector<double>& times, const std::vector<UnitQuaternion>& qs,
                                            double dt) {
  if (times.size() != qs.size() || times.empty()) throw ContractViolation("resample: mismatched or empty series");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw ContractViolation("resample: timestamps must increase");
  }
  const double t0 = times.front();
  const auto count = static_cast<std::size_t>(std::floor((times.back() - t0) / dt + 1e-9)) + 1;
  std::vector<UnitQuaternion> out;
  out.reserve(count);
  std::size_t seg = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const double t = t0 + static_cast<double>(k) * dt;
    while (seg + 1 < times.size() - 1 && times[seg + 1] <= t) ++seg;
    if (times.size() == 1) {
      out.push_back(qs.front());
      continue;
    }
    const double u = std::clamp((t - times[seg]) / (times[seg + 1] - times[seg]), 0.0, 1.0);
    out.push_back(slerp(qs[seg], qs[seg + 1], u));
  }
  return out;
}

struct Interval {
  double mean{0.0};
  double half_width{0.0};
  std::size_t n{0};
};

inline Interval confidence_interval_95(const std::vector<double>& values) {
  if (values.size() < 2) throw ContractViolation("confidence interval needs at least 2 values");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  const double q = boost::math::quantile(dist, 0.975);
  return {mean, q * sd / std::sqrt(n), values.size()};
}

struct IntraHumanResult {
  std::string scenario;
  double mean{0.0};
  double ci95{0.0};
  std::size_t repeats{0};
  bool dropped_odd{false};
};

/// Split-half baseline per scenario: each repeat shuffles the group, splits
/// it in two, and averages DTW over all cross-half pairs.
inline std::vector<IntraHumanResult> intra_human(const std::map<std::string, std::vector<HeadTrace>>& groups,
                                                 std::size_t repeats, std::mt19937_64& rng) {
  std::vector<IntraHumanResult> out;
  for (const auto& [scenario, traces] : groups) {
    if (traces.size() < 2) throw ContractViolation("intra_human: scenario '" + scenario + "' has fewer than 2 traces");
    IntraHumanResult r;
    r.scenario = scenario;
    r.repeats = repeats;
    std::vector<double> per_repeat;
    for (std::size_t rep = 0; rep < repeats; ++rep) {
      std::vector<std::size_t> idx(traces.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::shuffle(idx.begin(), idx.end(), rng);
      if (idx.size() % 2 == 1) {
        idx.pop_back();  // the shuffle makes the dropped trace uniform
        r.dropped_odd = true;
      }
      const std::size_t half = idx.size() / 2;
      double sum = 0.0;
      for (std::size_t i = 0; i < half; ++i) {
        for (std::size_t j = half; j < idx.size(); ++j) sum += dtw(traces[idx[i]], traces[idx[j]]).normalized_cost;
      }
      per_repeat.push_back(sum / static_cast<double>(half * half));
    }
    if (per_repeat.size() >= 2) {
      const Interval ci = confidence_interval_95(per_repeat);
      r.mean = ci.mean;
      r.ci95 = ci.half_width;
    } else if (!per_repeat.empty()) {
      r.mean = per_repeat.front();
    }
    out.push_back(r);
  }
  return out;
}

struct TableRow {
  std::string scenario;
  std::string method;
  std::string condition;
  double mean{0.0};
  double ci95{0.0};
  std::size_t n{0};
  std::string seeds;
};

inline std::string seed_list(const std::vector<std::uint64_t>& seeds) {
  std::string s;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(seeds[i]);
  }
  return s;
}

inline TableRow summarize(std::string scenario, std::string method, std::string condition,
                          const std::vector<double>& scores, const std::vector<std::uint64_t>& seeds) {
  TableRow row{std::move(scenario), std::move(method), std::move(condition), 0.0, 0.0, scores.size(), seed_list(seeds)};
  if (scores.size() >= 2) {
    const Interval ci = confidence_interval_95(scores);
    row.mean = ci.mean;
    row.ci95 = ci.half_width;
  } else if (scores.size() == 1) {
    row.mean = scores.front();
  }
  return row;
}

/// Runs one pipeline per seed, optionally concurrently. Results are in seed order.
inline std::vector<PipelineResult> run_seeds(const Scene& planning, const Scene& live, const BodyTrajectory& traj,
                                             const EngineConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                             const Backends& backends = {}, bool parallel = true) {
  std::vector<PipelineResult> out(seeds.size());
  auto one = [&](std::size_t i) {
    EngineConfig c = cfg;
    c.seed = seeds[i];
    out[i] = run_pipeline(planning, live, traj, c, backends);
  };
  // Remote backends are not assumed to be thread-safe.
  const bool remote = backends.describe || backends.plan || backends.validate || backends.relevance;
  if (parallel && !remote && seeds.size() > 1) {
    std::vector<std::future<void>> jobs;
    for (std::size_t i = 0; i < seeds.size(); ++i) jobs.push_back(std::async(std::launch::async, one, i));
    for (auto& j : jobs) j.get();
  } else {
    for (std::size_t i = 0; i < seeds.size(); ++i) one(i);
  }
  return out;
}

/// A matched pair of scene variants sharing one trajectory.
struct ScenarioCase {
  std::string name;
  Scene mdc;
  Scene apc;
  BodyTrajectory trajectory;
};

/// Every MDC entity must reappear in the APC variant with the same motion
/// and extents; APC may add entities.
inline void check_same_layout(const Scene& mdc, const Scene& apc) {
  mdc.for_each_entity([&](const Entity& e) {
    const Entity* o = apc.find(e.id);
    if (!o) throw ContractViolation("layout mismatch: '" + e.id + "' missing from APC scene");
    bool same = o->waypoints.size() == e.waypoints.size() && o->extents.x == e.extents.x &&
                o->extents.y == e.extents.y && o->extents.z == e.extents.z;
    for (std::size_t i = 0; same && i < e.waypoints.size(); ++i) {
      const auto &a = e.waypoints[i], &b = o->waypoints[i];
      same = a.t == b.t && a.position.x == b.position.x && a.position.y == b.position.y && a.position.z == b.position.z;
    }
    if (!same) throw ContractViolation("layout mismatch: '" + e.id + "' differs between MDC and APC");
  });
}

struct ResponsivenessResult {
  std::vector<TableRow> rows;  // MDC-MDC, MDC-APC, APC-APC
  std::map<std::string, std::vector<PipelineResult>> runs;
  std::vector<double> mdc_mdc, mdc_apc, apc_apc;  // per-seed scores
};

/// Three-condition protocol. With no references supplied, the APC-APC
/// outputs themselves serve as the reference set.
inline ResponsivenessResult responsiveness_matrix(const ScenarioCase& sc, const std::vector<HeadTrace>& references,
                                                  const EngineConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                                  const Backends& backends = {}) {
  check_same_layout(sc.mdc, sc.apc);
  ResponsivenessResult res;
  res.runs["MDC-MDC"] = run_seeds(sc.mdc, sc.mdc, sc.trajectory, cfg, seeds, backends);
  res.runs["MDC-APC"] = run_seeds(sc.mdc, sc.apc, sc.trajectory, cfg, seeds, backends);
  res.runs["APC-APC"] = run_seeds(sc.apc, sc.apc, sc.trajectory, cfg, seeds, backends);

  std::vector<HeadTrace> refs = references;
  if (refs.empty()) {
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      refs.push_back(to_head_trace(res.runs["APC-APC"][i].trace, "seed" + std::to_string(seeds[i]), sc.name,
                                   Condition::APC));
    }
  }
  auto score = [&](const std::string& key, std::vector<double>& dst) {
    for (const auto& r : res.runs[key]) dst.push_back(mean_dtw(r.trace.orientations(), refs));
    res.rows.push_back(summarize(sc.name, "pipeline", key, dst, seeds));
  };
  score("MDC-MDC", res.mdc_mdc);
  score("MDC-APC", res.mdc_apc);
  score("APC-APC", res.apc_apc);
  return res;
}

struct Toggle {
  std::string key;
  std::string label;
  std::optional<Driver> masked;
  bool no_drivers{false};
  bool no_llm{false};
  bool no_res{false};

  EngineConfig apply(EngineConfig cfg) const {
    if (no_drivers) cfg.drivers = DriverSet::none();
    if (masked) cfg.drivers = cfg.drivers.without(*masked);
    if (no_llm) cfg.use_llm = false;
    if (no_res) cfg.use_res = false;
    return cfg;
  }
};

inline const std::vector<Toggle>& ablation_toggles() {
  static const std::vector<Toggle> toggles{
      {"full", "Full model", std::nullopt, false, false, false},
      {"no-drivers", "w/o all drivers", std::nullopt, true, false, false},
      {"no-interest", "w/o Interest driver", Driver::Interest, false, false, false},
      {"no-information-seeking", "w/o Information Seeking driver", Driver::InformationSeeking, false, false, false},
      {"no-safety", "w/o Safety driver", Driver::Safety, false, false, false},
      {"no-social-schema", "w/o Social Schema driver", Driver::SocialSchema, false, false, false},
      {"no-habit", "w/o Habit driver", Driver::Habit, false, false, false},
      {"no-llm", "w/o LLM", std::nullopt, false, true, false},
      {"no-res", "w/o RES", std::nullopt, false, false, true},
  };
  return toggles;
}

inline const Toggle& find_toggle(std::string_view key) {
  for (const auto& t : ablation_toggles()) {
    if (t.key == key) return t;
  }
  throw SchemaError("toggle", "unknown ablation toggle '" + std::string(key) + "'");
}

/// A single scene executed as planned (the scene is both planning and live input).
struct AblationCase {
  std::string name;
  Scene planning;
  Scene live;
  BodyTrajectory trajectory;
};

struct AblationResult {
  std::vector<TableRow> rows;
  std::map<std::string, std::map<std::string, std::vector<PipelineResult>>> runs;  // scenario -> toggle -> seeds
  std::map<std::string, std::map<std::string, std::vector<double>>> scores;
};

/// One row per toggle per scenario. With no references supplied for a
/// scenario, the full model's runs serve as its reference set.
inline AblationResult ablation_suite(const std::vector<AblationCase>& cases, const std::vector<Toggle>& toggles,
                                     const EngineConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                     const std::map<std::string, std::vector<HeadTrace>>& references = {},
                                     const Backends& backends = {}) {
  AblationResult res;
  for (const auto& c : cases) {
    std::vector<HeadTrace> refs;
    if (auto it = references.find(c.name); it != references.end()) refs = it->second;
    if (refs.empty()) {
      const auto full = run_seeds(c.planning, c.live, c.trajectory, cfg, seeds, backends);
      for (std::size_t i = 0; i < seeds.size(); ++i) {
        refs.push_back(to_head_trace(full[i].trace, "seed" + std::to_string(seeds[i]), c.name, c.live.condition));
      }
    }
    for (const auto& tg : toggles) {
      auto runs = run_seeds(c.planning, c.live, c.trajectory, tg.apply(cfg), seeds, backends);
      auto& sc = res.scores[c.name][tg.key];
      for (const auto& r : runs) sc.push_back(mean_dtw(r.trace.orientations(), refs));
      res.rows.push_back(summarize(c.name, tg.label, std::string(condition_name(c.live.condition)), sc, seeds));
      res.runs[c.name][tg.key] = std::move(runs);
    }
  }
  return res;
}

/// Drivers appearing anywhere in a run's plan or execution log.
inline std::set<Driver> drivers_in_logs(const PipelineResult& r) {
  std::set<Driver> out;
  for (const auto& a : r.plan.actions) out.insert(a.action.driver);
  for (const auto& e : r.trace.log) {
    out.insert(e.action.driver);
    if (e.replacement) out.insert(e.replacement->driver);
  }
  return out;
}

inline void write_table_csv(std::ostream& os, const std::vector<TableRow>& rows) {
  os << "scenario,method,condition,mean,ci95,n,seed\n";
  char buf[64];
  for (const auto& r : rows) {
    os << r.scenario << ',' << r.method << ',' << r.condition << ',';
    std::snprintf(buf, sizeof buf, "%.6f,%.6f", r.mean, r.ci95);
    os << buf << ',' << r.n << ',' << r.seeds << '\n';
  }
}

/// Horizontal bar chart of row means with CI whiskers.
inline void write_table_svg(std::ostream& os, const std::vector<TableRow>& rows, const std::string& title) {
  const double row_h = 24, label_w = 320, plot_w = 420, top = 40;
  double max_v = 1e-9;
  for (const auto& r : rows) max_v = std::max(max_v, r.mean + r.ci95);
  const double height = top + row_h * static_cast<double>(rows.size()) + 20;
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" font-family=\"sans-serif\" "
                "font-size=\"12\">\n",
                label_w + plot_w + 80, height);
  os << buf;
  os << "<text x=\"10\" y=\"20\" font-size=\"14\">" << title << "</text>\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const double y = top + row_h * static_cast<double>(i);
    const double w = plot_w * r.mean / max_v;
    const double lo = label_w + plot_w * std::max(0.0, r.mean - r.ci95) / max_v;
    const double hi = label_w + plot_w * (r.mean + r.ci95) / max_v;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"10\" y=\"%.1f\">%s / %s / %s</text>\n"
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"#5b8db8\"/>\n"
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n"
                  "<text x=\"%.1f\" y=\"%.1f\">%.3f</text>\n",
                  y + 15, r.scenario.c_str(), r.method.c_str(), r.condition.c_str(), label_w, y + 4, w, row_h - 8, lo,
                  y + row_h / 2, hi, y + row_h / 2, hi + 6, y + 15, r.mean);
    os << buf;
  }
  os << "</svg>\n";
}

}  // namespace headsim
