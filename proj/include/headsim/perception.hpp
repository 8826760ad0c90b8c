#pragma once

// Perception: fixed-cadence capture, SSIM, and the novelty gate that decides
// which views are passed on to planning.

#include <optional>
#include <vector>

#include "headsim/world.hpp"

namespace headsim {

struct SsimParams {
  int window{8};
  double dynamic_range{255.0};
};

/// Mean SSIM over every `window`x`window` block (stride 1, uniform weights).
/// Stabilizers are C1 = (0.01 L)^2 and C2 = (0.03 L)^2 with L the dynamic range.
inline double ssim(const Raster& a, const Raster& b, const SsimParams& p = {}) {
  if (a.width != b.width || a.height != b.height) throw ContractViolation("ssim: raster dimensions differ");
  if (a.width < p.window || a.height < p.window) throw ContractViolation("ssim: raster smaller than window");
  const double c1 = (0.01 * p.dynamic_range) * (0.01 * p.dynamic_range);
  const double c2 = (0.03 * p.dynamic_range) * (0.03 * p.dynamic_range);
  const int w = p.window;
  const double n = static_cast<double>(w) * w;

  // Summed-area tables of a, b, a^2, b^2 and ab.
  const int W = a.width + 1;
  const int H = a.height + 1;
  std::vector<double> sa(static_cast<std::size_t>(W) * H, 0.0), sb(sa), saa(sa), sbb(sa), sab(sa);
  auto idx = [W](int r, int c) { return static_cast<std::size_t>(r) * W + c; };
  for (int r = 0; r < a.height; ++r) {
    for (int c = 0; c < a.width; ++c) {
      const double x = a.at(r, c);
      const double y = b.at(r, c);
      const auto i = idx(r + 1, c + 1);
      const auto up = idx(r, c + 1), left = idx(r + 1, c), diag = idx(r, c);
      sa[i] = x + sa[up] + sa[left] - sa[diag];
      sb[i] = y + sb[up] + sb[left] - sb[diag];
      saa[i] = x * x + saa[up] + saa[left] - saa[diag];
      sbb[i] = y * y + sbb[up] + sbb[left] - sbb[diag];
      sab[i] = x * y + sab[up] + sab[left] - sab[diag];
    }
  }
  auto box = [&](const std::vector<double>& s, int r, int c) {
    return s[idx(r + w, c + w)] - s[idx(r, c + w)] - s[idx(r + w, c)] + s[idx(r, c)];
  };

  double total = 0.0;
  int count = 0;
  for (int r = 0; r + w <= a.height; ++r) {
    for (int c = 0; c + w <= a.width; ++c) {
      const double mx = box(sa, r, c) / n;
      const double my = box(sb, r, c) / n;
      // Integer-valued sums are exact in double, so these cannot go negative.
      const double vx = box(saa, r, c) / n - mx * mx;
      const double vy = box(sbb, r, c) / n - my * my;
      const double cxy = box(sab, r, c) / n - mx * my;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / count;
}

struct Observation {
  double t{0.0};
  Raster raster;
  std::vector<EntitySnapshot> entities;
  UnitQuaternion head;
  Pose body;
};

/// Gate memory plus the pause/resume schedule driven by the head controller.
struct NoveltyState {
  std::optional<Raster> last_novel;
  bool paused{false};
  std::optional<double> resume_time;

  /// Pause with no resume time yet (head turning).
  void pause() {
    paused = true;
    resume_time.reset();
  }

  /// Stay paused until the first capture at or after `t`.
  void resume_at(double t) {
    paused = true;
    resume_time = t;
  }

  /// Clears the pause if `clock` has reached the resume time. Returns
  /// whether capture is allowed at `clock`.
  bool active_at(double clock) {
    if (!paused) return true;
    if (resume_time && clock >= *resume_time - 1e-9) {
      paused = false;
      resume_time.reset();
      return true;
    }
    return false;
  }
};

/// SSIM on the 0..100 scale; novel when strictly below the threshold.
struct NoveltyGate {
  double threshold{60.0};
  SsimParams ssim_params{};

  /// Updates the stored reference only on a novel frame.
  bool operator()(NoveltyState& state, const Raster& current) const {
    if (!state.last_novel) {
      state.last_novel = current;
      return true;
    }
    const double score = 100.0 * ssim(*state.last_novel, current, ssim_params);
    if (score < threshold) {
      state.last_novel = current;
      return true;
    }
    return false;
  }
};

inline bool novelty_gate(NoveltyState& state, const Raster& current, double threshold = 60.0) {
  return NoveltyGate{threshold}(state, current);
}

/// One capture attempt. Returns an Observation only when capture is active
/// and the rendered view passes the novelty gate.
inline std::optional<Observation> capture(NoveltyState& state, double clock, const Scene& scene, const Pose& body,
                                          const UnitQuaternion& head, const FovParams& fov,
                                          const NoveltyGate& gate = {}) {
  if (!state.active_at(clock)) return std::nullopt;
  Raster raster = render_semantic_raster(scene, body.position, head, fov, clock);
  if (!gate(state, raster)) return std::nullopt;
  Observation obs;
  obs.t = clock;
  obs.raster = std::move(raster);
  obs.entities = visible_entities(scene, body.position, head, fov, clock);
  obs.head = head;
  obs.body = body;
  return obs;
}

}  // namespace headsim
