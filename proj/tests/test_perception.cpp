#include <random>

#include <gtest/gtest.h>

#include "headsim/perception.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace headsim;

namespace {

Raster random_raster(std::mt19937_64& rng, int w = 32, int h = 24) {
  Raster r(w, h);
  std::uniform_int_distribution<int> d(0, 255);
  for (auto& c : r.cells) c = static_cast<std::uint8_t>(d(rng));
  return r;
}

Raster blocky(std::mt19937_64& rng, int w = 32, int h = 32) {
  Raster r(w, h);
  std::uniform_int_distribution<int> d(0, 255);
  for (int by = 0; by < h; by += 8)
    for (int bx = 0; bx < w; bx += 8) {
      const auto v = static_cast<std::uint8_t>(d(rng));
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) r.at(by + i, bx + j) = v;
    }
  return r;
}

/// Copy of `a` whose cells are replaced by noise with probability p.
Raster corrupt(const Raster& a, double p, std::mt19937_64& rng) {
  Raster b = a;
  std::bernoulli_distribution flip(p);
  std::uniform_int_distribution<int> d(0, 255);
  for (auto& c : b.cells)
    if (flip(rng)) c = static_cast<std::uint8_t>(d(rng));
  return b;
}

}  // namespace

TEST(Ssim, MatchesNaiveOracle) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 40; ++i) {
    const Raster a = random_raster(rng);
    const Raster b = i % 2 ? random_raster(rng) : corrupt(a, 0.3, rng);
    EXPECT_NEAR(ssim(a, b), oracle::naive_ssim(a, b), 1e-9);
  }
}

TEST(Ssim, IdenticalIsOneAndSymmetric) {
  std::mt19937_64 rng(6);
  const Raster a = random_raster(rng), b = random_raster(rng);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  EXPECT_NEAR(ssim(Raster(16, 16), Raster(16, 16)), 1.0, 1e-12);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
  EXPECT_LE(ssim(a, b), 1.0);
}

TEST(Ssim, RejectsMismatchedOrTinyRasters) {
  EXPECT_THROW(ssim(Raster(16, 16), Raster(16, 17)), ContractViolation);
  EXPECT_THROW(ssim(Raster(4, 4), Raster(4, 4)), ContractViolation);
}

TEST(NoveltyGate, FirstFrameIsNovelAndIdenticalNeverIs) {
  std::mt19937_64 rng(7);
  NoveltyState st;
  const Raster a = random_raster(rng);
  EXPECT_TRUE(novelty_gate(st, a));
  for (int i = 0; i < 20; ++i) EXPECT_FALSE(novelty_gate(st, a));
}

TEST(NoveltyGate, StrictlyBelowThresholdTriggers) {
  std::mt19937_64 rng(8);
  const Raster a = blocky(rng);
  const Raster b = corrupt(a, 0.5, rng);
  const double score = 100.0 * ssim(a, b);
  NoveltyState st;
  st.last_novel = a;
  // Threshold equal to the score: not strictly below, so no trigger.
  EXPECT_FALSE(NoveltyGate{score}(st, b));
  EXPECT_TRUE(NoveltyGate{score + 1e-9}(st, b));
  EXPECT_EQ(*st.last_novel, b);
}

TEST(NoveltyGate, ReferenceUpdatesOnlyOnNovelFrames) {
  std::mt19937_64 rng(9);
  const Raster a = blocky(rng);
  const Raster near = corrupt(a, 0.02, rng);
  NoveltyState st;
  ASSERT_TRUE(novelty_gate(st, a));
  ASSERT_FALSE(novelty_gate(st, near));
  EXPECT_EQ(*st.last_novel, a);
}

TEST(NoveltyState, PauseAndResumeSchedule) {
  NoveltyState st;
  EXPECT_TRUE(st.active_at(0.0));
  st.pause();
  EXPECT_FALSE(st.active_at(10.0));
  st.resume_at(12.0);
  EXPECT_FALSE(st.active_at(11.8));
  EXPECT_TRUE(st.active_at(12.0));
  EXPECT_TRUE(st.active_at(12.2));
}

TEST(Capture, ReturnsObservationOnlyWhenNovelAndActive) {
  Scene s = testutil::empty_scene();
  s.entities = {testutil::box("b", {5, 0, 1.6}, {0.5, 1, 1}, {Tag::Novel}, "statue")};
  const auto traj = testutil::straight();
  NoveltyState st;
  const Pose p = traj.pose_at(0.0);
  auto obs = capture(st, 0.0, s, p, p.heading, FovParams{});
  ASSERT_TRUE(obs);
  ASSERT_EQ(obs->entities.size(), 1u);
  EXPECT_EQ(obs->entities[0].id, "b");
  EXPECT_FALSE(capture(st, 0.2, s, p, p.heading, FovParams{}));
  st.pause();
  EXPECT_FALSE(capture(st, 0.4, s, p, UnitQuaternion::from_yaw(kPi), FovParams{}));
}
