#include <random>

#include <gtest/gtest.h>

#include "headsim/geom.hpp"
#include "oracles.hpp"

using namespace headsim;

namespace {

UnitQuaternion random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  return UnitQuaternion::normalized(g(rng), g(rng), g(rng), g(rng));
}

}  // namespace

TEST(Quaternion, NormalizedRejectsZero) {
  EXPECT_THROW(UnitQuaternion::normalized(0, 0, 0, 0), ContractViolation);
  EXPECT_THROW(UnitQuaternion::normalized(std::nan(""), 0, 0, 0), ContractViolation);
}

TEST(Quaternion, CheckedRequiresUnitNorm) {
  EXPECT_NO_THROW(UnitQuaternion::checked(1.0, 0, 0, 5e-7));
  EXPECT_THROW(UnitQuaternion::checked(1.1, 0, 0, 0), ContractViolation);
}

TEST(Quaternion, YawRoundTrip) {
  for (double yaw : {-3.0, -1.0, 0.0, 0.4, 2.9}) {
    EXPECT_NEAR(UnitQuaternion::from_yaw(yaw).yaw(), yaw, 1e-12);
  }
}

TEST(Quaternion, LookingAlongPointsForward) {
  const Vec3 dir{3.0, -2.0, 1.0};
  const Vec3 f = UnitQuaternion::looking_along(dir).forward();
  const Vec3 u = dir * (1.0 / dir.norm());
  EXPECT_NEAR(f.x, u.x, 1e-12);
  EXPECT_NEAR(f.y, u.y, 1e-12);
  EXPECT_NEAR(f.z, u.z, 1e-12);
}

TEST(Quaternion, ProductComposesRotations) {
  const auto a = UnitQuaternion::from_yaw(0.3), b = UnitQuaternion::from_yaw(0.5);
  EXPECT_NEAR((a * b).yaw(), 0.8, 1e-12);
}

TEST(AngularDistance, MatchesRotationMatrixOracle) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    const auto a = random_rotation(rng), b = random_rotation(rng);
    EXPECT_NEAR(angular_distance(a, b), oracle::rotation_angle(a, b), 1e-9);
  }
}

TEST(AngularDistance, SymmetricBoundedAndDoubleCover) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 2000; ++i) {
    const auto a = random_rotation(rng), b = random_rotation(rng);
    const double d = angular_distance(a, b);
    EXPECT_NEAR(d, angular_distance(b, a), 1e-12);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, kPi + 1e-12);
    EXPECT_NEAR(angular_distance(a.negated(), b), d, 1e-12);
    EXPECT_NEAR(angular_distance(a, a.negated()), 0.0, 1e-9);
  }
}

TEST(AngularDistance, YawAnglesAreExact) {
  for (double th : {0.0, kPi / 4, kPi / 2, kPi}) {
    EXPECT_NEAR(angular_distance(UnitQuaternion::identity(), UnitQuaternion::from_yaw(th)), th, 1e-9);
  }
}

TEST(Slerp, EndpointsAndMidpoint) {
  const auto a = UnitQuaternion::from_yaw(0.2), b = UnitQuaternion::from_yaw(1.4);
  EXPECT_TRUE(same_rotation(slerp(a, b, 0.0), a));
  EXPECT_TRUE(same_rotation(slerp(a, b, 1.0), b));
  EXPECT_NEAR(slerp(a, b, 0.5).yaw(), 0.8, 1e-12);
  EXPECT_THROW(slerp(a, b, 1.5), ContractViolation);
}

TEST(Slerp, TakesShortArcAcrossDoubleCover) {
  const auto a = UnitQuaternion::from_yaw(0.1);
  const auto b = UnitQuaternion::from_yaw(0.5).negated();
  EXPECT_NEAR(slerp(a, b, 0.5).yaw(), 0.3, 1e-12);
}

TEST(StepToward, ConstantRateUntilArrival) {
  const AngularRate rate(36.0);
  auto q = UnitQuaternion::identity();
  const auto target = UnitQuaternion::from_yaw(deg_to_rad(20.0));
  q = step_toward(q, target, rate, 0.2);
  EXPECT_NEAR(rad_to_deg(q.yaw()), 7.2, 1e-9);
  q = step_toward(q, target, rate, 0.2);
  q = step_toward(q, target, rate, 0.2);
  EXPECT_TRUE(q.bitwise_equal(target));
  EXPECT_THROW(step_toward(q, target, rate, -0.1), ContractViolation);
}

TEST(AngularRate, RejectsNonPositive) {
  EXPECT_THROW(AngularRate(0.0), ContractViolation);
  EXPECT_THROW(AngularRate(-1.0), ContractViolation);
}

TEST(WrapAngle, HalfOpenRange) {
  EXPECT_NEAR(wrap_angle(-kPi), kPi, 1e-12);
  EXPECT_NEAR(wrap_angle(3 * kPi / 2), -kPi / 2, 1e-12);
  EXPECT_NEAR(wrap_angle(0.5), 0.5, 1e-15);
}
