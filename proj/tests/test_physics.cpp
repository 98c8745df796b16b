#include <gtest/gtest.h>

#include <cmath>

#include "acoustwin/physics.hpp"

namespace acoustwin {
namespace {

TEST(Thorp, ZeroFrequencyLeavesConstantTerm) { EXPECT_DOUBLE_EQ(thorp_alpha(0.0), 0.003); }

TEST(Thorp, OneKilohertz) {
  // 0.11/2 + 44/4101 + 2.75e-4 + 0.003
  EXPECT_NEAR(thorp_alpha(1.0), 0.0690041, 1e-6);
}

TEST(Thorp, EightKilohertz) {
  // 0.11*64/65 + 44*64/4164 + 2.75e-4*64 + 0.003, evaluated by hand.
  EXPECT_NEAR(thorp_alpha(8.0), 0.8051805, 1e-6);
}

TEST(Thorp, StrictlyIncreasing) {
  double prev = thorp_alpha(1e-4);
  for (double f = 2e-4; f < 100.0; f *= 1.01) {
    const double cur = thorp_alpha(f);
    ASSERT_GT(cur, prev) << "f=" << f;
    prev = cur;
  }
}

TEST(Spreading, Values) {
  EXPECT_DOUBLE_EQ(spreading_db(1.0, 20.0), 0.0);
  EXPECT_NEAR(spreading_db(1000.0, 20.0), 60.0, 1e-12);
  EXPECT_NEAR(spreading_db(1000.0, 10.0), 30.0, 1e-12);
}

TEST(PhysicsMean, Examples) {
  const PhysicsMeanParams p;
  EXPECT_NEAR(physics_mean_tl(1.0, 1.0, p), thorp_alpha(1.0) / 1000.0, 1e-15);
  EXPECT_NEAR(physics_mean_tl(1000.0, 1.0, p), 60.0690, 1e-4);
  EXPECT_NEAR(physics_mean_tl(100000.0, 1.0, p), 106.900, 1e-3);
}

TEST(PhysicsMean, IncreasingInRange) {
  const PhysicsMeanParams p{17.0, 0.7};
  for (double f : {0.0125, 0.4, 8.0}) {
    double prev = physics_mean_tl(1.0, f, p);
    for (double r = 1.5; r < 2e5; r *= 1.05) {
      const double cur = physics_mean_tl(r, f, p);
      ASSERT_GT(cur, prev);
      prev = cur;
    }
  }
}

TEST(Jomopans, ResonancePoint) {
  const double f = 480.0 / 13.9;
  // 191 - 30.7634 - 9.5424 + 0 + 0 + 9.0186
  EXPECT_NEAR(jomopans_echo_sl(f, 13.9, 100.0), 159.713, 0.01);
}

TEST(Jomopans, SpeedDoublingAdds60Log2) {
  for (double f : {12.5, 400.0, 8000.0}) {
    for (double v : {1.0, 7.3, 15.0}) {
      EXPECT_NEAR(jomopans_echo_sl(f, 2 * v, 200.0) - jomopans_echo_sl(f, v, 200.0),
                  60.0 * std::log10(2.0), 1e-10);
    }
  }
  EXPECT_NEAR(60.0 * std::log10(2.0), 18.062, 1e-3);
}

TEST(Jomopans, ReferenceLengthTermVanishes) {
  // Only the length term differs between L and l_0.
  EXPECT_NEAR(jomopans_echo_sl(400, 10, 200) - jomopans_echo_sl(400, 10, 100),
              20.0 * std::log10(2.0), 1e-10);
}

TEST(Jomopans, SpeedDifferenceIdentity) {
  for (double f : {12.5, 100.0, 3150.0}) {
    for (double l : {50.0, 200.0}) {
      EXPECT_NEAR(jomopans_echo_sl(f, 11.0, l) - jomopans_echo_sl(f, 4.0, l),
                  60.0 * (std::log10(11.0) - std::log10(4.0)), 1e-10);
    }
  }
}

TEST(Physics, FiniteInOperationalEnvelope) {
  const PhysicsMeanParams p;
  for (double f = 12.5; f <= 8000.0; f *= 1.3) {
    for (double v = 1.0; v <= 30.0; v += 1.7) EXPECT_TRUE(std::isfinite(jomopans_echo_sl(f, v, 200)));
    for (double r = 1.0; r <= 2e5; r *= 3.0) EXPECT_TRUE(std::isfinite(physics_mean_tl(r, f / 1000, p)));
  }
}

}  // namespace
}  // namespace acoustwin
