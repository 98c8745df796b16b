#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "acoustwin/geo.hpp"

namespace acoustwin {
namespace {

TEST(Haversine, IdentityIsZero) {
  const GeoPoint p{49.2, -123.7, 30.0};
  EXPECT_EQ(haversine_km(p, p), 0.0);
}

TEST(Haversine, OneDegreeOfLatitude) {
  // R * pi / 180 by hand.
  EXPECT_NEAR(haversine_km({0, 0, 0}, {1, 0, 0}), 111.19492664455873, 1e-3);
}

TEST(Haversine, HalfCircumference) {
  EXPECT_NEAR(haversine_km({0, 0, 0}, {0, 180, 0}), std::numbers::pi * 6371.0, 0.1);
  EXPECT_NEAR(haversine_km({0, 0, 0}, {0, 180, 0}), 20015.1, 0.1);
}

TEST(Haversine, SymmetricAndTriangleInequality) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lat(-90, 90), lon(-180, 180);
  for (int t = 0; t < 2000; ++t) {
    const GeoPoint a{lat(rng), lon(rng), 0}, b{lat(rng), lon(rng), 0}, c{lat(rng), lon(rng), 0};
    const double ab = haversine_km(a, b);
    EXPECT_EQ(ab, haversine_km(b, a));
    EXPECT_GE(ab, 0.0);
    const double ac = haversine_km(a, c), cb = haversine_km(c, b);
    EXPECT_LE(ab, (ac + cb) * (1.0 + 1e-9) + 1e-12);
  }
}

TEST(SlantRange, CoincidentPointsClampToReferenceDistance) {
  const GeoPoint p{49.0, -123.0, 10.0};
  EXPECT_EQ(slant_range_m(p, p), 1.0);
}

TEST(SlantRange, VerticalOnly) {
  EXPECT_NEAR(slant_range_m({49, -123, 0}, {49, -123, 110}), 110.0, 1e-9);
}

TEST(SlantRange, OneDegreeApartAtEqualDepth) {
  EXPECT_NEAR(slant_range_m({0, 0, 20}, {1, 0, 20}), 111195.0, 1.0);
}

TEST(InterpolateGeodesic, Endpoints) {
  const GeoPoint a{49, -123, 5}, b{50, -124, 25};
  EXPECT_EQ(interpolate_geodesic(a, b, 0.0), a);
  EXPECT_EQ(interpolate_geodesic(a, b, 1.0), b);
}

TEST(InterpolateGeodesic, Midpoint) {
  const GeoPoint m = interpolate_geodesic({49, -123, 0}, {50, -124, 0}, 0.5);
  EXPECT_DOUBLE_EQ(m.lat, 49.5);
  EXPECT_DOUBLE_EQ(m.lon, -123.5);
}

TEST(InterpolateGeodesic, IsAffine) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1), lat(-80, 80), lon(-170, 170), dep(0, 200);
  for (int t = 0; t < 500; ++t) {
    const GeoPoint a{lat(rng), lon(rng), dep(rng)}, b{lat(rng), lon(rng), dep(rng)};
    const double xi = u(rng);
    const GeoPoint p = interpolate_geodesic(a, b, xi);
    EXPECT_NEAR(p.lat, a.lat + xi * (b.lat - a.lat), 1e-12);
    EXPECT_NEAR(p.lon, a.lon + xi * (b.lon - a.lon), 1e-12);
    EXPECT_NEAR(p.depth, a.depth + xi * (b.depth - a.depth), 1e-12);
  }
}

NormRanges test_ranges() {
  return {{0.0, 30.0}, {0.0, 110.0}, {10.0, 400.0}, {12.5, 8000.0}};
}

TEST(NormalizeFeatures, FixedPoints) {
  const FeatureVector x = normalize_features({0, -180, 0}, {49.25, -123.45, 110}, 8000, test_ranges());
  EXPECT_DOUBLE_EQ(x[0], 0.5);
  EXPECT_DOUBLE_EQ(x[1], 0.0);
  EXPECT_DOUBLE_EQ(x[2], 0.0);
  EXPECT_NEAR(x[3], 0.773611, 1e-6);  // (49.25 + 90) / 180
  EXPECT_NEAR(x[4], 0.157083, 1e-6);  // (-123.45 + 180) / 360
  EXPECT_DOUBLE_EQ(x[5], 1.0);
  EXPECT_DOUBLE_EQ(x[6], 1.0);
}

TEST(NormalizeFeatures, OutOfRangeThrows) {
  EXPECT_THROW(normalize_features({0, 0, 31}, {0, 0, 0}, 100, test_ranges()), OutOfRange);
  EXPECT_THROW(normalize_features({0, 0, 1}, {0, 0, 0}, 10, test_ranges()), OutOfRange);
  EXPECT_THROW(normalize_features({91, 0, 1}, {0, 0, 0}, 100, test_ranges()), OutOfRange);
}

TEST(NormalizeFeatures, InverseRoundTrip) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lat(-90, 90), lon(-180, 180), sd(0, 30), rd(0, 110),
      f(12.5, 8000);
  const NormRanges r = test_ranges();
  for (int t = 0; t < 1000; ++t) {
    const GeoPoint src{lat(rng), lon(rng), sd(rng)}, rcv{lat(rng), lon(rng), rd(rng)};
    const double fz = f(rng);
    const DenormalizedFeatures back = denormalize_features(normalize_features(src, rcv, fz, r), r);
    auto rel = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); };
    EXPECT_TRUE(rel(back.src.lat, src.lat));
    EXPECT_TRUE(rel(back.src.lon, src.lon));
    EXPECT_TRUE(rel(back.src.depth, src.depth));
    EXPECT_TRUE(rel(back.rcv.lat, rcv.lat));
    EXPECT_TRUE(rel(back.rcv.lon, rcv.lon));
    EXPECT_TRUE(rel(back.rcv.depth, rcv.depth));
    EXPECT_TRUE(rel(back.f_hz, fz));
  }
}

}  // namespace
}  // namespace acoustwin
