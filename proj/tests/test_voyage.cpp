#include <gtest/gtest.h>

#include <cmath>

#include "acoustwin/voyage.hpp"

using namespace acoustwin;

namespace {

/// Spreading plus absorption from ship to receptor.
struct PhysicsTl {
  std::vector<double> operator()(std::span<const GeoPoint> ships, const GeoPoint& m, double f) const {
    std::vector<double> out;
    for (const auto& s : ships) out.push_back(physics_mean_tl(slant_range_m(s, m), f / 1000.0, {}));
    return out;
  }
};

/// Position-dependent ripple on top of spreading, so the discrete objective is not monotone.
struct RippleTl {
  std::vector<double> operator()(std::span<const GeoPoint> ships, const GeoPoint& m, double f) const {
    std::vector<double> out;
    for (const auto& s : ships) {
      const double r = slant_range_m(s, m);
      out.push_back(physics_mean_tl(r, f / 1000.0, {}) + 8.0 * std::sin(r / 700.0));
    }
    return out;
  }
};

Route two_point_route(double km = 20.0) {
  Route r;
  const GeoPoint a{49.0, -123.6, 0.0};
  r.waypoints = {a, destination_point(a, 1.2, km)};
  r.v0_knots = 8.0;
  r.vmax_knots = 16.0;
  return r;
}

const GeoPoint kReceptor{49.05, -123.45, 30.0};

}  // namespace

TEST(Budget, Values) {
  EXPECT_DOUBLE_EQ(leg_time_budget(0.0, 10.0), 0.0);
  EXPECT_NEAR(leg_time_budget(10.0, 10.0), 1945.53, 0.01);
  EXPECT_DOUBLE_EQ(leg_time_budget(10.0, 20.0), leg_time_budget(10.0, 10.0) / 2.0);
  EXPECT_THROW(leg_time_budget(1.0, 0.0), ConfigError);
}

TEST(LegSel, ConstantLevelClosedForm) {
  // n = ceil(9.5) = 10 steps of 10 s at RL = 120 dB -> 120 + 10 log10(100) = 140 dB.
  Route r = two_point_route(5.0);
  r.dt_s = 10.0;
  const double length_m = haversine_km(r.waypoints[0], r.waypoints[1]) * 1000.0;
  const double v = length_m / (kKnotMs * r.dt_s * 9.5);
  const double sl = jomopans_echo_sl(r.f_hz, v, r.vessel_length_m);
  const LegEvaluation e = leg_sel(ConstantTl{sl - 120.0}, r.waypoints[0], r.waypoints[1], v, kReceptor, r);
  EXPECT_EQ(e.samples.size(), 10u);
  EXPECT_NEAR(e.sel_db, 140.0, 1e-9);
  for (const auto& s : e.samples) EXPECT_NEAR(s.rl_db, 120.0, 1e-9);
}

TEST(LegSel, FiftyLogSpeedLaw) {
  const Route r = two_point_route(100.0);
  const ConstantTl tl{70.0};
  const double v1 = 9.0, v2 = 15.0;
  const double s1 = leg_sel(tl, r.waypoints[0], r.waypoints[1], v1, kReceptor, r).sel_db;
  const double s2 = leg_sel(tl, r.waypoints[0], r.waypoints[1], v2, kReceptor, r).sel_db;
  EXPECT_NEAR(s2 - s1, 50.0 * (std::log10(v2) - std::log10(v1)), 0.1);
}

TEST(LegSel, AtLeastOneStep) {
  Route r = two_point_route();
  const LegEvaluation e = leg_sel(PhysicsTl{}, r.waypoints[0], r.waypoints[0], 10.0, kReceptor, r);
  EXPECT_EQ(e.samples.size(), 1u);
  EXPECT_DOUBLE_EQ(e.time_s, 0.0);
  const GeoPoint b = destination_point(r.waypoints[0], 0.0, 0.001);
  EXPECT_EQ(leg_sel(PhysicsTl{}, r.waypoints[0], b, 10.0, kReceptor, r).samples.size(), 1u);
}

TEST(LegSel, ShiftInvariance) {
  const Route r = two_point_route();
  const double base = leg_sel(PhysicsTl{}, r.waypoints[0], r.waypoints[1], 11.0, kReceptor, r).sel_db;
  struct Shifted {
    double c;
    std::vector<double> operator()(std::span<const GeoPoint> s, const GeoPoint& m, double f) const {
      auto v = PhysicsTl{}(s, m, f);
      for (double& x : v) x -= c;
      return v;
    }
  };
  for (double c : {-7.5, 3.0, 12.25}) {
    EXPECT_NEAR(leg_sel(Shifted{c}, r.waypoints[0], r.waypoints[1], 11.0, kReceptor, r).sel_db, base + c, 1e-9);
  }
}

TEST(LegSel, StepRefinementConverges) {
  Route r = two_point_route(20.0);
  std::vector<double> sel;
  for (double dt : {60.0, 30.0, 15.0}) {
    r.dt_s = dt;
    sel.push_back(leg_sel(PhysicsTl{}, r.waypoints[0], r.waypoints[1], 10.0, kReceptor, r).sel_db);
  }
  EXPECT_LT(std::abs(sel[2] - sel[1]), std::abs(sel[1] - sel[0]));
}

TEST(LegSel, RejectsZeroSpeed) {
  const Route r = two_point_route();
  EXPECT_THROW(leg_sel(PhysicsTl{}, r.waypoints[0], r.waypoints[1], 0.0, kReceptor, r), ConfigError);
}

TEST(OptimizeLeg, ConstantTlPicksLowestSpeed) {
  const Route r = two_point_route();
  const LegPlan p = optimize_leg(ConstantTl{65.0}, r, 0, kReceptor);
  EXPECT_DOUBLE_EQ(p.speed_knots, r.v0_knots);
  EXPECT_DOUBLE_EQ(p.sel_db, p.baseline_sel_db);
}

TEST(OptimizeLeg, SingleCandidate) {
  Route r = two_point_route();
  r.vmax_knots = r.v0_knots;
  const LegPlan p = optimize_leg(PhysicsTl{}, r, 0, kReceptor);
  EXPECT_DOUBLE_EQ(p.speed_knots, r.v0_knots);
  EXPECT_EQ(speed_grid(5, 5, 200).size(), 1u);
}

TEST(OptimizeLeg, GridEndpointsAndSize) {
  const auto g = speed_grid(8.0, 16.0, 200);
  ASSERT_EQ(g.size(), 200u);
  EXPECT_DOUBLE_EQ(g.front(), 8.0);
  EXPECT_DOUBLE_EQ(g.back(), 16.0);
}

TEST(OptimizeLeg, AgreesWithDenseGrid) {
  // The step count n = ceil(L / (V kappa dt)) makes the discrete objective a
  // sawtooth in V. Against a 10001-point grid the coarse optimum always lies
  // within one coarse step in SEL; the speeds agree to one step when both
  // grids land on the same tooth, as on these longer legs.
  for (double km : {3.0, 8.0, 20.0, 45.0}) {
    Route r = two_point_route(km);
    const LegPlan coarse = optimize_leg(PhysicsTl{}, r, 0, kReceptor);
    r.grid_points = 10001;
    const LegPlan dense = optimize_leg(PhysicsTl{}, r, 0, kReceptor);
    const double spacing = (r.vmax_knots - r.v0_knots) / 199.0;
    EXPECT_GE(coarse.sel_db, dense.sel_db - 1e-9) << km;
    EXPECT_LE(coarse.sel_db - dense.sel_db, 60.0 * std::log10(1.0 + spacing / r.v0_knots)) << km;
    if (km >= 8.0) EXPECT_LE(std::abs(coarse.speed_knots - dense.speed_knots), spacing) << km;
  }
}

TEST(OptimizeLeg, ArgminInvariantUnderMonotoneRescaling) {
  // Adding a constant to TL shifts every SEL by the same amount.
  const Route r = two_point_route(8.0);
  struct Scaled {
    std::vector<double> operator()(std::span<const GeoPoint> s, const GeoPoint& m, double f) const {
      auto v = RippleTl{}(s, m, f);
      for (double& x : v) x += 17.0;
      return v;
    }
  };
  EXPECT_DOUBLE_EQ(optimize_leg(RippleTl{}, r, 0, kReceptor).speed_knots,
                   optimize_leg(Scaled{}, r, 0, kReceptor).speed_knots);
}

TEST(OptimizeLeg, RespectsBudgetAndBounds) {
  Route r = two_point_route(12.0);
  const LegPlan p = optimize_leg(RippleTl{}, r, 0, kReceptor);
  EXPECT_LE(p.time_s, p.budget_s + 1e-9);
  EXPECT_GE(p.speed_knots, r.v0_knots);
  EXPECT_LE(p.speed_knots, r.vmax_knots);
  EXPECT_THROW(optimize_leg(RippleTl{}, r, 1, kReceptor), ConfigError);
}

TEST(OptimizeRoute, SingleLegTotals) {
  const Route r = two_point_route();
  const VoyagePlan v = optimize_route(PhysicsTl{}, r, kReceptor);
  ASSERT_EQ(v.legs.size(), 1u);
  EXPECT_NEAR(v.total_sel_db, v.legs[0].sel_db, 1e-12);
  EXPECT_DOUBLE_EQ(v.total_time_s, v.legs[0].time_s);
  EXPECT_EQ(v.series.size(), v.legs[0].samples.size());
}

TEST(OptimizeRoute, TwoIdenticalLegs) {
  Route r = two_point_route();
  r.waypoints.push_back(r.waypoints[0]);  // out and back
  const VoyagePlan v = optimize_route(ConstantTl{70.0}, r, kReceptor);
  ASSERT_EQ(v.legs.size(), 2u);
  EXPECT_DOUBLE_EQ(v.legs[0].speed_knots, v.legs[1].speed_knots);
  EXPECT_NEAR(v.legs[0].sel_db, v.legs[1].sel_db, 1e-9);
  EXPECT_NEAR(v.total_sel_db, v.legs[0].sel_db + 10.0 * std::log10(2.0), 1e-9);
}

TEST(OptimizeRoute, ConstraintsAndSeries) {
  Route r = two_point_route(15.0);
  r.waypoints.push_back(destination_point(r.waypoints[1], 2.5, 9.0));
  r.waypoints.push_back(destination_point(r.waypoints[2], 0.4, 4.0));
  const VoyagePlan v = optimize_route(RippleTl{}, r, kReceptor);
  ASSERT_EQ(v.legs.size(), 3u);
  double total = 0;
  for (const auto& l : v.legs) {
    EXPECT_LE(l.time_s, l.budget_s + 1e-9);
    total += l.time_s;
  }
  EXPECT_NEAR(v.total_time_s, total, 1e-9);
  EXPECT_LE(v.total_sel_db, v.baseline_sel_db + 1e-12);
  for (std::size_t i = 1; i < v.series.size(); ++i) EXPECT_GT(v.series[i].t_s, v.series[i - 1].t_s);
  EXPECT_LE(v.series.back().t_s, v.total_time_s);
  const auto j = to_json(v);
  EXPECT_EQ(j["legs"].size(), 3u);
}

TEST(RouteFile, ParsesAndValidates) {
  const nlohmann::json j = {{"waypoints", {{{"lat", 48.5}, {"lon", -124.8}}, {{"lat", 48.9}, {"lon", -123.9}}}},
                            {"v0_knots", 10},
                            {"vmax_knots", 14},
                            {"freq_hz", 400},
                            {"receptor", {{"lat", 49.25}, {"lon", -123.45}, {"depth", 30}}}};
  const VoyageRequest req = voyage_request_from_json(j);
  EXPECT_EQ(req.route.waypoints.size(), 2u);
  EXPECT_DOUBLE_EQ(req.route.dt_s, 60.0);
  EXPECT_DOUBLE_EQ(req.route.source_depth_m, 10.0);
  EXPECT_DOUBLE_EQ(req.receptor.depth, 30.0);
  nlohmann::json bad = j;
  bad["vmax_knots"] = 5;
  EXPECT_THROW(voyage_request_from_json(bad), ConfigError);
  bad = j;
  bad.erase("receptor");
  EXPECT_THROW(voyage_request_from_json(bad), ConfigError);
}
