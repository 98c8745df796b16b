#ifndef ACOUSTWIN_VOYAGE_HPP
#define ACOUSTWIN_VOYAGE_HPP

// Per-leg speed optimization that minimizes sound exposure at a receptor.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdio>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "acoustwin/datagen.hpp"
#include "acoustwin/errors.hpp"
#include "acoustwin/geo.hpp"
#include "acoustwin/model.hpp"
#include "acoustwin/physics.hpp"

namespace acoustwin {

inline constexpr double kKnotMs = 0.514;

struct Route {
  std::vector<GeoPoint> waypoints;
  double v0_knots = 10.0;
  double vmax_knots = 20.0;
  double source_depth_m = 10.0;
  double vessel_length_m = 200.0;
  double f_hz = 400.0;
  double dt_s = 60.0;
  int grid_points = 200;
  double earth_radius_km = kEarthRadiusKm;

  void check() const {
    if (waypoints.size() < 2) throw ConfigError("route needs at least 2 waypoints");
    for (const auto& w : waypoints) require_valid(w, "waypoint");
    if (!(v0_knots > 0.0 && v0_knots <= vmax_knots)) throw ConfigError("route needs 0 < v0 <= vmax");
    if (!(dt_s > 0.0)) throw ConfigError("dt_s must be > 0");
    if (!(f_hz > 0.0) || !(vessel_length_m > 0.0) || source_depth_m < 0.0) {
      throw ConfigError("route frequency, vessel length and source depth must be positive");
    }
    if (grid_points < 1) throw ConfigError("grid_points must be >= 1");
  }
};

/// Baseline time for a leg of `length_km` at `v0_knots`.
inline double leg_time_budget(double length_km, double v0_knots) {
  if (length_km < 0.0 || !(v0_knots > 0.0)) throw ConfigError("leg_time_budget needs L >= 0, V0 > 0");
  return length_km * 1000.0 / (v0_knots * kKnotMs);
}

/// Supplies TL (dB) from each ship position to the receptor at one frequency.
template <class P>
concept TlProvider = requires(const P& p, std::span<const GeoPoint> ships, const GeoPoint& m, double f) {
  { p(ships, m, f) } -> std::convertible_to<std::vector<double>>;
};

/// Location-independent TL, for analysis and tests.
struct ConstantTl {
  double tl_db = 60.0;
  std::vector<double> operator()(std::span<const GeoPoint> ships, const GeoPoint&, double) const {
    return std::vector<double>(ships.size(), tl_db);
  }
};

/// Clamped surrogate mean, with path profiles from a bathymetry source.
class SurrogateTl {
 public:
  SurrogateTl(const SurrogateModel& model, BathySource bathy)
      : predictor_(model), bathy_(std::move(bathy)) {}

  std::vector<double> operator()(std::span<const GeoPoint> ships, const GeoPoint& receptor, double f_hz) const {
    const SurrogateModel& m = predictor_.model();
    PreparedSet set = allocate_prepared(static_cast<Index>(ships.size()), false);
    for (Index j = 0; j < set.size(); ++j) {
      const GeoPoint& s = ships[static_cast<std::size_t>(j)];
      prepare_into(set, j, s, receptor, f_hz, sample_profile(s, receptor, bathy_), m.ranges,
                   m.config.earth_radius_km);
    }
    const PredictiveBatch b = predictor_.predict(set, true);
    return {b.mean.data(), b.mean.data() + b.mean.size()};
  }

 private:
  SurrogatePredictor predictor_;
  BathySource bathy_;
};

struct RlSample {
  double t_s = 0.0;  // time of the midpoint sample
  GeoPoint ship;
  double speed_knots = 0.0;
  double sl_db = 0.0;
  double tl_db = 0.0;
  double rl_db = 0.0;
};

struct LegEvaluation {
  double sel_db = 0.0;
  double time_s = 0.0;
  std::vector<RlSample> samples;
};

/// Discrete SEL for a constant speed on the leg a -> b.
template <TlProvider P>
LegEvaluation leg_sel(const P& tl, const GeoPoint& a, const GeoPoint& b, double speed_knots,
                      const GeoPoint& receptor, const Route& route) {
  if (!(speed_knots > 0.0)) throw ConfigError("leg_sel needs V > 0");
  const double length_m = haversine_km(a, b, route.earth_radius_km) * 1000.0;
  const double v_ms = speed_knots * kKnotMs;
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(length_m / (v_ms * route.dt_s))));
  LegEvaluation out;
  out.time_s = length_m / v_ms;
  std::vector<GeoPoint> ships(n);
  for (std::size_t j = 0; j < n; ++j) {
    ships[j] = interpolate_geodesic(a, b, (static_cast<double>(j) + 0.5) / static_cast<double>(n));
    ships[j].depth = route.source_depth_m;
  }
  const std::vector<double> tls = tl(std::span<const GeoPoint>(ships), receptor, route.f_hz);
  if (tls.size() != n) throw ShapeMismatch("TL provider returned the wrong number of values");
  const double sl = jomopans_echo_sl(route.f_hz, speed_knots, route.vessel_length_m);
  double energy = 0.0;
  out.samples.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double rl = sl - tls[j];
    energy += std::pow(10.0, rl / 10.0) * route.dt_s;
    const double xi = (static_cast<double>(j) + 0.5) / static_cast<double>(n);
    out.samples.push_back({xi * out.time_s, ships[j], speed_knots, sl, tls[j], rl});
  }
  out.sel_db = 10.0 * std::log10(energy);
  return out;
}

struct LegPlan {
  int index = 0;
  double length_km = 0.0;
  double budget_s = 0.0;
  double speed_knots = 0.0;
  double time_s = 0.0;
  double sel_db = 0.0;
  double baseline_sel_db = 0.0;  // at V0
  std::vector<RlSample> samples;
};

/// Uniform speed grid over [V0, Vmax], endpoints included.
inline std::vector<double> speed_grid(double v0, double vmax, int points) {
  if (points <= 1 || vmax == v0) return {v0};
  std::vector<double> v(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k) v[static_cast<std::size_t>(k)] = v0 + (vmax - v0) * k / (points - 1);
  v.back() = vmax;
  return v;
}

/// Grid search for the minimum-SEL speed; ties go to the lower speed.
template <TlProvider P>
LegPlan optimize_leg(const P& tl, const Route& route, int leg, const GeoPoint& receptor) {
  route.check();
  if (leg < 0 || leg + 1 >= static_cast<int>(route.waypoints.size())) throw ConfigError("leg index out of range");
  const GeoPoint& a = route.waypoints[static_cast<std::size_t>(leg)];
  const GeoPoint& b = route.waypoints[static_cast<std::size_t>(leg) + 1];
  LegPlan plan;
  plan.index = leg;
  plan.length_km = haversine_km(a, b, route.earth_radius_km);
  plan.budget_s = leg_time_budget(plan.length_km, route.v0_knots);
  LegEvaluation best;
  bool first = true;
  for (double v : speed_grid(route.v0_knots, route.vmax_knots, route.grid_points)) {
    LegEvaluation e = leg_sel(tl, a, b, v, receptor, route);
    if (first) plan.baseline_sel_db = e.sel_db;
    if (first || e.sel_db < best.sel_db) {
      best = std::move(e);
      plan.speed_knots = v;
    }
    first = false;
  }
  plan.sel_db = best.sel_db;
  plan.time_s = best.time_s;
  plan.samples = std::move(best.samples);
  return plan;
}

struct VoyagePlan {
  std::vector<LegPlan> legs;
  std::vector<RlSample> series;  // cumulative time stamps
  double total_sel_db = 0.0;
  double baseline_sel_db = 0.0;
  double total_time_s = 0.0;
  double budget_s = 0.0;
};

inline double energy_sum_db(std::span<const double> levels) {
  double e = 0.0;
  for (double l : levels) e += std::pow(10.0, l / 10.0);
  return 10.0 * std::log10(e);
}

template <TlProvider P>
VoyagePlan optimize_route(const P& tl, const Route& route, const GeoPoint& receptor) {
  route.check();
  require_valid(receptor, "receptor");
  VoyagePlan plan;
  std::vector<double> sels, baselines;
  for (int i = 0; i + 1 < static_cast<int>(route.waypoints.size()); ++i) {
    LegPlan leg = optimize_leg(tl, route, i, receptor);
    for (RlSample s : leg.samples) {
      s.t_s += plan.total_time_s;
      plan.series.push_back(s);
    }
    plan.total_time_s += leg.time_s;
    plan.budget_s += leg.budget_s;
    sels.push_back(leg.sel_db);
    baselines.push_back(leg.baseline_sel_db);
    plan.legs.push_back(std::move(leg));
  }
  plan.total_sel_db = energy_sum_db(sels);
  plan.baseline_sel_db = energy_sum_db(baselines);
  return plan;
}

// ---------------------------------------------------------------------------
// Files

struct VoyageRequest {
  Route route;
  GeoPoint receptor;
};

inline VoyageRequest voyage_request_from_json(const nlohmann::json& j) {
  VoyageRequest r;
  try {
    for (const auto& w : j.at("waypoints")) r.route.waypoints.push_back({w.at("lat"), w.at("lon"), 0.0});
    r.route.v0_knots = j.at("v0_knots");
    r.route.vmax_knots = j.at("vmax_knots");
    r.route.vessel_length_m = j.value("vessel_length_m", r.route.vessel_length_m);
    r.route.f_hz = j.value("freq_hz", r.route.f_hz);
    r.route.dt_s = j.value("dt_s", r.route.dt_s);
    r.route.source_depth_m = j.value("source_depth_m", r.route.source_depth_m);
    r.route.grid_points = j.value("grid_points", r.route.grid_points);
    const auto& m = j.at("receptor");
    r.receptor = {m.at("lat"), m.at("lon"), m.at("depth")};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad route file: " + std::string(e.what()));
  }
  r.route.check();
  require_valid(r.receptor, "receptor");
  return r;
}

inline nlohmann::ordered_json to_json(const VoyagePlan& p) {
  nlohmann::ordered_json legs = nlohmann::ordered_json::array();
  for (const auto& l : p.legs) {
    legs.push_back({{"index", l.index},
                    {"length_km", l.length_km},
                    {"budget_s", l.budget_s},
                    {"speed_knots", l.speed_knots},
                    {"time_s", l.time_s},
                    {"sel_db", l.sel_db},
                    {"baseline_sel_db", l.baseline_sel_db},
                    {"steps", l.samples.size()}});
  }
  return {{"legs", legs},
          {"total_sel_db", p.total_sel_db},
          {"baseline_sel_db", p.baseline_sel_db},
          {"total_time_s", p.total_time_s},
          {"budget_s", p.budget_s},
          {"sel_reference", "dB re 1 uPa^2 s"}};
}

inline void write_rl_series_csv(const std::string& path, const VoyagePlan& p) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "t_s,lat,lon,speed_knots,sl_db,tl_db,rl_db\n";
  char buf[256];
  for (const auto& s : p.series) {
    std::snprintf(buf, sizeof buf, "%.3f,%.7f,%.7f,%.4f,%.4f,%.4f,%.4f\n", s.t_s, s.ship.lat, s.ship.lon,
                  s.speed_knots, s.sl_db, s.tl_db, s.rl_db);
    out << buf;
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace acoustwin

#endif  // ACOUSTWIN_VOYAGE_HPP
