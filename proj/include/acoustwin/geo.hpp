#ifndef ACOUSTWIN_GEO_HPP
#define ACOUSTWIN_GEO_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "acoustwin/errors.hpp"

namespace acoustwin {

inline constexpr double kEarthRadiusKm = 6371.0;

/// Latitude/longitude in degrees, depth in metres (positive down).
struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
  double depth = 0.0;

  bool valid() const {
    return std::isfinite(lat) && std::isfinite(lon) && std::isfinite(depth) &&
           lat >= -90.0 && lat <= 90.0 && lon >= -180.0 && lon <= 180.0 &&
           depth >= 0.0;
  }

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

inline void require_valid(const GeoPoint& p, const char* what) {
  if (!p.valid()) {
    throw OutOfRange(std::string(what) + ": invalid GeoPoint (" +
                     std::to_string(p.lat) + ", " + std::to_string(p.lon) +
                     ", " + std::to_string(p.depth) + ")");
  }
}

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

/// Great-circle distance on a sphere, ignoring depth.
inline double haversine_km(const GeoPoint& a, const GeoPoint& b,
                           double radius_km = kEarthRadiusKm) {
  const double phi1 = deg2rad(a.lat);
  const double phi2 = deg2rad(b.lat);
  const double dphi = phi2 - phi1;
  const double dlambda = deg2rad(b.lon - a.lon);
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * radius_km * std::asin(std::sqrt(h));
}

/// Horizontal great-circle range combined with the depth difference,
/// floored at the 1 m reference distance.
inline double slant_range_m(const GeoPoint& src, const GeoPoint& rcv,
                            double radius_km = kEarthRadiusKm) {
  const double horizontal = haversine_km(src, rcv, radius_km) * 1000.0;
  const double vertical = rcv.depth - src.depth;
  return std::max(1.0, std::hypot(horizontal, vertical));
}

/// Point reached from `origin` along an initial bearing (radians from north)
/// after `distance_km` on the sphere. Depth is copied from the origin.
inline GeoPoint destination_point(const GeoPoint& origin, double bearing_rad,
                                  double distance_km, double radius_km = kEarthRadiusKm) {
  const double delta = distance_km / radius_km;
  const double phi1 = deg2rad(origin.lat);
  const double lam1 = deg2rad(origin.lon);
  const double sin_phi2 = std::sin(phi1) * std::cos(delta) +
                          std::cos(phi1) * std::sin(delta) * std::cos(bearing_rad);
  const double phi2 = std::asin(std::clamp(sin_phi2, -1.0, 1.0));
  const double lam2 =
      lam1 + std::atan2(std::sin(bearing_rad) * std::sin(delta) * std::cos(phi1),
                        std::cos(delta) - std::sin(phi1) * sin_phi2);
  double lon = lam2 * 180.0 / std::numbers::pi;
  lon = std::fmod(lon + 540.0, 360.0) - 180.0;
  return {phi2 * 180.0 / std::numbers::pi, lon, origin.depth};
}

/// Componentwise linear interpolation (1 - xi) a + xi b.
inline GeoPoint interpolate_geodesic(const GeoPoint& a, const GeoPoint& b,
                                     double xi) {
  return {a.lat + xi * (b.lat - a.lat), a.lon + xi * (b.lon - a.lon),
          a.depth + xi * (b.depth - a.depth)};
}

struct Interval {
  double min = 0.0;
  double max = 1.0;

  bool contains(double x) const { return x >= min && x <= max; }
  double span() const { return max - min; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Min-max ranges observed on the training split; stored with the model.
struct NormRanges {
  Interval src_depth;
  Interval rcv_depth;
  Interval bathy;
  Interval freq_hz;

  bool valid() const {
    for (const Interval* i : {&src_depth, &rcv_depth, &bathy, &freq_hz}) {
      if (!(std::isfinite(i->min) && std::isfinite(i->max) && i->max > i->min)) {
        return false;
      }
    }
    return true;
  }
  friend bool operator==(const NormRanges&, const NormRanges&) = default;
};

inline constexpr int kGeometryFeatures = 7;

/// Normalized (src lat, lon, depth, rcv lat, lon, depth, frequency).
using FeatureVector = std::array<double, kGeometryFeatures>;

inline double minmax_scale(double x, const Interval& r, const char* name) {
  if (!std::isfinite(x) || !r.contains(x)) {
    throw OutOfRange(std::string(name) + " = " + std::to_string(x) +
                     " outside [" + std::to_string(r.min) + ", " +
                     std::to_string(r.max) + "]");
  }
  return (x - r.min) / r.span();
}

inline FeatureVector normalize_features(const GeoPoint& src, const GeoPoint& rcv,
                                        double f_hz, const NormRanges& ranges) {
  require_valid(src, "source");
  require_valid(rcv, "receiver");
  return {(src.lat + 90.0) / 180.0,
          (src.lon + 180.0) / 360.0,
          minmax_scale(src.depth, ranges.src_depth, "src_depth"),
          (rcv.lat + 90.0) / 180.0,
          (rcv.lon + 180.0) / 360.0,
          minmax_scale(rcv.depth, ranges.rcv_depth, "rcv_depth"),
          minmax_scale(f_hz, ranges.freq_hz, "freq_hz")};
}

struct DenormalizedFeatures {
  GeoPoint src;
  GeoPoint rcv;
  double f_hz = 0.0;
};

inline DenormalizedFeatures denormalize_features(const FeatureVector& x,
                                                 const NormRanges& ranges) {
  auto unscale = [](double v, const Interval& r) { return r.min + v * r.span(); };
  return {{x[0] * 180.0 - 90.0, x[1] * 360.0 - 180.0, unscale(x[2], ranges.src_depth)},
          {x[3] * 180.0 - 90.0, x[4] * 360.0 - 180.0, unscale(x[5], ranges.rcv_depth)},
          unscale(x[6], ranges.freq_hz)};
}

}  // namespace acoustwin

#endif  // ACOUSTWIN_GEO_HPP
