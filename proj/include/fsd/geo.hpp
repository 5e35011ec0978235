#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

namespace fsd::geo {

/// Mean Earth radius, meters (IUGG R1).
inline constexpr double kEarthRadiusM = 6371008.8;

inline constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * (kPi / 180.0); }
inline double rad_to_deg(double rad) { return rad * (180.0 / kPi); }

/// Great-circle distance on the mean-radius sphere, meters. Symmetric,
/// non-negative, zero for identical coordinates.
inline double haversine_m(double lat1_deg, double lon1_deg, double lat2_deg,
                          double lon2_deg) {
  const double phi1 = deg_to_rad(lat1_deg);
  const double phi2 = deg_to_rad(lat2_deg);
  const double dphi = deg_to_rad(lat2_deg - lat1_deg);
  const double dlambda = deg_to_rad(lon2_deg - lon1_deg);
  const double sp = std::sin(dphi / 2.0);
  const double sl = std::sin(dlambda / 2.0);
  const double a = sp * sp + std::cos(phi1) * std::cos(phi2) * sl * sl;
  const double c =
      2.0 * std::atan2(std::sqrt(a), std::sqrt(std::max(0.0, 1.0 - a)));
  return kEarthRadiusM * c;
}

/// Axis-aligned rectangle in degree space. Longitude never wraps inside a
/// rect; callers split wrapping regions into two rects instead.
struct LatLonRect {
  double lat_lo = 0.0;
  double lat_hi = 0.0;
  double lon_lo = 0.0;
  double lon_hi = 0.0;

  bool contains(double lat_deg, double lon_deg) const {
    return lat_deg >= lat_lo && lat_deg <= lat_hi && lon_deg >= lon_lo &&
           lon_deg <= lon_hi;
  }

  bool intersects(const LatLonRect& o) const {
    return lat_lo <= o.lat_hi && o.lat_lo <= lat_hi && lon_lo <= o.lon_hi &&
           o.lon_lo <= lon_hi;
  }

  double area() const { return (lat_hi - lat_lo) * (lon_hi - lon_lo); }

  /// Smallest rect covering both.
  LatLonRect united(const LatLonRect& o) const {
    return LatLonRect{std::min(lat_lo, o.lat_lo), std::max(lat_hi, o.lat_hi),
                      std::min(lon_lo, o.lon_lo), std::max(lon_hi, o.lon_hi)};
  }

  double enlargement(const LatLonRect& o) const {
    return united(o).area() - area();
  }
};

inline LatLonRect point_rect(double lat_deg, double lon_deg) {
  return LatLonRect{lat_deg, lat_deg, lon_deg, lon_deg};
}

/// One or two non-wrapping rectangles covering a spherical cap.
struct CapBounds {
  std::array<LatLonRect, 2> rects;
  std::size_t count = 0;

  void push(const LatLonRect& r) { rects[count++] = r; }
};

namespace detail {
/// Slack added to every padding so the pre-filter stays conservative under
/// floating-point rounding (about a centimeter in degrees).
inline constexpr double kPadEpsilonDeg = 1e-7;
/// Past this latitude the cap is treated as spanning all longitudes.
inline constexpr double kPolarClampDeg = 85.0;

inline LatLonRect full_lon_band(double lat_lo, double lat_hi) {
  return LatLonRect{std::max(-90.0, lat_lo), std::min(90.0, lat_hi), -180.0,
                    180.0};
}
}  // namespace detail

/// Degree-space bounding rectangles for the set of points within radius_m of
/// (lat, lon) on the sphere. Guaranteed to cover the cap (never prunes a
/// true match) at inflation == 1; smaller inflation shrinks the padding and
/// deliberately breaks the guarantee, which exists as a test hook.
///
/// Longitude extent uses the exact asin(sin c / cos lat) bound; the naive
/// c / cos(lat) slightly underestimates it away from the equator. Caps
/// reaching past |lat| = 85 deg, or wider than a hemisphere, fall back to a
/// full longitude band; caps crossing the antimeridian split in two.
inline CapBounds cap_bounds(double lat_deg, double lon_deg, double radius_m,
                            double inflation = 1.0) {
  CapBounds out;
  double c = radius_m / kEarthRadiusM;  // angular radius, radians
  if (c >= kPi) {
    out.push(detail::full_lon_band(-90.0, 90.0));
    return out;
  }
  const double pad_lat =
      rad_to_deg(c) * inflation + detail::kPadEpsilonDeg;
  const double lat_lo = lat_deg - pad_lat;
  const double lat_hi = lat_deg + pad_lat;

  if (std::abs(lat_deg) + pad_lat >= detail::kPolarClampDeg ||
      c >= kPi / 2.0) {
    out.push(detail::full_lon_band(lat_lo, lat_hi));
    return out;
  }

  const double sin_ratio =
      std::min(1.0, std::sin(c) / std::cos(deg_to_rad(lat_deg)));
  const double pad_lon =
      rad_to_deg(std::asin(sin_ratio)) * inflation + detail::kPadEpsilonDeg;
  double lon_lo = lon_deg - pad_lon;
  double lon_hi = lon_deg + pad_lon;

  if (lon_hi - lon_lo >= 360.0) {
    out.push(detail::full_lon_band(lat_lo, lat_hi));
    return out;
  }
  if (lon_lo < -180.0) {
    out.push(LatLonRect{std::max(-90.0, lat_lo), std::min(90.0, lat_hi),
                        lon_lo + 360.0, 180.0});
    out.push(LatLonRect{std::max(-90.0, lat_lo), std::min(90.0, lat_hi),
                        -180.0, lon_hi});
    return out;
  }
  if (lon_hi > 180.0) {
    out.push(LatLonRect{std::max(-90.0, lat_lo), std::min(90.0, lat_hi),
                        lon_lo, 180.0});
    out.push(LatLonRect{std::max(-90.0, lat_lo), std::min(90.0, lat_hi),
                        -180.0, lon_hi - 360.0});
    return out;
  }
  out.push(LatLonRect{std::max(-90.0, lat_lo), std::min(90.0, lat_hi), lon_lo,
                      lon_hi});
  return out;
}

}  // namespace fsd::geo
