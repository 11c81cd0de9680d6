#pragma once

// Robinson pseudo-cylindrical projection from the 5-degree coefficient table,
// linearly interpolated between rows.

#include <array>
#include <cmath>
#include <numbers>

#include "qvfv/bloch.hpp"
#include "qvfv/errors.hpp"

namespace qvfv {

struct GeoPoint {
    double latitude = 0.0;   // degrees, [-90, 90]
    double longitude = 0.0;  // degrees, [-180, 180)

    bool operator==(const GeoPoint&) const = default;
};

struct PlanePoint {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const PlanePoint&) const = default;
};

namespace robinson {

inline constexpr double kXScale = 0.8487;
inline constexpr double kYScale = 1.3523;
inline constexpr double kStepDeg = 5.0;

// Rows at |latitude| = 0, 5, ..., 90 degrees.
inline constexpr std::array<double, 19> kX{1.0000, 0.9986, 0.9954, 0.9900, 0.9822, 0.9730, 0.9600,
                                           0.9427, 0.9216, 0.8962, 0.8679, 0.8350, 0.7986, 0.7597,
                                           0.7186, 0.6732, 0.6213, 0.5722, 0.5322};
inline constexpr std::array<double, 19> kY{0.0000, 0.0620, 0.1240, 0.1860, 0.2480, 0.3100, 0.3720,
                                           0.4340, 0.4958, 0.5571, 0.6176, 0.6769, 0.7346, 0.7903,
                                           0.8435, 0.8936, 0.9394, 0.9761, 1.0000};

// Table value at |latitude| in degrees.
inline double interpolate(const std::array<double, 19>& table, double abs_lat) {
    const double pos = abs_lat / kStepDeg;
    const int i = static_cast<int>(std::floor(pos));
    if (i >= 18) return table[18];
    if (i < 0) return table[0];
    const double t = pos - i;
    return table[static_cast<std::size_t>(i)] + t * (table[static_cast<std::size_t>(i) + 1] -
                                                     table[static_cast<std::size_t>(i)]);
}

inline double x_factor(double abs_lat) { return interpolate(kX, abs_lat); }
inline double y_factor(double abs_lat) { return interpolate(kY, abs_lat); }

// Extent of the projected world: |x| <= max_x, |y| <= max_y.
inline constexpr double max_x = kXScale * std::numbers::pi;
inline constexpr double max_y = kYScale;

} // namespace robinson

inline void validate(const GeoPoint& g) {
    if (!(g.latitude >= -90.0 && g.latitude <= 90.0)) throw InvalidArgument("latitude outside [-90, 90]");
    if (!(g.longitude >= -180.0 && g.longitude <= 180.0)) throw InvalidArgument("longitude outside [-180, 180]");
}

// Longitude +180 is accepted as the eastern edge of the map.
inline PlanePoint robinson_project(const GeoPoint& g) {
    const double a = std::abs(g.latitude);
    const double lam = g.longitude * std::numbers::pi / 180.0;
    const double sgn = g.latitude < 0.0 ? -1.0 : 1.0;
    return {robinson::kXScale * robinson::x_factor(a) * lam, sgn * robinson::kYScale * robinson::y_factor(a)};
}

inline GeoPoint to_geo(const StateAngles& s) {
    return {90.0 - s.theta * 180.0 / std::numbers::pi, wrap_longitude(s.phi) * 180.0 / std::numbers::pi};
}

// Geographic position of the direction of a nonzero Bloch vector.
inline GeoPoint to_geo(const BlochVector& a) { return to_geo(angles_from_bloch(a)); }

} // namespace qvfv
