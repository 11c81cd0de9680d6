#pragma once

// Single-qubit states and projective measurements in the Bloch encoding
// rho = (I + a.sigma)/2. The 2x2 density matrix is never formed; every
// quantity below is an R^3 expression.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "qvfv/errors.hpp"

namespace qvfv {

// Slack on the physicality constraint |a| <= 1.
inline constexpr double kBallTolerance = 1e-9;

struct BlochVector {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr BlochVector operator+(const BlochVector& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr BlochVector operator-(const BlochVector& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr BlochVector operator-() const { return {-x, -y, -z}; }
    constexpr BlochVector operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr BlochVector operator/(double s) const { return {x / s, y / s, z / s}; }
    BlochVector& operator+=(const BlochVector& o) { x += o.x; y += o.y; z += o.z; return *this; }
    BlochVector& operator-=(const BlochVector& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }

    bool operator==(const BlochVector&) const = default;
};

constexpr BlochVector operator*(double s, const BlochVector& v) { return v * s; }

constexpr double dot(const BlochVector& a, const BlochVector& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr BlochVector cross(const BlochVector& a, const BlochVector& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const BlochVector& a) { return std::sqrt(dot(a, a)); }

inline double distance(const BlochVector& a, const BlochVector& b) { return norm(a - b); }

inline bool is_physical(const BlochVector& a) { return norm(a) <= 1.0 + kBallTolerance; }

inline bool is_pure(const BlochVector& a) { return std::abs(norm(a) - 1.0) <= kBallTolerance; }

inline void require_physical(const BlochVector& a) {
    if (!is_physical(a)) {
        std::ostringstream os;
        os.precision(17);
        os << "Bloch vector (" << a.x << ", " << a.y << ", " << a.z << ") has norm " << norm(a) << " > 1";
        throw UnphysicalState(os.str());
    }
}

// Wraps an angle into [-pi, pi).
inline double wrap_longitude(double phi) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double w = std::fmod(phi + std::numbers::pi, two_pi);
    if (w < 0.0) w += two_pi;
    w -= std::numbers::pi;
    // fmod can round up to exactly pi for inputs just below an odd multiple.
    return w >= std::numbers::pi ? -std::numbers::pi : w;
}

// Polar angle theta in [0, pi] from the +z axis, azimuth phi in [-pi, pi).
struct StateAngles {
    double theta = 0.0;
    double phi = 0.0;

    bool operator==(const StateAngles&) const = default;
};

// Angles (alpha, beta) of the pre-measurement rotation R_y(-alpha) R_z(-beta).
struct MeasurementAngles {
    double alpha = 0.0;
    double beta = 0.0;

    bool operator==(const MeasurementAngles&) const = default;
};

inline BlochVector spherical_unit(double polar, double azimuth) {
    const double s = std::sin(polar);
    return {s * std::cos(azimuth), s * std::sin(azimuth), std::cos(polar)};
}

// Programmed pure state R_z(phi) R_y(theta)|0>.
inline BlochVector to_bloch(const StateAngles& s) { return spherical_unit(s.theta, s.phi); }

// Axis u of the projective measurement emulated by the basis-change rotation.
inline BlochVector measurement_axis(const MeasurementAngles& m) { return spherical_unit(m.alpha, m.beta); }

// Inverse of to_bloch for nonzero vectors; only the direction is used.
inline StateAngles angles_from_bloch(const BlochVector& a) {
    const double r = norm(a);
    if (r == 0.0) return {};
    const double theta = std::atan2(std::hypot(a.x, a.y), a.z);
    return {theta, wrap_longitude(std::atan2(a.y, a.x))};
}

// Probability of the +u outcome, tr(rho P_u) = (1 + a.u)/2.
inline double born_probability(const BlochVector& a, const BlochVector& u) {
    require_physical(a);
    // Written as 0.5 + 0.5*d so that p(a, u) + p(a, -u) rounds to exactly 1.
    const double p = 0.5 + 0.5 * dot(a, u);
    return std::clamp(p, 0.0, 1.0);
}

// tr(rho^2) = (1 + |a|^2)/2.
inline double purity(const BlochVector& a) { return 0.5 * (1.0 + dot(a, a)); }

// Uhlmann fidelity against a pure reference state a_in.
inline double fidelity(const BlochVector& a_in, const BlochVector& a_out) {
    if (!is_pure(a_in)) {
        throw InvalidArgument("fidelity reference state must be pure (|a_in| = 1)");
    }
    const double overlap = 0.5 * (1.0 + dot(a_in, a_out));
    return std::sqrt(std::clamp(overlap, 0.0, 1.0));
}

} // namespace qvfv
