#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace srpl {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(Vec2 a, Vec2 b) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline Vec2 unit_from_angle(double a) { return {std::cos(a), std::sin(a)}; }

// Wraps to (-pi, pi].
inline double wrap_angle(double a) {
    a = std::fmod(a + kPi, 2.0 * kPi);
    if (a <= 0.0) a += 2.0 * kPi;
    return a - kPi;
}

struct RouteProjection {
    double arc = 0.0;       // arc length of the closest point
    double lateral = 0.0;   // signed, positive to the left of travel
    double distance = 0.0;  // unsigned distance to the polyline
    double heading = 0.0;   // tangent heading at the closest point
    std::size_t segment = 0;
};

/// Piecewise-linear route with cumulative arc length.
class Polyline {
public:
    Polyline() = default;
    explicit Polyline(std::vector<Vec2> points);

    const std::vector<Vec2>& points() const { return points_; }
    double length() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
    std::size_t segment_count() const { return points_.size() < 2 ? 0 : points_.size() - 1; }

    // Closest point over all segments; arc is clamped to [0, length()].
    RouteProjection project(Vec2 p) const;
    Vec2 point_at(double arc) const;
    double heading_at(double arc) const;

private:
    std::size_t segment_at(double arc) const;

    std::vector<Vec2> points_;
    std::vector<double> cumulative_;
};

// Distance along a unit ray to the surface of a disc. Origins inside the disc
// report 0; misses report +inf.
double ray_disc_distance(Vec2 origin, Vec2 dir, Vec2 center, double radius);

// Distance along a unit ray from an origin inside the corridor (all points
// within `halfwidth` of the route) to the point where it leaves the corridor.
// Returns 0 if the origin is already outside; capped at max_range.
double ray_corridor_exit(const Polyline& route, double halfwidth, Vec2 origin, Vec2 dir,
                         double max_range);

}  // namespace srpl
