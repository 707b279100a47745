#include "srpl/geometry.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

namespace srpl {

Polyline::Polyline(std::vector<Vec2> points) : points_(std::move(points)) {
    if (points_.size() < 2) throw std::invalid_argument("polyline needs at least two points");
    cumulative_.resize(points_.size());
    cumulative_[0] = 0.0;
    for (std::size_t i = 1; i < points_.size(); ++i) {
        const double len = norm(points_[i] - points_[i - 1]);
        if (!(len > 0.0)) throw std::invalid_argument("polyline has a zero-length segment");
        cumulative_[i] = cumulative_[i - 1] + len;
    }
}

RouteProjection Polyline::project(Vec2 p) const {
    RouteProjection best;
    best.distance = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
        const Vec2 a = points_[i];
        const Vec2 ab = points_[i + 1] - a;
        const double len = cumulative_[i + 1] - cumulative_[i];
        const Vec2 dir = (1.0 / len) * ab;
        const double u = std::clamp(dot(p - a, dir), 0.0, len);
        const Vec2 closest = a + u * dir;
        const double d = norm(p - closest);
        if (d < best.distance) {
            best.distance = d;
            best.arc = cumulative_[i] + u;
            best.lateral = cross(dir, p - a);
            best.heading = std::atan2(dir.y, dir.x);
            best.segment = i;
        }
    }
    return best;
}

std::size_t Polyline::segment_at(double arc) const {
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), arc);
    const auto idx = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - cumulative_.begin() - 1, 0));
    return std::min(idx, segment_count() - 1);
}

Vec2 Polyline::point_at(double arc) const {
    arc = std::clamp(arc, 0.0, length());
    const std::size_t i = segment_at(arc);
    const double len = cumulative_[i + 1] - cumulative_[i];
    const double t = (arc - cumulative_[i]) / len;
    return points_[i] + t * (points_[i + 1] - points_[i]);
}

double Polyline::heading_at(double arc) const {
    const std::size_t i = segment_at(std::clamp(arc, 0.0, length()));
    const Vec2 d = points_[i + 1] - points_[i];
    return std::atan2(d.y, d.x);
}

namespace {

struct Interval {
    double lo;
    double hi;
};

// Chord of a ray's supporting line through a disc, as ray parameters.
bool line_disc_interval(Vec2 origin, Vec2 dir, Vec2 center, double radius, Interval& out) {
    const Vec2 oc = origin - center;
    const double b = dot(oc, dir);
    const double c = dot(oc, oc) - radius * radius;
    const double disc = b * b - c;
    if (disc < 0.0) return false;
    const double s = std::sqrt(disc);
    out = {-b - s, -b + s};
    return true;
}

// Slab test against the rectangle swept by a segment.
bool line_rect_interval(Vec2 origin, Vec2 dir, Vec2 a, Vec2 axis, double len, double halfwidth,
                        Interval& out) {
    const Vec2 normal{-axis.y, axis.x};
    const Vec2 rel = origin - a;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    auto slab = [&](double pos, double vel, double smin, double smax) {
        if (std::abs(vel) < 1e-15) return pos >= smin && pos <= smax;
        double t0 = (smin - pos) / vel;
        double t1 = (smax - pos) / vel;
        if (t0 > t1) std::swap(t0, t1);
        lo = std::max(lo, t0);
        hi = std::min(hi, t1);
        return lo <= hi;
    };
    if (!slab(dot(rel, axis), dot(dir, axis), 0.0, len)) return false;
    if (!slab(dot(rel, normal), dot(dir, normal), -halfwidth, halfwidth)) return false;
    out = {lo, hi};
    return true;
}

}  // namespace

double ray_disc_distance(Vec2 origin, Vec2 dir, Vec2 center, double radius) {
    Interval iv{};
    if (!line_disc_interval(origin, dir, center, radius, iv)) return std::numeric_limits<double>::infinity();
    if (iv.hi < 0.0) return std::numeric_limits<double>::infinity();
    return std::max(iv.lo, 0.0);
}

double ray_corridor_exit(const Polyline& route, double halfwidth, Vec2 origin, Vec2 dir,
                         double max_range) {
    const auto& pts = route.points();
    std::vector<Interval> spans;
    spans.reserve(pts.size() * 3);
    const double reach_limit = max_range + halfwidth;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const Vec2 a = pts[i];
        const Vec2 ab = pts[i + 1] - a;
        const double len = norm(ab);
        const Vec2 axis = (1.0 / len) * ab;
        const double u = std::clamp(dot(origin - a, axis), 0.0, len);
        if (norm(origin - (a + u * axis)) > reach_limit) continue;
        Interval iv{};
        if (line_rect_interval(origin, dir, a, axis, len, halfwidth, iv) && iv.hi > 0.0) spans.push_back(iv);
        if (line_disc_interval(origin, dir, a, halfwidth, iv) && iv.hi > 0.0) spans.push_back(iv);
        if (i + 2 == pts.size() && line_disc_interval(origin, dir, pts[i + 1], halfwidth, iv) && iv.hi > 0.0)
            spans.push_back(iv);
    }
    std::sort(spans.begin(), spans.end(), [](const Interval& l, const Interval& r) { return l.lo < r.lo; });
    double reach = 0.0;
    bool inside = false;
    for (const Interval& iv : spans) {
        if (iv.lo > reach + 1e-12) break;
        if (iv.lo <= 0.0) inside = true;
        reach = std::max(reach, iv.hi);
        if (reach >= max_range) return max_range;
    }
    return inside ? std::min(reach, max_range) : 0.0;
}

}  // namespace srpl
