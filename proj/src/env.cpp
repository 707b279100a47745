#include "srpl/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace srpl {

void ObservationLayout::validate() const {
    if (n_lidar <= 0 || n_boundary <= 0 || n_waypoints <= 0)
        throw std::invalid_argument("observation layout ray and waypoint counts must be positive");
    if (n_ego != 4) throw std::invalid_argument("observation layout n_ego must be 4");
    if (!(range_max > 0.0) || !(waypoint_spacing > 0.0))
        throw std::invalid_argument("observation layout ranges must be positive");
}

void RewardWeights::validate() const {
    for (double w : {w_drive, w_heading, w_lat, w_crash, w_oor, lateral_cap})
        if (!(w >= 0.0)) throw std::invalid_argument("reward weights must be nonnegative");
}

void VehicleParams::validate() const {
    for (double v : {dt, wheelbase, accel_max, steer_max, speed_max, radius})
        if (!(v > 0.0)) throw std::invalid_argument("vehicle parameters must be positive");
}

void EnvConfig::validate() const {
    layout.validate();
    weights.validate();
    vehicle.validate();
    if (max_episode_steps <= 0) throw std::invalid_argument("max_episode_steps must be positive");
}

VehicleState advance_vehicle(const VehicleState& s, const Action& a, const VehicleParams& p) {
    if (!std::isfinite(a[0]) || !std::isfinite(a[1])) throw std::invalid_argument("non-finite action");
    const double accel = std::clamp<double>(a[0], -1.0, 1.0) * p.accel_max;
    const double steer = std::clamp<double>(a[1], -1.0, 1.0) * p.steer_max;
    VehicleState n = s;
    n.steer = steer;
    n.speed = std::clamp(s.speed + accel * p.dt, 0.0, p.speed_max);
    n.x += n.speed * std::cos(s.heading) * p.dt;
    n.y += n.speed * std::sin(s.heading) * p.dt;
    n.heading = wrap_angle(s.heading + n.speed / p.wheelbase * std::tan(steer) * p.dt);
    return n;
}

namespace {

float unit_clamp(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

}  // namespace

std::vector<float> lidar_scan(const VehicleState& vehicle, const ScenarioSpec& spec,
                              const ObservationLayout& layout, double time) {
    std::vector<float> out(static_cast<std::size_t>(layout.n_lidar + layout.n_boundary));
    const Vec2 origin{vehicle.x, vehicle.y};
    const double range = layout.range_max;

    std::vector<Vec2> centers;
    std::vector<double> radii;
    for (const auto& ob : spec.obstacles) {
        const Vec2 c = ob.position_at(time);
        if (norm(c - origin) - ob.radius > range) continue;
        centers.push_back(c);
        radii.push_back(ob.radius);
    }
    for (int k = 0; k < layout.n_lidar; ++k) {
        const Vec2 dir = unit_from_angle(vehicle.heading + 2.0 * kPi * k / layout.n_lidar);
        double d = range;
        for (std::size_t i = 0; i < centers.size(); ++i) d = std::min(d, ray_disc_distance(origin, dir, centers[i], radii[i]));
        out[static_cast<std::size_t>(k)] = unit_clamp(d / range);
    }
    for (int k = 0; k < layout.n_boundary; ++k) {
        const Vec2 dir = unit_from_angle(vehicle.heading + 2.0 * kPi * k / layout.n_boundary);
        const double d = ray_corridor_exit(spec.route, spec.corridor_halfwidth, origin, dir, range);
        out[static_cast<std::size_t>(layout.n_lidar + k)] = unit_clamp(d / range);
    }
    return out;
}

std::vector<float> build_observation(const VehicleState& vehicle, const ScenarioSpec& spec,
                                     const EnvConfig& cfg, double time) {
    const auto& layout = cfg.layout;
    std::vector<float> obs = lidar_scan(vehicle, spec, layout, time);
    obs.reserve(static_cast<std::size_t>(layout.total_dim()));

    const Vec2 pos{vehicle.x, vehicle.y};
    const RouteProjection proj = spec.route.project(pos);
    const double heading_error = wrap_angle(vehicle.heading - proj.heading);
    obs.push_back(unit_clamp(0.5 * (vehicle.steer / cfg.vehicle.steer_max + 1.0)));
    obs.push_back(unit_clamp(0.5 * (heading_error / kPi + 1.0)));
    obs.push_back(unit_clamp(vehicle.speed / cfg.vehicle.speed_max));
    obs.push_back(unit_clamp(0.5 * (proj.lateral / spec.corridor_halfwidth + 1.0)));

    const double c = std::cos(vehicle.heading);
    const double s = std::sin(vehicle.heading);
    for (int k = 0; k < layout.n_waypoints; ++k) {
        const Vec2 w = spec.route.point_at(proj.arc + (k + 1) * layout.waypoint_spacing);
        const Vec2 d = w - pos;
        const double lx = c * d.x + s * d.y;
        const double ly = -s * d.x + c * d.y;
        obs.push_back(unit_clamp(0.5 * (lx / layout.range_max + 1.0)));
        obs.push_back(unit_clamp(0.5 * (ly / layout.range_max + 1.0)));
    }
    return obs;
}

DrivingEnv::DrivingEnv(EnvConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

std::vector<float> DrivingEnv::reset(const ScenarioSpec& spec) {
    spec_ = spec;
    vehicle_ = {spec.spawn.x, spec.spawn.y, spec.spawn.heading, 0.0, 0.0};
    arc_ = spec_.route.project({vehicle_.x, vehicle_.y}).arc;
    steps_ = 0;
    active_ = true;
    done_ = false;
    outcome_.reset();
    return observe();
}

std::vector<float> DrivingEnv::observe() const { return build_observation(vehicle_, spec_, cfg_, time()); }

StepResult DrivingEnv::step(const Action& action) {
    if (!active_) throw std::logic_error("step called before reset");
    if (done_) throw std::logic_error("step called on a finished episode");

    const auto& w = cfg_.weights;
    vehicle_ = advance_vehicle(vehicle_, action, cfg_.vehicle);
    ++steps_;
    const double t = time();
    const Vec2 pos{vehicle_.x, vehicle_.y};
    const RouteProjection proj = spec_.route.project(pos);

    StepResult r;
    r.progress = proj.arc - arc_;
    arc_ = proj.arc;
    const double heading_error = std::abs(wrap_angle(vehicle_.heading - proj.heading));
    const double lateral = std::min(std::abs(proj.lateral), w.lateral_cap);
    const double span = w.integrate_penalties ? cfg_.vehicle.dt : 1.0;
    r.reward = w.w_drive * r.progress - span * (w.w_heading * heading_error + w.w_lat * lateral);

    for (const auto& ob : spec_.obstacles) {
        if (norm(ob.position_at(t) - pos) < ob.radius + cfg_.vehicle.radius) {
            r.crash = true;
            break;
        }
    }
    r.off_road = proj.distance > spec_.corridor_halfwidth;
    r.cost = w.w_crash * (r.crash ? 1.0 : 0.0) + w.w_oor * (r.off_road ? 1.0 : 0.0);

    const double goal_distance = norm(spec_.goal() - pos);
    if (r.crash || r.off_road) {
        r.terminal = true;
        r.outcome = r.crash ? Outcome::crash : Outcome::off_road;
    } else if (proj.arc >= spec_.route_length && goal_distance <= spec_.goal_radius) {
        r.terminal = true;
        r.outcome = Outcome::success;
        r.reward += w.r_success;
    } else if (steps_ >= cfg_.max_episode_steps) {
        r.truncated = true;
        r.outcome = Outcome::timeout;
        if (goal_distance > 2.0 * spec_.goal_radius) r.reward += w.r_fail;
    }
    if (r.outcome) {
        done_ = true;
        outcome_ = r.outcome;
    }
    r.observation = observe();
    return r;
}

Action pursue_waypoints(std::span<const Vec2> local_waypoints, double speed, double target_speed,
                        const VehicleParams& params) {
    if (local_waypoints.empty()) return {0.0f, 0.0f};
    const double lookahead = std::clamp(0.9 * speed + 3.0, 4.0, 12.0);
    Vec2 target = local_waypoints.back();
    for (const Vec2& w : local_waypoints) {
        if (norm(w) >= lookahead) {
            target = w;
            break;
        }
    }
    const double d = std::max(norm(target), 1e-6);
    const double alpha = std::atan2(target.y, target.x);
    const double steer = std::atan(2.0 * params.wheelbase * std::sin(alpha) / d);
    const double accel = std::clamp(1.5 * (target_speed - speed), -params.accel_max, params.accel_max);
    return {static_cast<float>(std::clamp(accel / params.accel_max, -1.0, 1.0)),
            static_cast<float>(std::clamp(steer / params.steer_max, -1.0, 1.0))};
}

Action expert_action(const DrivingEnv& env) {
    if (env.done()) return {0.0f, 0.0f};
    const auto& spec = env.scenario();
    const auto& veh = env.vehicle();
    const auto& vp = env.config().vehicle;
    const Vec2 pos{veh.x, veh.y};
    const RouteProjection proj = spec.route.project(pos);
    const double arc = proj.arc;
    const double now = env.time();
    constexpr double kCruise = 8.0;
    constexpr double kMargin = 0.8;
    constexpr double kHorizon = 15.0;
    constexpr double kSample = 1.5;
    const double plan_speed = std::max(veh.speed, 4.0);
    const double max_offset = spec.corridor_halfwidth - 1.2;

    // Minimum predicted clearance along a laterally offset copy of the route.
    auto clearance = [&](double offset, double speed) {
        double worst = std::numeric_limits<double>::infinity();
        for (double ds = kSample; ds <= kHorizon; ds += kSample) {
            const double s = arc + ds;
            if (s > spec.route_length + 2.0) break;
            const double h = spec.route.heading_at(s);
            const Vec2 n{-std::sin(h), std::cos(h)};
            const double blend = std::min(1.0, ds / 8.0);
            const double lat = proj.lateral + (offset - proj.lateral) * blend;
            const Vec2 p = spec.route.point_at(s) + lat * n;
            const double t = now + ds / speed;
            for (const auto& ob : spec.obstacles)
                worst = std::min(worst, norm(ob.position_at(t) - p) - ob.radius - vp.radius);
        }
        return worst;
    };

    // Next to an obstacle already: accept paths that do not get any closer.
    double current = std::numeric_limits<double>::infinity();
    for (const auto& ob : spec.obstacles) current = std::min(current, norm(ob.position_at(now) - pos) - ob.radius - vp.radius);
    const double required = std::min(kMargin, std::max(0.0, current - 0.1));

    double best_offset = 0.0;
    double best_score = std::numeric_limits<double>::infinity();
    double fallback_offset = 0.0;
    double fallback_clear = -std::numeric_limits<double>::infinity();
    for (double o = -max_offset; o <= max_offset + 1e-9; o += 0.5) {
        const double clear = clearance(o, plan_speed);
        if (clear > fallback_clear) {
            fallback_clear = clear;
            fallback_offset = o;
        }
        if (clear < required) continue;
        const double score = std::abs(o) + 0.5 * std::abs(o - proj.lateral);
        if (score < best_score) {
            best_score = score;
            best_offset = o;
        }
    }
    double target_speed = kCruise;
    if (!std::isfinite(best_score)) {
        best_offset = fallback_offset;
        target_speed = fallback_clear > 0.2 ? 2.0 : 0.0;
    }

    // Offset path in the vehicle frame.
    std::vector<Vec2> local;
    const double c = std::cos(veh.heading);
    const double s = std::sin(veh.heading);
    for (double ds = 1.0; ds <= 20.0; ds += 1.0) {
        const double sa = arc + ds;
        if (sa > spec.route_length + 4.0) break;
        const double h = spec.route.heading_at(sa);
        const Vec2 n{-std::sin(h), std::cos(h)};
        const double blend = std::min(1.0, ds / 8.0);
        const double lat = proj.lateral + (best_offset - proj.lateral) * blend;
        Vec2 p = sa <= spec.route_length ? spec.route.point_at(sa)
                                         : spec.goal() + (sa - spec.route_length) * unit_from_angle(h);
        p = p + lat * n;
        const Vec2 d = p - pos;
        local.push_back({c * d.x + s * d.y, -s * d.x + c * d.y});
    }
    return pursue_waypoints(local, veh.speed, target_speed, vp);
}

}  // namespace srpl
