#include "srpl/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "srpl/rng.hpp"

namespace srpl {

using nlohmann::json;

std::string_view to_string(Domain d) { return d == Domain::dense ? "dense" : "sparse"; }

Domain parse_domain(std::string_view s) {
    if (s == "dense") return Domain::dense;
    if (s == "sparse") return Domain::sparse;
    throw std::invalid_argument("unknown domain '" + std::string(s) + "'");
}

GeneratorPreset preset_for(Domain d) {
    GeneratorPreset p;
    if (d == Domain::dense) {
        p.mean_obstacles = 85.18 * kObstacleScale;
        p.mean_route_length = 130.45 * kLengthScale;
        p.max_curvature = 0.03;
    } else {
        p.mean_obstacles = 52.18 * kObstacleScale;
        p.mean_route_length = 90.42 * kLengthScale;
        p.max_curvature = 0.012;
    }
    return p;
}

namespace {

constexpr double kRouteStep = 2.0;
constexpr double kVehicleClearance = 3.0;  // free lateral gap a car needs
constexpr double kGapWindow = 8.0;         // arc window checked for blocking pairs

Polyline make_route(const GeneratorPreset& p, Rng& rng, double length) {
    const int n = std::max(2, static_cast<int>(std::ceil(length / kRouteStep)));
    const double step = length / n;
    const double h0 = uniform(rng, -kPi, kPi);
    double heading = h0;
    double curvature = 0.0;
    double next_change = 0.0;
    std::vector<Vec2> pts;
    pts.reserve(static_cast<std::size_t>(n) + 1);
    Vec2 cur{0.0, 0.0};
    pts.push_back(cur);
    for (int i = 0; i < n; ++i) {
        const double arc = i * step;
        if (arc >= next_change) {
            curvature = uniform(rng, -p.max_curvature, p.max_curvature);
            next_change += p.curvature_piece;
        }
        double h = heading + curvature * step;
        if (std::abs(h - h0) > p.max_total_turn) h = heading;
        // Straight launch segment so spawn sits on a well-defined tangent.
        if (arc < 6.0) h = heading;
        heading = h;
        cur = cur + step * unit_from_angle(heading);
        pts.push_back(cur);
    }
    return Polyline(std::move(pts));
}

double largest_free_gap(std::vector<std::pair<double, double>> blocked, double halfwidth) {
    std::sort(blocked.begin(), blocked.end());
    double best = 0.0;
    double edge = -halfwidth;
    for (const auto& [lo, hi] : blocked) {
        if (lo > edge) best = std::max(best, std::min(lo, halfwidth) - edge);
        edge = std::max(edge, hi);
        if (edge >= halfwidth) break;
    }
    if (edge < halfwidth) best = std::max(best, halfwidth - edge);
    return best;
}

struct Placed {
    double arc;
    double lateral;
    double radius;
};

}  // namespace

ScenarioSpec generate_scenario(Domain domain, std::uint64_t seed) {
    return generate_scenario(preset_for(domain), domain, seed);
}

ScenarioSpec generate_scenario(const GeneratorPreset& p, Domain domain, std::uint64_t seed) {
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(domain) + 17);
    ScenarioSpec spec;
    spec.id = seed;
    spec.domain = domain;
    spec.corridor_halfwidth = p.corridor_halfwidth;
    spec.goal_radius = p.goal_radius;

    const double length = p.mean_route_length * uniform(rng, 1.0 - p.length_spread, 1.0 + p.length_spread);
    spec.route = make_route(p, rng, length);
    spec.route_length = spec.route.length();
    const Vec2 start = spec.route.points().front();
    spec.spawn = {start.x, start.y, spec.route.heading_at(0.0)};

    const double hw = p.corridor_halfwidth;
    const int count = poisson(rng, p.mean_obstacles);
    std::vector<Placed> intruders;
    const double arc_hi = std::max(p.clear_start, spec.route_length - p.clear_goal);
    for (int k = 0; k < count; ++k) {
        const double radius = uniform(rng, p.radius_min, p.radius_max);
        const bool moving = uniform01(rng) < p.moving_fraction;
        Obstacle ob;
        ob.radius = radius;
        if (moving) {
            const double arc = uniform(rng, p.clear_start, arc_hi);
            const double lateral = uniform(rng, -(hw - 1.0), hw - 1.0);
            const double speed = uniform(rng, 1.0, 4.0);
            const double h = spec.route.heading_at(arc);
            const Vec2 tangent = unit_from_angle(h);
            const Vec2 normal{-tangent.y, tangent.x};
            ob.center = spec.route.point_at(arc) + lateral * normal;
            ob.velocity = speed * tangent;
        } else {
            Placed chosen{};
            bool ok = false;
            for (int attempt = 0; attempt < 20 && !ok; ++attempt) {
                chosen = {uniform(rng, p.clear_start, arc_hi), uniform(rng, -(hw + 3.0), hw + 3.0), radius};
                if (std::abs(chosen.lateral) - radius >= hw) {
                    ok = true;
                    break;
                }
                std::vector<std::pair<double, double>> blocked{{chosen.lateral - radius - 1.0, chosen.lateral + radius + 1.0}};
                for (const auto& o : intruders)
                    if (std::abs(o.arc - chosen.arc) < kGapWindow)
                        blocked.emplace_back(o.lateral - o.radius - 1.0, o.lateral + o.radius + 1.0);
                ok = largest_free_gap(blocked, hw) >= kVehicleClearance;
            }
            if (!ok) chosen.lateral = (chosen.lateral < 0.0 ? -1.0 : 1.0) * (hw + radius + 1.0);
            if (std::abs(chosen.lateral) - radius < hw) intruders.push_back(chosen);
            const double h = spec.route.heading_at(chosen.arc);
            const Vec2 tangent = unit_from_angle(h);
            const Vec2 normal{-tangent.y, tangent.x};
            ob.center = spec.route.point_at(chosen.arc) + chosen.lateral * normal;
        }
        spec.obstacles.push_back(ob);
    }
    return spec;
}

std::vector<ScenarioSpec> generate_scenario_set(Domain domain, std::uint64_t base_seed, std::size_t count) {
    std::vector<ScenarioSpec> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(generate_scenario(domain, base_seed + i));
    return out;
}

std::string to_json_line(const ScenarioSpec& spec) {
    json route = json::array();
    for (const auto& p : spec.route.points()) route.push_back({p.x, p.y});
    json obstacles = json::array();
    for (const auto& o : spec.obstacles)
        obstacles.push_back({{"c", {o.center.x, o.center.y}}, {"r", o.radius}, {"v", {o.velocity.x, o.velocity.y}}});
    json j = {
        {"id", spec.id},
        {"domain", std::string(to_string(spec.domain))},
        {"route", route},
        {"halfwidth", spec.corridor_halfwidth},
        {"obstacles", obstacles},
        {"spawn", {spec.spawn.x, spec.spawn.y, spec.spawn.heading}},
        {"goal_radius", spec.goal_radius},
        {"route_length", spec.route_length},
    };
    return j.dump();
}

ScenarioSpec scenario_from_json_line(std::string_view line) {
    const json j = json::parse(line);
    ScenarioSpec spec;
    spec.id = j.at("id").get<std::uint64_t>();
    spec.domain = parse_domain(j.at("domain").get<std::string>());
    std::vector<Vec2> pts;
    for (const auto& p : j.at("route")) pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    spec.route = Polyline(std::move(pts));
    spec.corridor_halfwidth = j.at("halfwidth").get<double>();
    for (const auto& o : j.at("obstacles")) {
        Obstacle ob;
        ob.center = {o.at("c").at(0).get<double>(), o.at("c").at(1).get<double>()};
        ob.radius = o.at("r").get<double>();
        ob.velocity = {o.at("v").at(0).get<double>(), o.at("v").at(1).get<double>()};
        spec.obstacles.push_back(ob);
    }
    const auto& sp = j.at("spawn");
    spec.spawn = {sp.at(0).get<double>(), sp.at(1).get<double>(), sp.at(2).get<double>()};
    spec.goal_radius = j.at("goal_radius").get<double>();
    spec.route_length = j.at("route_length").get<double>();
    if (std::abs(spec.route_length - spec.route.length()) > 1e-6 * std::max(1.0, spec.route_length))
        throw std::invalid_argument("route_length does not match the route polyline");
    return spec;
}

void write_scenarios(std::ostream& out, const std::vector<ScenarioSpec>& specs) {
    for (const auto& s : specs) out << to_json_line(s) << '\n';
}

std::vector<ScenarioSpec> read_scenarios(std::istream& in) {
    std::vector<ScenarioSpec> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(scenario_from_json_line(line));
    }
    return out;
}

std::vector<ScenarioSpec> load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file " + path);
    return read_scenarios(in);
}

void save_scenario_file(const std::string& path, const std::vector<ScenarioSpec>& specs) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write scenario file " + path);
    write_scenarios(out, specs);
}

}  // namespace srpl
