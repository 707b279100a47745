#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "srpl/geometry.hpp"

namespace srpl {

enum class Domain { dense, sparse };

std::string_view to_string(Domain d);
Domain parse_domain(std::string_view s);

struct Pose {
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;
};

/// Constant-velocity disc; parked obstacles have zero velocity.
struct Obstacle {
    Vec2 center;
    double radius = 1.0;
    Vec2 velocity;

    Vec2 position_at(double t) const { return center + t * velocity; }
    bool moving() const { return velocity.x != 0.0 || velocity.y != 0.0; }
};

struct ScenarioSpec {
    std::uint64_t id = 0;
    Domain domain = Domain::sparse;
    Polyline route;
    double corridor_halfwidth = 5.0;
    std::vector<Obstacle> obstacles;
    Pose spawn;
    double goal_radius = 6.0;
    double route_length = 0.0;

    Vec2 goal() const { return route.points().back(); }
};

// Knobs of the procedural generator. Dense and sparse presets keep the
// obstacle-count and route-length ratios of the two reference driving
// datasets (85.18 vs 52.18 vehicles, 130.45 vs 90.42 m tracks), scaled down by
// kObstacleScale and kLengthScale respectively.
struct GeneratorPreset {
    double mean_obstacles = 0.0;
    double mean_route_length = 0.0;
    double length_spread = 0.25;    // uniform +/- fraction around the mean
    double max_curvature = 0.0;     // 1/m, per curvature piece
    double curvature_piece = 15.0;  // m between curvature changes
    double max_total_turn = 1.75;   // rad, cumulative heading budget
    double moving_fraction = 0.3;
    double corridor_halfwidth = 5.0;
    double goal_radius = 6.0;
    double radius_min = 0.8;
    double radius_max = 1.6;
    double clear_start = 15.0;  // no obstacle closer than this (arc) to spawn
    double clear_goal = 6.0;
};

inline constexpr double kObstacleScale = 0.1;
inline constexpr double kLengthScale = 0.5;

GeneratorPreset preset_for(Domain d);

ScenarioSpec generate_scenario(Domain domain, std::uint64_t seed);
ScenarioSpec generate_scenario(const GeneratorPreset& preset, Domain domain, std::uint64_t seed);

// Scenarios with ids base_seed .. base_seed + count - 1.
std::vector<ScenarioSpec> generate_scenario_set(Domain domain, std::uint64_t base_seed, std::size_t count);

// One JSON object per line.
std::string to_json_line(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json_line(std::string_view line);
void write_scenarios(std::ostream& out, const std::vector<ScenarioSpec>& specs);
std::vector<ScenarioSpec> read_scenarios(std::istream& in);
std::vector<ScenarioSpec> load_scenario_file(const std::string& path);
void save_scenario_file(const std::string& path, const std::vector<ScenarioSpec>& specs);

}  // namespace srpl
