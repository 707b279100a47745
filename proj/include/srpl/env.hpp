#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "srpl/cmdp.hpp"
#include "srpl/scenario.hpp"

namespace srpl {

using Action = std::array<float, 2>;  // (acceleration, steering), each in [-1, 1]

/// Observation vector layout:
///   [obstacle rays | boundary rays | ego (steer, heading error, speed, lateral) | waypoints (x, y) ...]
/// Every component is normalized to [0, 1].
struct ObservationLayout {
    int n_lidar = 24;
    int n_boundary = 8;
    int n_ego = 4;
    int n_waypoints = 10;
    double range_max = 50.0;
    double waypoint_spacing = 3.0;

    int total_dim() const { return n_lidar + n_boundary + n_ego + 2 * n_waypoints; }
    int lidar_offset() const { return 0; }
    int boundary_offset() const { return n_lidar; }
    int ego_offset() const { return n_lidar + n_boundary; }
    int waypoint_offset() const { return n_lidar + n_boundary + n_ego; }
    void validate() const;
};

struct RewardWeights {
    double w_drive = 1.0;
    double w_heading = 1.0;
    double w_lat = 1.0;
    double r_success = 10.0;
    double r_fail = -5.0;
    double w_crash = 2.0;
    double w_oor = 2.0;
    double lateral_cap = 2.0;
    // Heading and lateral penalties are rates (per second) integrated over the
    // step, so their weight relative to progress does not depend on dt.
    bool integrate_penalties = true;

    void validate() const;
};

struct VehicleParams {
    double dt = 0.1;
    double wheelbase = 2.5;
    double accel_max = 4.0;
    double steer_max = 0.5;
    double speed_max = 12.0;
    double radius = 1.0;  // collision disc around the reference point

    void validate() const;
};

struct VehicleState {
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;
    double speed = 0.0;
    double steer = 0.0;
};

struct EnvConfig {
    ObservationLayout layout;
    RewardWeights weights;
    VehicleParams vehicle;
    int max_episode_steps = 250;

    void validate() const;
};

struct StepResult {
    std::vector<float> observation;
    double reward = 0.0;
    double cost = 0.0;
    bool terminal = false;
    bool truncated = false;
    bool crash = false;
    bool off_road = false;
    double progress = 0.0;
    std::optional<Outcome> outcome;  // set once the episode ends
};

// Kinematic bicycle update; the action is clamped to [-1, 1] and mapped to
// physical acceleration and steering angle.
VehicleState advance_vehicle(const VehicleState& s, const Action& a, const VehicleParams& p);

/// Obstacle rays followed by boundary rays, normalized by range_max.
/// Obstacle positions are evaluated at `time`.
std::vector<float> lidar_scan(const VehicleState& vehicle, const ScenarioSpec& spec,
                              const ObservationLayout& layout, double time = 0.0);

std::vector<float> build_observation(const VehicleState& vehicle, const ScenarioSpec& spec,
                                     const EnvConfig& cfg, double time);

class DrivingEnv {
public:
    explicit DrivingEnv(EnvConfig cfg = {});

    std::vector<float> reset(const ScenarioSpec& spec);
    // Throws std::logic_error if the episode has ended or reset was never called.
    StepResult step(const Action& action);

    const EnvConfig& config() const { return cfg_; }
    const ScenarioSpec& scenario() const { return spec_; }
    const VehicleState& vehicle() const { return vehicle_; }
    double time() const { return steps_ * cfg_.vehicle.dt; }
    int steps() const { return steps_; }
    bool done() const { return done_; }
    double route_arc() const { return arc_; }
    std::optional<Outcome> outcome() const { return outcome_; }
    std::vector<float> observe() const;

private:
    EnvConfig cfg_;
    ScenarioSpec spec_;
    VehicleState vehicle_;
    double arc_ = 0.0;
    int steps_ = 0;
    bool active_ = false;
    bool done_ = false;
    std::optional<Outcome> outcome_;
};

// Route-following reference controller with obstacle-aware lateral offsets
// and a speed governor. Uses privileged scenario knowledge.
Action expert_action(const DrivingEnv& env);

// Pure pursuit on vehicle-frame waypoints. No waypoints yields a zero command.
Action pursue_waypoints(std::span<const Vec2> local_waypoints, double speed, double target_speed,
                        const VehicleParams& params);

}  // namespace srpl
