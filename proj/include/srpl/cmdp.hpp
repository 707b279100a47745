#pragma once

#include <array>
#include <string_view>
#include <vector>

#include "srpl/geometry.hpp"

namespace srpl {

struct ScenarioSpec;

struct CmdpConfig {
    double gamma = 0.99;
    double kappa = 1.0;  // episode-cost budget
    int max_episode_steps = 250;

    void validate() const;
};

enum class Outcome { success, crash, off_road, timeout };

std::string_view to_string(Outcome o);

struct StepRecord {
    std::vector<float> state;  // observation the action was taken from
    std::array<float, 2> action{};
    double reward = 0.0;
    double cost = 0.0;
    bool terminal = false;
    bool truncated = false;
    Vec2 position{};  // vehicle position after the step
};

struct Trajectory {
    std::vector<StepRecord> steps;
    Outcome outcome = Outcome::timeout;

    // Throws std::invalid_argument when empty or when an interior step is
    // marked terminal/truncated.
    void validate() const;
};

struct EpisodeMetrics {
    double total_reward = 0.0;
    double total_cost = 0.0;
    double route_completion = 0.0;  // clamped to [0, 1]
    int success = 0;
    int out_of_road = 0;
};

/// Sum of gamma^t * r_t. Requires 0 <= gamma < 1 and a nonempty trajectory.
double discounted_return(const Trajectory& traj, double gamma);
double discounted_cost(const Trajectory& traj, double gamma);

// Undiscounted totals plus route completion measured from the final position's
// projection onto the scenario route.
EpisodeMetrics episode_metrics(const Trajectory& traj, const ScenarioSpec& spec);

}  // namespace srpl
