#include "srpl/cmdp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "srpl/scenario.hpp"

namespace srpl {

void CmdpConfig::validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("cmdp.gamma must lie in [0, 1)");
    if (!(kappa >= 0.0)) throw std::invalid_argument("cmdp.kappa must be nonnegative");
    if (max_episode_steps <= 0) throw std::invalid_argument("cmdp.max_episode_steps must be positive");
}

std::string_view to_string(Outcome o) {
    switch (o) {
        case Outcome::success: return "success";
        case Outcome::crash: return "crash";
        case Outcome::off_road: return "off_road";
        case Outcome::timeout: return "timeout";
    }
    return "unknown";
}

void Trajectory::validate() const {
    if (steps.empty()) throw std::invalid_argument("trajectory is empty");
    for (std::size_t t = 0; t < steps.size(); ++t) {
        const auto& s = steps[t];
        if (s.terminal && s.truncated) throw std::invalid_argument("step is both terminal and truncated");
        if (t + 1 < steps.size() && (s.terminal || s.truncated))
            throw std::invalid_argument("only the final step may end the episode");
        if (s.cost < 0.0) throw std::invalid_argument("negative cost at step " + std::to_string(t));
    }
}

namespace {

template <typename Field>
double discounted_sum(const Trajectory& traj, double gamma, Field field) {
    if (traj.steps.empty()) throw std::invalid_argument("trajectory is empty");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
    double total = 0.0;
    double weight = 1.0;
    for (const auto& s : traj.steps) {
        total += weight * field(s);
        weight *= gamma;
    }
    return total;
}

}  // namespace

double discounted_return(const Trajectory& traj, double gamma) {
    return discounted_sum(traj, gamma, [](const StepRecord& s) { return s.reward; });
}

double discounted_cost(const Trajectory& traj, double gamma) {
    return discounted_sum(traj, gamma, [](const StepRecord& s) { return s.cost; });
}

EpisodeMetrics episode_metrics(const Trajectory& traj, const ScenarioSpec& spec) {
    traj.validate();
    EpisodeMetrics m;
    for (const auto& s : traj.steps) {
        m.total_reward += s.reward;
        m.total_cost += s.cost;
    }
    const double start = spec.route.project({spec.spawn.x, spec.spawn.y}).arc;
    const double end = spec.route.project(traj.steps.back().position).arc;
    m.route_completion = std::clamp((end - start) / spec.route_length, 0.0, 1.0);
    m.success = traj.outcome == Outcome::success ? 1 : 0;
    m.out_of_road = traj.outcome == Outcome::off_road ? 1 : 0;
    return m;
}

}  // namespace srpl
