#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "srpl/checkpoint.hpp"
#include "srpl/saferl.hpp"
#include "srpl/scenario.hpp"

namespace srpl {

struct TrainConfig {
    Algorithm algorithm = Algorithm::ppolag;
    bool srpl = false;
    Domain domain = Domain::sparse;
    std::uint64_t seed = 0;
    std::int64_t budget_steps = 300000;
    std::size_t train_scenarios = 2000;
    std::uint64_t train_scenario_base = 1000000;
    CmdpConfig cmdp;
    EnvConfig env;
    S2CConfig s2c;
    AlgoConfig algo;

    // Environment config with the episode limit taken from cmdp.
    EnvConfig resolved_env() const;
    void validate() const;
};

struct IterationLog {
    int iteration = 0;
    std::int64_t steps = 0;
    int episodes = 0;
    double mean_return = 0.0;
    double mean_cost = 0.0;
    double success_rate = 0.0;
    double lambda = 0.0;
    double s2c_loss = 0.0;  // NaN when no S2C update ran
    double policy_loss = 0.0;
    bool penalty_active = false;
    bool cost_branch = false;
};

std::string to_json_line(const IterationLog& log);

// Ordered record of the pipeline stages a training run executed.
struct PathTrace {
    std::vector<std::string> events;
    void mark(std::string_view e) { events.emplace_back(e); }
};

struct TrainResult {
    PolicyBundle bundle;
    std::vector<IterationLog> log;
    std::int64_t steps = 0;
    std::uint64_t s2c_pairs = 0;
    double s2c_heldout_loss = 0.0;  // on the last iteration's episodes, before training on them
};

TrainResult train(const TrainConfig& cfg, PathTrace* trace = nullptr,
                  const std::function<void(const IterationLog&)>& on_iteration = {});

// Policy, critics and (with SRPL) the online and target S2C models; the
// metadata block is the resolved config text plus run state.
Checkpoint make_checkpoint(const PolicyBundle& bundle, const TrainConfig& cfg, std::int64_t steps);

struct LoadedPolicy {
    PolicyBundle bundle;
    TrainConfig config;
    std::int64_t steps = 0;
};

LoadedPolicy policy_from_checkpoint(const Checkpoint& ckpt);

}  // namespace srpl
