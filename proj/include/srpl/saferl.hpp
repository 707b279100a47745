#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "srpl/cmdp.hpp"
#include "srpl/dense_net.hpp"
#include "srpl/env.hpp"
#include "srpl/s2c.hpp"

namespace srpl {

enum class Algorithm { ppolag, p3o, oncrpo };

std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view s);

struct AlgoConfig {
    double clip = 0.2;
    double lambda_gae = 0.95;
    double lr_lambda = 0.035;
    double lambda_init = 0.0;
    double p3o_penalty = 2.0;
    double oncrpo_eta = -1.0;  // negative means 0.5 * kappa
    int epochs = 4;
    int minibatch = 512;
    int steps_per_batch = 8192;
    int num_envs = 8;
    double policy_lr = 3e-4;
    double critic_lr = 1e-3;
    double max_grad_norm = 0.5;
    double initial_log_std = -0.5;
    std::vector<int> hidden = {128, 64, 64};
    bool critics_use_augmented = true;
    bool discounted_cost_estimate = false;

    double eta(double kappa) const { return oncrpo_eta < 0.0 ? 0.5 * kappa : oncrpo_eta; }
    void validate() const;
};

/// Policy, critics, constraint-handling state and the optional S2C hook.
struct PolicyBundle {
    DenseNet<float> policy;         // gaussian head, tanh-squashed samples
    DenseNet<float> reward_critic;  // linear head, one output
    DenseNet<float> cost_critic;
    double lambda = 0.0;
    double lr_lambda = 0.035;
    double p3o_penalty = 2.0;
    double oncrpo_eta = 0.5;
    bool critics_use_augmented = true;
    int raw_dim = 0;
    std::optional<S2CModel> s2c;

    static PolicyBundle create(int raw_dim, const AlgoConfig& cfg, double kappa, const S2CConfig* s2c_cfg, Rng& rng);

    int policy_input_dim() const { return policy.input_dim(); }
    bool srpl() const { return s2c.has_value(); }

    // Raw rows -> policy input rows (augmented with the target S2C model when
    // SRPL is enabled). Throws on raw dimension mismatch.
    std::vector<float> policy_inputs(std::span<const float> raw, std::size_t batch) const;
    // Deterministic action: tanh of the gaussian mean.
    Action mean_action(std::span<const float> raw) const;
};

/// Flattened on-policy rollout. Steps of one environment are contiguous; an
/// episode boundary is marked by `terminal` (true end, value 0) or
/// `truncated` (time limit or batch cut, bootstrap from the critic).
struct RolloutBatch {
    int raw_dim = 0;
    int input_dim = 0;
    std::vector<float> raw;
    std::vector<float> inputs;
    std::vector<float> pre_tanh;  // sampled gaussian values, 2 per step
    std::vector<float> logp;      // gaussian log density of pre_tanh at collection
    std::vector<double> rewards;
    std::vector<double> costs;
    std::vector<std::uint8_t> terminal;
    std::vector<std::uint8_t> truncated;
    std::vector<double> value_r, value_c;
    std::vector<double> bootstrap_r, bootstrap_c;  // next-state values at truncations
    std::vector<double> adv_r, adv_c, ret_r, ret_c;

    // Completed episodes inside this batch.
    std::vector<double> episode_returns;
    std::vector<double> episode_costs;
    std::vector<double> episode_discounted_costs;
    std::vector<int> episode_success;

    std::size_t size() const { return rewards.size(); }
    const std::vector<float>& critic_inputs(bool augmented) const { return augmented ? inputs : raw; }
};

/// Generalized advantage estimation for both reward and cost streams.
/// Terminal steps bootstrap 0; truncated steps bootstrap bootstrap_r/c.
void compute_gae(RolloutBatch& batch, double gamma, double lambda_gae);

// Reward advantages: zero mean, unit variance. Cost advantages: zero mean.
void normalize_advantages(RolloutBatch& batch);

// Batch estimate of the episode cost used by the dual/penalty/switch rules.
double episode_cost_estimate(const RolloutBatch& batch, bool discounted);

struct PolicyLoss {
    double loss = 0.0;
    double surrogate_r = 0.0;  // mean clipped reward surrogate
    double surrogate_c = 0.0;  // mean pessimistic clipped cost surrogate
    double hinge = 0.0;        // P3O hinge value
    bool cost_branch = false;  // OnCRPO took the cost step
    double clip_fraction = 0.0;
};

/// Policy loss for one minibatch and, when `grads` is given, its gradient
/// with respect to the policy parameters. `lambda` is read from the bundle.
PolicyLoss policy_loss(Algorithm algo, const PolicyBundle& bundle, const RolloutBatch& batch,
                       std::span<const std::size_t> indices, double cost_estimate, double kappa, double clip,
                       std::vector<float>* grads);

// 0.5 * mean squared error against `targets`.
double critic_loss(const DenseNet<float>& critic, std::span<const float> inputs, int input_dim,
                   std::span<const double> targets, std::span<const std::size_t> indices, std::vector<float>* grads);

struct Optimizers {
    Adam<float> policy;
    Adam<float> reward_critic;
    Adam<float> cost_critic;
};

Optimizers make_optimizers(const PolicyBundle& bundle, const AlgoConfig& cfg);

struct UpdateDiagnostics {
    double cost_estimate = 0.0;
    double lambda_before = 0.0;
    double lambda_after = 0.0;
    double policy_loss = 0.0;
    double reward_critic_loss = 0.0;
    double cost_critic_loss = 0.0;
    double hinge = 0.0;
    bool penalty_active = false;
    bool cost_branch = false;
    double clip_fraction = 0.0;
};

// Shared clipped-surrogate update loop (epochs x shuffled minibatches) for
// the policy and both critics.
UpdateDiagnostics run_policy_update(Algorithm algo, PolicyBundle& bundle, Optimizers& opt, const RolloutBatch& batch,
                                    const CmdpConfig& cmdp, const AlgoConfig& cfg, Rng& rng);

// lambda <- max(0, lambda + lr_lambda * (cost_estimate - kappa))
void dual_update(PolicyBundle& bundle, double cost_estimate, double kappa);

UpdateDiagnostics ppolag_update(PolicyBundle& bundle, Optimizers& opt, const RolloutBatch& batch,
                                const CmdpConfig& cmdp, const AlgoConfig& cfg, Rng& rng);
UpdateDiagnostics p3o_update(PolicyBundle& bundle, Optimizers& opt, const RolloutBatch& batch, const CmdpConfig& cmdp,
                             const AlgoConfig& cfg, Rng& rng);
UpdateDiagnostics oncrpo_update(PolicyBundle& bundle, Optimizers& opt, const RolloutBatch& batch,
                                const CmdpConfig& cmdp, const AlgoConfig& cfg, Rng& rng);

}  // namespace srpl
