#include "srpl/saferl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace srpl {

std::string_view to_string(Algorithm a) {
    switch (a) {
        case Algorithm::ppolag: return "ppolag";
        case Algorithm::p3o: return "p3o";
        case Algorithm::oncrpo: return "oncrpo";
    }
    return "unknown";
}

Algorithm parse_algorithm(std::string_view s) {
    if (s == "ppolag") return Algorithm::ppolag;
    if (s == "p3o") return Algorithm::p3o;
    if (s == "oncrpo") return Algorithm::oncrpo;
    throw std::invalid_argument("unknown algorithm '" + std::string(s) + "'");
}

void AlgoConfig::validate() const {
    if (!(clip > 0.0 && clip < 1.0)) throw std::invalid_argument("algo.clip must lie in (0, 1)");
    if (!(lambda_gae >= 0.0 && lambda_gae <= 1.0)) throw std::invalid_argument("algo.lambda_gae must lie in [0, 1]");
    if (!(lr_lambda >= 0.0)) throw std::invalid_argument("algo.lr_lambda must be nonnegative");
    if (!(lambda_init >= 0.0)) throw std::invalid_argument("algo.lambda_init must be nonnegative");
    if (!(p3o_penalty >= 0.0)) throw std::invalid_argument("algo.p3o_penalty must be nonnegative");
    if (epochs <= 0 || minibatch <= 0) throw std::invalid_argument("algo.epochs and algo.minibatch must be positive");
    if (num_envs <= 0 || steps_per_batch < num_envs)
        throw std::invalid_argument("algo.steps_per_batch must be at least algo.num_envs");
    if (!(policy_lr > 0.0 && critic_lr > 0.0)) throw std::invalid_argument("learning rates must be positive");
    if (!(max_grad_norm > 0.0)) throw std::invalid_argument("algo.max_grad_norm must be positive");
    if (hidden.empty()) throw std::invalid_argument("algo.hidden needs at least one layer");
    for (int h : hidden)
        if (h <= 0) throw std::invalid_argument("algo.hidden sizes must be positive");
}

PolicyBundle PolicyBundle::create(int raw_dim, const AlgoConfig& cfg, double kappa, const S2CConfig* s2c_cfg,
                                  Rng& rng) {
    PolicyBundle b;
    b.raw_dim = raw_dim;
    b.lambda = cfg.lambda_init;
    b.lr_lambda = cfg.lr_lambda;
    b.p3o_penalty = cfg.p3o_penalty;
    b.oncrpo_eta = cfg.eta(kappa);
    b.critics_use_augmented = cfg.critics_use_augmented;
    const int in = raw_dim + (s2c_cfg != nullptr ? s2c_cfg->n_bins() : 0);
    const int critic_in = cfg.critics_use_augmented ? in : raw_dim;

    auto sizes = [&](int input, int output) {
        std::vector<int> s{input};
        s.insert(s.end(), cfg.hidden.begin(), cfg.hidden.end());
        s.push_back(output);
        return s;
    };
    b.policy = DenseNet<float>(sizes(in, 2), Head::gaussian);
    b.policy.initialize(rng, std::sqrt(2.0), 0.01, cfg.initial_log_std);
    b.reward_critic = DenseNet<float>(sizes(critic_in, 1), Head::linear);
    b.reward_critic.initialize(rng, std::sqrt(2.0), 1.0);
    b.cost_critic = DenseNet<float>(sizes(critic_in, 1), Head::linear);
    b.cost_critic.initialize(rng, std::sqrt(2.0), 1.0);
    if (s2c_cfg != nullptr) b.s2c.emplace(raw_dim, *s2c_cfg, rng);
    return b;
}

std::vector<float> PolicyBundle::policy_inputs(std::span<const float> raw, std::size_t batch) const {
    const auto rd = static_cast<std::size_t>(raw_dim);
    if (raw.size() != batch * rd)
        throw std::invalid_argument("observation dimension mismatch: policy expects " + std::to_string(raw_dim));
    if (!s2c) return {raw.begin(), raw.end()};
    const auto dist = s2c->predict_batch(raw, batch);
    const auto k = static_cast<std::size_t>(s2c->n_bins());
    std::vector<float> out(batch * (rd + k));
    for (std::size_t b = 0; b < batch; ++b) {
        std::copy_n(raw.begin() + static_cast<std::ptrdiff_t>(b * rd), rd, out.begin() + static_cast<std::ptrdiff_t>(b * (rd + k)));
        std::copy_n(dist.begin() + static_cast<std::ptrdiff_t>(b * k), k,
                    out.begin() + static_cast<std::ptrdiff_t>(b * (rd + k) + rd));
    }
    return out;
}

Action PolicyBundle::mean_action(std::span<const float> raw) const {
    const auto in = policy_inputs(raw, 1);
    const auto mean = policy.forward(in);
    return {std::tanh(mean[0]), std::tanh(mean[1])};
}

void compute_gae(RolloutBatch& batch, double gamma, double lambda_gae) {
    const std::size_t n = batch.size();
    if (batch.value_r.size() != n || batch.value_c.size() != n || batch.terminal.size() != n ||
        batch.truncated.size() != n)
        throw std::invalid_argument("rollout arrays are not length-matched");
    batch.bootstrap_r.resize(n, 0.0);
    batch.bootstrap_c.resize(n, 0.0);
    batch.adv_r.assign(n, 0.0);
    batch.adv_c.assign(n, 0.0);
    batch.ret_r.assign(n, 0.0);
    batch.ret_c.assign(n, 0.0);

    auto run = [&](const std::vector<double>& signal, const std::vector<double>& values,
                   const std::vector<double>& boot, std::vector<double>& adv, std::vector<double>& ret) {
        double gae = 0.0;
        for (std::size_t t = n; t-- > 0;) {
            double delta;
            if (batch.terminal[t]) {
                delta = signal[t] - values[t];
                gae = delta;
            } else if (batch.truncated[t]) {
                delta = signal[t] + gamma * boot[t] - values[t];
                gae = delta;
            } else {
                delta = signal[t] + gamma * values[t + 1] - values[t];
                gae = delta + gamma * lambda_gae * gae;
            }
            adv[t] = gae;
            ret[t] = gae + values[t];
        }
    };
    if (n > 0 && !batch.terminal[n - 1] && !batch.truncated[n - 1])
        throw std::invalid_argument("rollout must end on an episode boundary");
    run(batch.rewards, batch.value_r, batch.bootstrap_r, batch.adv_r, batch.ret_r);
    run(batch.costs, batch.value_c, batch.bootstrap_c, batch.adv_c, batch.ret_c);
}

void normalize_advantages(RolloutBatch& batch) {
    const std::size_t n = batch.size();
    if (n == 0) return;
    const double mean_r = std::accumulate(batch.adv_r.begin(), batch.adv_r.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double a : batch.adv_r) var += (a - mean_r) * (a - mean_r);
    const double std_r = std::sqrt(var / static_cast<double>(n));
    for (double& a : batch.adv_r) a = (a - mean_r) / (std_r + 1e-8);
    const double mean_c = std::accumulate(batch.adv_c.begin(), batch.adv_c.end(), 0.0) / static_cast<double>(n);
    for (double& a : batch.adv_c) a -= mean_c;
}

double episode_cost_estimate(const RolloutBatch& batch, bool discounted) {
    const auto& costs = discounted ? batch.episode_discounted_costs : batch.episode_costs;
    if (!costs.empty()) return std::accumulate(costs.begin(), costs.end(), 0.0) / static_cast<double>(costs.size());
    return std::accumulate(batch.costs.begin(), batch.costs.end(), 0.0);
}

namespace {

struct Surrogate {
    double value;
    double d_ratio;  // derivative of value with respect to the ratio
};

// min(r A, clip(r) A)
Surrogate clipped_min(double ratio, double adv, double eps) {
    const double unclipped = ratio * adv;
    const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv;
    if (unclipped <= clipped) return {unclipped, adv};
    return {clipped, 0.0};
}

// max(r A, clip(r) A); the pessimistic bound for a quantity being minimized.
Surrogate clipped_max(double ratio, double adv, double eps) {
    const double unclipped = ratio * adv;
    const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv;
    if (unclipped >= clipped) return {unclipped, adv};
    return {clipped, 0.0};
}

}  // namespace

PolicyLoss policy_loss(Algorithm algo, const PolicyBundle& bundle, const RolloutBatch& batch,
                       std::span<const std::size_t> indices, double cost_estimate, double kappa, double clip,
                       std::vector<float>* grads) {
    const std::size_t B = indices.size();
    if (B == 0) throw std::invalid_argument("empty minibatch");
    const auto in = static_cast<std::size_t>(batch.input_dim);
    if (static_cast<int>(in) != bundle.policy.input_dim())
        throw std::invalid_argument("rollout input dimension does not match the policy");
    std::vector<float> x(B * in);
    for (std::size_t i = 0; i < B; ++i)
        std::copy_n(batch.inputs.begin() + static_cast<std::ptrdiff_t>(indices[i] * in), in,
                    x.begin() + static_cast<std::ptrdiff_t>(i * in));
    DenseNet<float>::Cache cache;
    bundle.policy.forward(x, B, cache);

    const double log_std[2] = {bundle.policy.log_std(0), bundle.policy.log_std(1)};
    const double inv_var[2] = {std::exp(-2.0 * log_std[0]), std::exp(-2.0 * log_std[1])};
    const double lambda = bundle.lambda;

    std::vector<double> ratio(B);
    std::vector<double> diff(B * 2);
    for (std::size_t i = 0; i < B; ++i) {
        const std::size_t j = indices[i];
        double lp = 0.0;
        for (std::size_t k = 0; k < 2; ++k) {
            const double d = static_cast<double>(batch.pre_tanh[j * 2 + k]) - cache.output[i * 2 + k];
            diff[i * 2 + k] = d;
            lp += -0.5 * d * d * inv_var[k] - log_std[k] - 0.91893853320467274178;
        }
        ratio[i] = std::exp(lp - static_cast<double>(batch.logp[j]));
    }

    PolicyLoss out;
    std::vector<double> d_sr(B, 0.0), d_sc(B, 0.0);
    double sum_r = 0.0, sum_c = 0.0;
    std::size_t clipped = 0;
    for (std::size_t i = 0; i < B; ++i) {
        const std::size_t j = indices[i];
        const double ar = algo == Algorithm::ppolag ? (batch.adv_r[j] - lambda * batch.adv_c[j]) / (1.0 + lambda)
                                                    : batch.adv_r[j];
        const Surrogate sr = clipped_min(ratio[i], ar, clip);
        const Surrogate sc = clipped_max(ratio[i], batch.adv_c[j], clip);
        sum_r += sr.value;
        sum_c += sc.value;
        d_sr[i] = sr.d_ratio;
        d_sc[i] = sc.d_ratio;
        if (std::abs(ratio[i] - 1.0) > clip) ++clipped;
    }
    const double inv_b = 1.0 / static_cast<double>(B);
    out.surrogate_r = sum_r * inv_b;
    out.surrogate_c = sum_c * inv_b;
    out.clip_fraction = static_cast<double>(clipped) * inv_b;

    // Weights on d(mean surrogate)/d(ratio) for each term of the loss.
    double w_r = 0.0, w_c = 0.0;
    switch (algo) {
        case Algorithm::ppolag:
            out.loss = -out.surrogate_r;
            w_r = -1.0;
            break;
        case Algorithm::p3o:
            out.hinge = out.surrogate_c + (cost_estimate - kappa);
            out.loss = -out.surrogate_r + bundle.p3o_penalty * std::max(0.0, out.hinge);
            w_r = -1.0;
            w_c = out.hinge > 0.0 ? bundle.p3o_penalty : 0.0;
            break;
        case Algorithm::oncrpo:
            out.cost_branch = cost_estimate > kappa + bundle.oncrpo_eta;
            out.loss = out.cost_branch ? out.surrogate_c : -out.surrogate_r;
            if (out.cost_branch)
                w_c = 1.0;
            else
                w_r = -1.0;
            break;
    }
    if (grads == nullptr) return out;

    // d(loss)/d(log prob) = d(loss)/d(ratio) * ratio.
    std::vector<float> grad_mean(B * 2);
    double grad_log_std[2] = {0.0, 0.0};
    for (std::size_t i = 0; i < B; ++i) {
        const double g = (w_r * d_sr[i] + w_c * d_sc[i]) * ratio[i] * inv_b;
        for (std::size_t k = 0; k < 2; ++k) {
            const double d = diff[i * 2 + k];
            grad_mean[i * 2 + k] = static_cast<float>(g * d * inv_var[k]);
            grad_log_std[k] += g * (d * d * inv_var[k] - 1.0);
        }
    }
    grads->assign(bundle.policy.param_count(), 0.0f);
    bundle.policy.backward(cache, grad_mean, *grads);
    for (std::size_t k = 0; k < 2; ++k)
        if (!bundle.policy.log_std_clamped(k))
            (*grads)[bundle.policy.log_std_offset() + k] += static_cast<float>(grad_log_std[k]);
    return out;
}

double critic_loss(const DenseNet<float>& critic, std::span<const float> inputs, int input_dim,
                   std::span<const double> targets, std::span<const std::size_t> indices, std::vector<float>* grads) {
    const std::size_t B = indices.size();
    const auto in = static_cast<std::size_t>(input_dim);
    std::vector<float> x(B * in);
    for (std::size_t i = 0; i < B; ++i)
        std::copy_n(inputs.begin() + static_cast<std::ptrdiff_t>(indices[i] * in), in,
                    x.begin() + static_cast<std::ptrdiff_t>(i * in));
    DenseNet<float>::Cache cache;
    critic.forward(x, B, cache);
    double loss = 0.0;
    std::vector<float> dz(B);
    for (std::size_t i = 0; i < B; ++i) {
        const double e = static_cast<double>(cache.output[i]) - targets[indices[i]];
        loss += 0.5 * e * e;
        dz[i] = static_cast<float>(e / static_cast<double>(B));
    }
    if (grads != nullptr) {
        grads->assign(critic.param_count(), 0.0f);
        critic.backward(cache, dz, *grads);
    }
    return loss / static_cast<double>(B);
}

Optimizers make_optimizers(const PolicyBundle& bundle, const AlgoConfig& cfg) {
    return {Adam<float>(bundle.policy.param_count(), cfg.policy_lr),
            Adam<float>(bundle.reward_critic.param_count(), cfg.critic_lr),
            Adam<float>(bundle.cost_critic.param_count(), cfg.critic_lr)};
}

UpdateDiagnostics run_policy_update(Algorithm algo, PolicyBundle& bundle, Optimizers& opt, const RolloutBatch& batch,
                                    const CmdpConfig& cmdp, const AlgoConfig& cfg, Rng& rng) {
    UpdateDiagnostics diag;
    diag.cost_estimate = episode_cost_estimate(batch, cfg.discounted_cost_estimate);
    diag.lambda_before = bundle.lambda;
    diag.lambda_after = bundle.lambda;
    const std::size_t n = batch.size();
    if (n == 0) return diag;

    const auto& critic_x = batch.critic_inputs(bundle.critics_use_augmented);
    const int critic_dim = bundle.critics_use_augmented ? batch.input_dim : batch.raw_dim;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<float> grads;
    std::size_t minibatches = 0;
    const auto mb = static_cast<std::size_t>(cfg.minibatch);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
        for (std::size_t start = 0; start < n; start += mb) {
            const std::span<const std::size_t> idx(order.data() + start, std::min(mb, n - start));
            const PolicyLoss pl = policy_loss(algo, bundle, batch, idx, diag.cost_estimate, cmdp.kappa, cfg.clip, &grads);
            clip_grad_norm<float>(grads, cfg.max_grad_norm);
            opt.policy.step(bundle.policy.params(), grads);

            const double lr_loss = critic_loss(bundle.reward_critic, critic_x, critic_dim, batch.ret_r, idx, &grads);
            clip_grad_norm<float>(grads, cfg.max_grad_norm);
            opt.reward_critic.step(bundle.reward_critic.params(), grads);

            const double lc_loss = critic_loss(bundle.cost_critic, critic_x, critic_dim, batch.ret_c, idx, &grads);
            clip_grad_norm<float>(grads, cfg.max_grad_norm);
            opt.cost_critic.step(bundle.cost_critic.params(), grads);

            diag.policy_loss += pl.loss;
            diag.reward_critic_loss += lr_loss;
            diag.cost_critic_loss += lc_loss;
            diag.clip_fraction += pl.clip_fraction;
            diag.hinge = pl.hinge;
            diag.penalty_active = diag.penalty_active || pl.hinge > 0.0;
            diag.cost_branch = pl.cost_branch;
            ++minibatches;
        }
    }
    const double inv = 1.0 / static_cast<double>(minibatches);
    diag.policy_loss *= inv;
    diag.reward_critic_loss *= inv;
    diag.cost_critic_loss *= inv;
    diag.clip_fraction *= inv;
    return diag;
}

void dual_update(PolicyBundle& bundle, double cost_estimate, double kappa) {
    bundle.lambda = std::max(0.0, bundle.lambda + bundle.lr_lambda * (cost_estimate - kappa));
}

UpdateDiagnostics ppolag_update(PolicyBundle& bundle, Optimizers& opt, const RolloutBatch& batch,
                                const CmdpConfig& cmdp, const AlgoConfig& cfg, Rng& rng) {
    UpdateDiagnostics d = run_policy_update(Algorithm::ppolag, bundle, opt, batch, cmdp, cfg, rng);
    dual_update(bundle, d.cost_estimate, cmdp.kappa);
    d.lambda_after = bundle.lambda;
    return d;
}

UpdateDiagnostics p3o_update(PolicyBundle& bundle, Optimizers& opt, const RolloutBatch& batch, const CmdpConfig& cmdp,
                             const AlgoConfig& cfg, Rng& rng) {
    return run_policy_update(Algorithm::p3o, bundle, opt, batch, cmdp, cfg, rng);
}

UpdateDiagnostics oncrpo_update(PolicyBundle& bundle, Optimizers& opt, const RolloutBatch& batch,
                                const CmdpConfig& cmdp, const AlgoConfig& cfg, Rng& rng) {
    return run_policy_update(Algorithm::oncrpo, bundle, opt, batch, cmdp, cfg, rng);
}

}  // namespace srpl
