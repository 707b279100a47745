#include "srpl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "srpl/config.hpp"

namespace srpl {

EnvConfig TrainConfig::resolved_env() const {
    EnvConfig e = env;
    e.max_episode_steps = cmdp.max_episode_steps;
    return e;
}

void TrainConfig::validate() const {
    cmdp.validate();
    resolved_env().validate();
    s2c.validate();
    algo.validate();
    if (budget_steps <= 0) throw std::invalid_argument("run.budget_steps must be positive");
    if (train_scenarios == 0) throw std::invalid_argument("run.train_scenarios must be positive");
    if (algo.steps_per_batch % algo.num_envs != 0)
        throw std::invalid_argument("algo.steps_per_batch must be a multiple of algo.num_envs");
    if (algo.minibatch > algo.steps_per_batch)
        throw std::invalid_argument("algo.minibatch must not exceed algo.steps_per_batch");
}

std::string to_json_line(const IterationLog& log) {
    nlohmann::json j = {{"iteration", log.iteration},
                        {"steps", log.steps},
                        {"episodes", log.episodes},
                        {"mean_return", log.mean_return},
                        {"mean_cost", log.mean_cost},
                        {"success_rate", log.success_rate},
                        {"lambda", log.lambda},
                        {"policy_loss", log.policy_loss},
                        {"penalty_active", log.penalty_active},
                        {"cost_branch", log.cost_branch}};
    j["s2c_loss"] = std::isnan(log.s2c_loss) ? nlohmann::json(nullptr) : nlohmann::json(log.s2c_loss);
    return j.dump();
}

namespace {

struct Episode {
    std::vector<float> raw;  // row-major raw observations
    std::vector<double> costs;
    double ret = 0.0;
    double cost = 0.0;
    double disc_cost = 0.0;
    double discount = 1.0;

    void clear() {
        raw.clear();
        costs.clear();
        ret = cost = disc_cost = 0.0;
        discount = 1.0;
    }
};

struct Worker {
    DrivingEnv env;
    Rng rng;
    std::vector<float> obs;
    Episode episode;

    // Per-batch segment, concatenated env-major afterwards.
    std::vector<float> raw, inputs, pre_tanh, logp;
    std::vector<double> rewards, costs;
    std::vector<std::uint8_t> terminal, truncated;
    std::vector<std::size_t> boot_rows;  // local step index of each truncation
    std::vector<float> boot_raw;         // next observation at each truncation

    void clear_segment() {
        raw.clear();
        inputs.clear();
        pre_tanh.clear();
        logp.clear();
        rewards.clear();
        costs.clear();
        terminal.clear();
        truncated.clear();
        boot_rows.clear();
        boot_raw.clear();
    }
};

std::vector<double> critic_values(const DenseNet<float>& critic, std::span<const float> x, std::size_t rows) {
    std::vector<double> out(rows, 0.0);
    if (rows == 0) return out;
    DenseNet<float>::Cache cache;
    critic.forward(x, rows, cache);
    for (std::size_t i = 0; i < rows; ++i) out[i] = cache.output[i];
    return out;
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, PathTrace* trace, const std::function<void(const IterationLog&)>& on_iteration) {
    cfg.validate();
    auto mark = [&](std::string_view e) {
        if (trace != nullptr) trace->mark(e);
    };
    const EnvConfig env_cfg = cfg.resolved_env();
    const int raw_dim = env_cfg.layout.total_dim();
    const auto rd = static_cast<std::size_t>(raw_dim);

    Rng init_rng = make_stream(cfg.seed, 1);
    Rng update_rng = make_stream(cfg.seed, 2);
    Rng s2c_rng = make_stream(cfg.seed, 3);

    TrainResult result;
    result.bundle = PolicyBundle::create(raw_dim, cfg.algo, cfg.cmdp.kappa, cfg.srpl ? &cfg.s2c : nullptr, init_rng);
    PolicyBundle& bundle = result.bundle;
    Optimizers opt = make_optimizers(bundle, cfg.algo);
    std::optional<SafetyBuffer> buffer;
    if (cfg.srpl) buffer.emplace(cfg.s2c.buffer_capacity, raw_dim, cfg.s2c.n_bins());

    const auto pool = generate_scenario_set(cfg.domain, cfg.train_scenario_base, cfg.train_scenarios);

    const auto E = static_cast<std::size_t>(cfg.algo.num_envs);
    const std::size_t per_env = static_cast<std::size_t>(cfg.algo.steps_per_batch) / E;
    const std::int64_t iterations =
        std::max<std::int64_t>(1, cfg.budget_steps / static_cast<std::int64_t>(per_env * E));

    std::vector<Worker> workers(E);
    for (std::size_t e = 0; e < E; ++e) {
        workers[e].env = DrivingEnv(env_cfg);
        workers[e].rng = make_stream(cfg.seed, 100 + e);
        workers[e].obs = workers[e].env.reset(pool[uniform_index(workers[e].rng, pool.size())]);
    }

    const int in_dim = bundle.policy_input_dim();
    const auto id = static_cast<std::size_t>(in_dim);
    std::vector<float> raw_rows(E * rd);
    std::vector<StepResult> results(E);
    std::vector<Action> actions(E);

    for (std::int64_t it = 0; it < iterations; ++it) {
        mark("rollout");
        RolloutBatch batch;
        batch.raw_dim = raw_dim;
        batch.input_dim = in_dim;
        std::vector<Episode> finished;
        for (auto& w : workers) w.clear_segment();

        for (std::size_t t = 0; t < per_env; ++t) {
            for (std::size_t e = 0; e < E; ++e) std::copy(workers[e].obs.begin(), workers[e].obs.end(), raw_rows.begin() + static_cast<std::ptrdiff_t>(e * rd));
            const auto inputs = bundle.policy_inputs(raw_rows, E);
            DenseNet<float>::Cache cache;
            bundle.policy.forward(inputs, E, cache);
            const double log_std[2] = {bundle.policy.log_std(0), bundle.policy.log_std(1)};
            for (std::size_t e = 0; e < E; ++e) {
                Worker& w = workers[e];
                double lp = 0.0;
                for (std::size_t k = 0; k < 2; ++k) {
                    const double noise = standard_normal(w.rng);
                    const auto u = static_cast<float>(cache.output[e * 2 + k] + std::exp(log_std[k]) * noise);
                    const double d = static_cast<double>(u) - cache.output[e * 2 + k];
                    lp += -0.5 * d * d * std::exp(-2.0 * log_std[k]) - log_std[k] - 0.91893853320467274178;
                    w.pre_tanh.push_back(u);
                    actions[e][k] = std::tanh(u);
                }
                w.logp.push_back(static_cast<float>(lp));
                w.raw.insert(w.raw.end(), w.obs.begin(), w.obs.end());
                w.inputs.insert(w.inputs.end(), inputs.begin() + static_cast<std::ptrdiff_t>(e * id),
                                inputs.begin() + static_cast<std::ptrdiff_t>((e + 1) * id));
            }

#pragma omp parallel for schedule(static) if (E > 1)
            for (std::ptrdiff_t e = 0; e < static_cast<std::ptrdiff_t>(E); ++e)
                results[static_cast<std::size_t>(e)] = workers[static_cast<std::size_t>(e)].env.step(actions[static_cast<std::size_t>(e)]);

            for (std::size_t e = 0; e < E; ++e) {
                Worker& w = workers[e];
                StepResult& r = results[e];
                Episode& ep = w.episode;
                ep.raw.insert(ep.raw.end(), w.obs.begin(), w.obs.end());
                ep.costs.push_back(r.cost);
                ep.ret += r.reward;
                ep.cost += r.cost;
                ep.disc_cost += ep.discount * r.cost;
                ep.discount *= cfg.cmdp.gamma;

                const bool done = r.terminal || r.truncated;
                const bool cut = !done && t + 1 == per_env;
                w.rewards.push_back(r.reward);
                w.costs.push_back(r.cost);
                w.terminal.push_back(r.terminal ? 1 : 0);
                w.truncated.push_back(r.truncated || cut ? 1 : 0);
                if (r.truncated || cut) {
                    w.boot_rows.push_back(w.rewards.size() - 1);
                    w.boot_raw.insert(w.boot_raw.end(), r.observation.begin(), r.observation.end());
                }
                if (done) {
                    batch.episode_returns.push_back(ep.ret);
                    batch.episode_costs.push_back(ep.cost);
                    batch.episode_discounted_costs.push_back(ep.disc_cost);
                    batch.episode_success.push_back(r.outcome == Outcome::success ? 1 : 0);
                    if (cfg.srpl) finished.push_back(std::move(ep));
                    ep.clear();
                    w.obs = w.env.reset(pool[uniform_index(w.rng, pool.size())]);
                } else {
                    w.obs = std::move(r.observation);
                }
            }
        }

        std::vector<std::size_t> boot_index;
        std::vector<float> boot_raw;
        for (const auto& w : workers) {
            const std::size_t base = batch.rewards.size();
            batch.raw.insert(batch.raw.end(), w.raw.begin(), w.raw.end());
            batch.inputs.insert(batch.inputs.end(), w.inputs.begin(), w.inputs.end());
            batch.pre_tanh.insert(batch.pre_tanh.end(), w.pre_tanh.begin(), w.pre_tanh.end());
            batch.logp.insert(batch.logp.end(), w.logp.begin(), w.logp.end());
            batch.rewards.insert(batch.rewards.end(), w.rewards.begin(), w.rewards.end());
            batch.costs.insert(batch.costs.end(), w.costs.begin(), w.costs.end());
            batch.terminal.insert(batch.terminal.end(), w.terminal.begin(), w.terminal.end());
            batch.truncated.insert(batch.truncated.end(), w.truncated.begin(), w.truncated.end());
            for (std::size_t r : w.boot_rows) boot_index.push_back(base + r);
            boot_raw.insert(boot_raw.end(), w.boot_raw.begin(), w.boot_raw.end());
        }
        const std::size_t n = batch.size();

        mark("gae");
        const bool aug = bundle.critics_use_augmented;
        const auto& cx = batch.critic_inputs(aug);
        batch.value_r = critic_values(bundle.reward_critic, cx, n);
        batch.value_c = critic_values(bundle.cost_critic, cx, n);
        const std::size_t nb = boot_index.size();
        const std::vector<float> boot_x = aug ? bundle.policy_inputs(boot_raw, nb) : boot_raw;
        const auto br = critic_values(bundle.reward_critic, boot_x, nb);
        const auto bc = critic_values(bundle.cost_critic, boot_x, nb);
        batch.bootstrap_r.assign(n, 0.0);
        batch.bootstrap_c.assign(n, 0.0);
        for (std::size_t i = 0; i < nb; ++i) {
            batch.bootstrap_r[boot_index[i]] = br[i];
            batch.bootstrap_c[boot_index[i]] = bc[i];
        }
        compute_gae(batch, cfg.cmdp.gamma, cfg.algo.lambda_gae);
        mark("normalize");
        normalize_advantages(batch);

        mark("policy_update");
        UpdateDiagnostics diag;
        switch (cfg.algorithm) {
            case Algorithm::ppolag:
                diag = run_policy_update(Algorithm::ppolag, bundle, opt, batch, cfg.cmdp, cfg.algo, update_rng);
                mark("dual_update");
                dual_update(bundle, diag.cost_estimate, cfg.cmdp.kappa);
                diag.lambda_after = bundle.lambda;
                break;
            case Algorithm::p3o: diag = p3o_update(bundle, opt, batch, cfg.cmdp, cfg.algo, update_rng); break;
            case Algorithm::oncrpo: diag = oncrpo_update(bundle, opt, batch, cfg.cmdp, cfg.algo, update_rng); break;
        }
        result.steps += static_cast<std::int64_t>(n);

        IterationLog log;
        log.iteration = static_cast<int>(it);
        log.steps = result.steps;
        log.episodes = static_cast<int>(batch.episode_returns.size());
        if (log.episodes > 0) {
            const double inv = 1.0 / log.episodes;
            log.mean_return = std::accumulate(batch.episode_returns.begin(), batch.episode_returns.end(), 0.0) * inv;
            log.mean_cost = std::accumulate(batch.episode_costs.begin(), batch.episode_costs.end(), 0.0) * inv;
            log.success_rate = std::accumulate(batch.episode_success.begin(), batch.episode_success.end(), 0.0) * inv;
        }
        log.lambda = bundle.lambda;
        log.policy_loss = diag.policy_loss;
        log.penalty_active = diag.penalty_active;
        log.cost_branch = diag.cost_branch;
        log.s2c_loss = std::numeric_limits<double>::quiet_NaN();

        if (cfg.srpl) {
            mark("s2c_label");
            std::vector<float> held_states;
            std::vector<int> held_bins;
            for (const auto& ep : finished) {
                const auto bins = label_costs(ep.costs, cfg.s2c);
                for (std::size_t s = 0; s < bins.size(); ++s) {
                    const std::span<const float> state(ep.raw.data() + s * rd, rd);
                    buffer->add(state, bins[s]);
                    held_states.insert(held_states.end(), state.begin(), state.end());
                    held_bins.push_back(bins[s]);
                }
            }
            if (!held_bins.empty())
                result.s2c_heldout_loss = s2c_loss<float>(bundle.s2c->online, held_states, held_bins);
            result.s2c_pairs = buffer->inserted();

            mark("s2c_update");
            const int updates = cfg.s2c.updates_per_scenario * static_cast<int>(finished.size());
            double loss_sum = 0.0;
            int loss_count = 0;
            for (int u = 0; u < updates; ++u) {
                if (const auto l = s2c_update(*bundle.s2c, *buffer, cfg.s2c, s2c_rng)) {
                    loss_sum += *l;
                    ++loss_count;
                }
            }
            if (loss_count > 0) log.s2c_loss = loss_sum / loss_count;
        }
        result.log.push_back(log);
        if (on_iteration) on_iteration(log);
    }
    return result;
}

Checkpoint make_checkpoint(const PolicyBundle& bundle, const TrainConfig& cfg, std::int64_t steps) {
    Checkpoint ck;
    ck.networks = {bundle.policy, bundle.reward_critic, bundle.cost_critic};
    if (bundle.s2c) {
        ck.networks.push_back(bundle.s2c->online);
        ck.networks.push_back(bundle.s2c->target);
    }
    RunConfig rc;
    rc.train = cfg;
    rc.seeds = {cfg.seed};
    ck.metadata = to_config_text(rc);
    ck.metadata += "state.seed = " + std::to_string(cfg.seed) + "\n";
    ck.metadata += "state.steps = " + std::to_string(steps) + "\n";
    ck.metadata += "state.lambda = " + fmt17(bundle.lambda) + "\n";
    ck.metadata += "state.raw_dim = " + std::to_string(bundle.raw_dim) + "\n";
    ck.metadata += "state.s2c_updates = " + std::to_string(bundle.s2c ? bundle.s2c->updates : 0) + "\n";
    ck.metadata += "state.networks = " + std::to_string(ck.networks.size()) + "\n";
    return ck;
}

LoadedPolicy policy_from_checkpoint(const Checkpoint& ckpt) {
    std::map<std::string, std::string> state;
    const RunConfig rc = parse_run_config(ckpt.metadata, &state, {"state."});
    auto need = [&](const std::string& k) -> const std::string& {
        const auto it = state.find(k);
        if (it == state.end()) throw std::invalid_argument("checkpoint metadata lacks " + k);
        return it->second;
    };
    LoadedPolicy out;
    out.config = rc.for_seed(std::stoull(need("state.seed")));
    out.steps = std::stoll(need("state.steps"));
    const std::size_t expected = out.config.srpl ? 5 : 3;
    if (ckpt.networks.size() != expected)
        throw std::invalid_argument("checkpoint holds " + std::to_string(ckpt.networks.size()) + " networks, expected " +
                                    std::to_string(expected));

    PolicyBundle& b = out.bundle;
    const AlgoConfig& a = out.config.algo;
    b.raw_dim = std::stoi(need("state.raw_dim"));
    b.lambda = std::stod(need("state.lambda"));
    b.lr_lambda = a.lr_lambda;
    b.p3o_penalty = a.p3o_penalty;
    b.oncrpo_eta = a.eta(out.config.cmdp.kappa);
    b.critics_use_augmented = a.critics_use_augmented;
    b.policy = ckpt.networks[0];
    b.reward_critic = ckpt.networks[1];
    b.cost_critic = ckpt.networks[2];
    if (out.config.srpl) {
        S2CModel m;
        m.online = ckpt.networks[3];
        m.target = ckpt.networks[4];
        m.optimizer = Adam<float>(m.online.param_count(), out.config.s2c.learning_rate);
        m.updates = std::stoll(need("state.s2c_updates"));
        b.s2c = std::move(m);
    }
    const int want_in = b.raw_dim + (b.s2c ? b.s2c->n_bins() : 0);
    if (b.policy.input_dim() != want_in || b.policy.head() != Head::gaussian)
        throw std::invalid_argument("checkpoint policy shape does not match its metadata");
    return out;
}

}  // namespace srpl
