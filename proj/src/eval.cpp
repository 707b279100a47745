#include "srpl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace srpl {

void NoiseSpec::validate() const {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("noise sigma must be finite and nonnegative");
}

void apply_noise(std::span<float> obs, const ObservationLayout& layout, const NoiseSpec& noise, Rng& rng) {
    if (noise.sigma == 0.0) return;
    const auto begin = static_cast<std::size_t>(layout.lidar_offset());
    const auto end = begin + static_cast<std::size_t>(layout.n_lidar);
    if (obs.size() < end) throw DataMismatch("observation shorter than the lidar slice");
    for (std::size_t i = begin; i < end; ++i) {
        double v = obs[i] + noise.sigma * standard_normal(rng);
        if (noise.clip_to_unit) v = std::clamp(v, 0.0, 1.0);
        obs[i] = static_cast<float>(v);
    }
}

std::string_view to_string(Metric m) {
    switch (m) {
        case Metric::reward: return "reward";
        case Metric::cost: return "cost";
        case Metric::rc: return "rc";
        case Metric::sr: return "sr";
        case Metric::oor: return "oor";
    }
    return "cost";
}

Metric parse_metric(std::string_view s) {
    if (s == "reward") return Metric::reward;
    if (s == "cost") return Metric::cost;
    if (s == "rc") return Metric::rc;
    if (s == "sr") return Metric::sr;
    if (s == "oor") return Metric::oor;
    throw std::invalid_argument("unknown metric '" + std::string(s) + "'");
}

double metric_value(const EpisodeMetrics& m, Metric metric) {
    switch (metric) {
        case Metric::reward: return m.total_reward;
        case Metric::cost: return m.total_cost;
        case Metric::rc: return m.route_completion;
        case Metric::sr: return m.success;
        case Metric::oor: return m.out_of_road;
    }
    return 0.0;
}

MeanStd EvaluationReport::aggregate(Metric metric) const {
    MeanStd out;
    if (rows.empty()) return out;
    const double n = static_cast<double>(rows.size());
    for (const auto& r : rows) out.mean += metric_value(r.metrics, metric);
    out.mean /= n;
    double var = 0.0;
    for (const auto& r : rows) {
        const double d = metric_value(r.metrics, metric) - out.mean;
        var += d * d;
    }
    out.std = std::sqrt(var / n);
    return out;
}

std::string EvaluationReport::to_jsonl() const {
    std::string out;
    nlohmann::json head = {{"type", "header"},   {"label", label},           {"fingerprint", fingerprint},
                           {"sigma", sigma},     {"noise_seed", noise_seed}, {"eval_domain", eval_domain},
                           {"train_domain", train_domain}, {"rows", rows.size()}};
    out += head.dump() + "\n";
    for (const auto& r : rows) {
        nlohmann::json j = {{"id", r.scenario_id},
                            {"reward", r.metrics.total_reward},
                            {"cost", r.metrics.total_cost},
                            {"rc", r.metrics.route_completion},
                            {"success", r.metrics.success},
                            {"oor", r.metrics.out_of_road},
                            {"outcome", std::string(to_string(r.outcome))},
                            {"steps", r.steps}};
        out += j.dump() + "\n";
    }
    return out;
}

EvaluationReport EvaluationReport::from_jsonl(std::string_view text) {
    EvaluationReport rep;
    std::istringstream in{std::string(text)};
    std::string line;
    bool have_header = false;
    std::size_t expected = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataMismatch(std::string("malformed report line: ") + e.what());
        }
        if (!have_header) {
            if (j.value("type", "") != "header") throw DataMismatch("report does not start with a header record");
            rep.label = j.at("label").get<std::string>();
            rep.fingerprint = j.at("fingerprint").get<std::string>();
            rep.sigma = j.at("sigma").get<double>();
            rep.noise_seed = j.at("noise_seed").get<std::uint64_t>();
            rep.eval_domain = j.at("eval_domain").get<std::string>();
            rep.train_domain = j.at("train_domain").get<std::string>();
            expected = j.at("rows").get<std::size_t>();
            have_header = true;
            continue;
        }
        ScenarioRow r;
        r.scenario_id = j.at("id").get<std::uint64_t>();
        r.metrics.total_reward = j.at("reward").get<double>();
        r.metrics.total_cost = j.at("cost").get<double>();
        r.metrics.route_completion = j.at("rc").get<double>();
        r.metrics.success = j.at("success").get<int>();
        r.metrics.out_of_road = j.at("oor").get<int>();
        const std::string o = j.at("outcome").get<std::string>();
        r.outcome = o == "success" ? Outcome::success
                    : o == "crash" ? Outcome::crash
                    : o == "off_road" ? Outcome::off_road
                                      : Outcome::timeout;
        r.steps = j.at("steps").get<int>();
        rep.rows.push_back(r);
    }
    if (!have_header) throw DataMismatch("empty report");
    if (rep.rows.size() != expected) throw DataMismatch("report row count does not match its header");
    return rep;
}

std::string EvaluationReport::summary_header() { return "label,Reward,Cost,RC,SR,OOR"; }

std::string EvaluationReport::summary_row() const {
    std::string out = label;
    for (Metric m : {Metric::reward, Metric::cost, Metric::rc, Metric::sr, Metric::oor}) {
        const MeanStd s = aggregate(m);
        char buf[64];
        std::snprintf(buf, sizeof buf, ",%.3f (%.3f)", s.mean, s.std);
        out += buf;
    }
    return out;
}

EvaluationReport evaluate(const Controller& controller, std::span<const ScenarioSpec> scenarios,
                          const EvalOptions& options) {
    options.noise.validate();
    options.env.validate();
    const int dim = options.env.layout.total_dim();
    if (controller.input_dim() != 0 && controller.input_dim() != dim)
        throw DataMismatch("policy expects observations of width " + std::to_string(controller.input_dim()) +
                           " but the environment emits " + std::to_string(dim));

    EvaluationReport rep;
    rep.sigma = options.noise.sigma;
    rep.noise_seed = options.noise_seed;
    rep.rows.resize(scenarios.size());
    if (!scenarios.empty()) rep.eval_domain = std::string(to_string(scenarios.front().domain));

#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(scenarios.size()); ++i) {
        const ScenarioSpec& spec = scenarios[static_cast<std::size_t>(i)];
        Rng noise_rng = make_stream(options.noise_seed, spec.id);
        DrivingEnv env(options.env);
        std::vector<float> obs = env.reset(spec);
        Trajectory traj;
        while (true) {
            apply_noise(obs, options.env.layout, options.noise, noise_rng);
            const Action a = controller.act(obs, env);
            StepResult r = env.step(a);
            StepRecord rec;
            rec.action = {std::clamp(a[0], -1.0f, 1.0f), std::clamp(a[1], -1.0f, 1.0f)};
            rec.reward = r.reward;
            rec.cost = r.cost;
            rec.terminal = r.terminal;
            rec.truncated = r.truncated;
            rec.position = {env.vehicle().x, env.vehicle().y};
            traj.steps.push_back(std::move(rec));
            if (r.terminal || r.truncated) {
                traj.outcome = *r.outcome;
                break;
            }
            obs = std::move(r.observation);
        }
        ScenarioRow& row = rep.rows[static_cast<std::size_t>(i)];
        row.scenario_id = spec.id;
        row.metrics = episode_metrics(traj, spec);
        row.outcome = traj.outcome;
        row.steps = static_cast<int>(traj.steps.size());
    }
    return rep;
}

TestResult compare(const EvaluationReport& a, const EvaluationReport& b, Metric metric) {
    if (a.eval_domain != b.eval_domain)
        throw DataMismatch("reports come from different domains (" + a.eval_domain + " vs " + b.eval_domain + ")");
    if (a.rows.size() != b.rows.size())
        throw DataMismatch("reports cover " + std::to_string(a.rows.size()) + " and " + std::to_string(b.rows.size()) +
                           " scenarios");
    auto sorted = [](const EvaluationReport& r) {
        std::vector<const ScenarioRow*> v;
        for (const auto& row : r.rows) v.push_back(&row);
        std::sort(v.begin(), v.end(), [](auto x, auto y) { return x->scenario_id < y->scenario_id; });
        return v;
    };
    const auto ra = sorted(a), rb = sorted(b);
    std::vector<double> diffs(ra.size());
    for (std::size_t i = 0; i < ra.size(); ++i) {
        if (ra[i]->scenario_id != rb[i]->scenario_id || (i > 0 && ra[i]->scenario_id == ra[i - 1]->scenario_id))
            throw DataMismatch("reports cover different scenario sets");
        diffs[i] = metric_value(ra[i]->metrics, metric) - metric_value(rb[i]->metrics, metric);
    }
    return wilcoxon_signed_rank(diffs);
}

std::vector<SweepRow> robustness_sweep(std::span<const NamedController> controllers,
                                       std::span<const ScenarioSpec> scenarios, std::span<const double> sigmas,
                                       const EvalOptions& base) {
    if (sigmas.empty() || !std::is_sorted(sigmas.begin(), sigmas.end()) ||
        std::find(sigmas.begin(), sigmas.end(), 0.0) == sigmas.end())
        throw std::invalid_argument("sigma list must be ascending and include 0");
    std::vector<SweepRow> rows;
    for (double s : sigmas) {
        for (const auto& c : controllers) {
            EvalOptions opt = base;
            opt.noise.sigma = s;
            const EvaluationReport rep = evaluate(*c.controller, scenarios, opt);
            rows.push_back({s, c.label, rep.aggregate(Metric::reward).mean, rep.aggregate(Metric::cost).mean});
        }
    }
    return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
    std::string out = "sigma,algorithm,reward,cost\n";
    for (const auto& r : rows) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%g,%s,%.6f,%.6f\n", r.sigma, r.algorithm.c_str(), r.reward, r.cost);
        out += buf;
    }
    return out;
}

EvaluationReport transfer_eval(const PolicyBundle& bundle, Domain train_domain, Domain eval_domain,
                               std::span<const ScenarioSpec> scenarios, const EvalOptions& options) {
    for (const auto& s : scenarios)
        if (s.domain != eval_domain) throw DataMismatch("scenario set does not belong to the evaluation domain");
    EvaluationReport rep = evaluate(PolicyController(bundle), scenarios, options);
    rep.train_domain = std::string(to_string(train_domain));
    rep.eval_domain = std::string(to_string(eval_domain));
    return rep;
}

std::vector<std::vector<float>> collect_observation_fixture(std::span<const ScenarioSpec> scenarios,
                                                            const EnvConfig& env_cfg, std::size_t count,
                                                            std::uint64_t seed) {
    std::vector<std::vector<float>> pool;
    for (const auto& spec : scenarios) {
        DrivingEnv env(env_cfg);
        std::vector<float> obs = env.reset(spec);
        while (true) {
            pool.push_back(obs);
            StepResult r = env.step(expert_action(env));
            if (r.terminal || r.truncated) break;
            obs = std::move(r.observation);
        }
    }
    if (pool.size() < count) throw std::invalid_argument("not enough observations for the fixture");
    Rng rng = make_stream(seed, 0);
    for (std::size_t i = 0; i < count; ++i) std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
    pool.resize(count);
    return pool;
}

ActionVariance action_variance(const PolicyBundle& bundle, std::span<const std::vector<float>> observations,
                               const ObservationLayout& layout, const NoiseSpec& noise, std::uint64_t noise_seed) {
    noise.validate();
    ActionVariance out;
    const std::size_t n = observations.size();
    if (n == 0) return out;
    std::vector<Action> clean(n), noisy(n);
    for (std::size_t i = 0; i < n; ++i) {
        clean[i] = bundle.mean_action(observations[i]);
        std::vector<float> o = observations[i];
        Rng rng = make_stream(noise_seed, i);
        apply_noise(o, layout, noise, rng);
        noisy[i] = bundle.mean_action(o);
    }
    auto variance = [&](const std::vector<Action>& xs, std::size_t k) {
        double m = 0.0;
        for (const auto& a : xs) m += a[k];
        m /= static_cast<double>(n);
        double v = 0.0;
        for (const auto& a : xs) v += (a[k] - m) * (a[k] - m);
        return v / static_cast<double>(n);
    };
    for (std::size_t k = 0; k < 2; ++k) {
        out.clean[k] = variance(clean, k);
        out.noisy[k] = variance(noisy, k);
        out.increase[k] = out.noisy[k] - out.clean[k];
        out.total_increase += out.increase[k];
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < 2; ++k) {
            const double d = static_cast<double>(noisy[i][k]) - clean[i][k];
            out.sensitivity += d * d;
        }
    out.sensitivity /= static_cast<double>(n);
    return out;
}

VarianceComparison action_variance_analysis(const PolicyBundle& baseline, const PolicyBundle& srpl,
                                            std::span<const std::vector<float>> observations,
                                            const ObservationLayout& layout, const NoiseSpec& noise,
                                            std::uint64_t noise_seed) {
    VarianceComparison c;
    c.baseline = action_variance(baseline, observations, layout, noise, noise_seed);
    c.srpl = action_variance(srpl, observations, layout, noise, noise_seed);
    c.gap = c.baseline.total_increase - c.srpl.total_increase;
    return c;
}

}  // namespace srpl
