#include "srpl/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

namespace srpl {

TrainConfig RunConfig::for_seed(std::uint64_t seed) const {
    TrainConfig t = train;
    t.seed = seed;
    return t;
}

void RunConfig::validate() const {
    if (seeds.empty()) throw ConfigError("run.seeds", "run.seeds must list at least one seed");
    try {
        train.validate();
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        const std::string first = msg.substr(0, msg.find(' '));
        throw ConfigError(first.find('.') != std::string::npos ? first : "config", msg);
    }
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string fmt_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

double parse_double(std::string_view key, std::string_view v) {
    const std::string s(v);
    if (s == "inf") return std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || s.empty()) throw ConfigError(std::string(key), "invalid number for " + std::string(key) + ": '" + s + "'");
    return out;
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view v) {
    Int out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
        throw ConfigError(std::string(key), "invalid integer for " + std::string(key) + ": '" + std::string(v) + "'");
    return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(std::string(key), "invalid boolean for " + std::string(key) + ": '" + std::string(v) + "'");
}

template <typename Int>
std::vector<Int> parse_list(std::string_view key, std::string_view v) {
    std::vector<Int> out;
    std::size_t start = 0;
    while (start <= v.size()) {
        const auto comma = v.find(',', start);
        const std::string item = trim(v.substr(start, comma == std::string_view::npos ? v.npos : comma - start));
        out.push_back(parse_int<Int>(key, item));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

template <typename Int>
std::string fmt_list(const std::vector<Int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

struct Field {
    const char* key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, std::string_view key, std::string_view)> set;
};

#define SRPL_DOUBLE(name, expr)                                                        \
    Field {                                                                            \
        name, [](const RunConfig& c) { return fmt_double(c.expr); },                   \
            [](RunConfig& c, std::string_view k, std::string_view v) { c.expr = parse_double(k, v); } \
    }
#define SRPL_INT(name, type, expr)                                                              \
    Field {                                                                                     \
        name, [](const RunConfig& c) { return std::to_string(c.expr); },                        \
            [](RunConfig& c, std::string_view k, std::string_view v) { c.expr = parse_int<type>(k, v); } \
    }
#define SRPL_BOOL(name, expr)                                                                 \
    Field {                                                                                   \
        name, [](const RunConfig& c) { return std::string(c.expr ? "true" : "false"); },      \
            [](RunConfig& c, std::string_view k, std::string_view v) { c.expr = parse_bool(k, v); } \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        Field{"run.algorithm", [](const RunConfig& c) { return std::string(to_string(c.train.algorithm)); },
              [](RunConfig& c, std::string_view k, std::string_view v) {
                  try {
                      c.train.algorithm = parse_algorithm(v);
                  } catch (const std::invalid_argument& e) {
                      throw ConfigError(std::string(k), e.what());
                  }
              }},
        SRPL_BOOL("run.srpl", train.srpl),
        Field{"run.domain", [](const RunConfig& c) { return std::string(to_string(c.train.domain)); },
              [](RunConfig& c, std::string_view k, std::string_view v) {
                  try {
                      c.train.domain = parse_domain(v);
                  } catch (const std::invalid_argument& e) {
                      throw ConfigError(std::string(k), e.what());
                  }
              }},
        Field{"run.seeds", [](const RunConfig& c) { return fmt_list(c.seeds); },
              [](RunConfig& c, std::string_view k, std::string_view v) { c.seeds = parse_list<std::uint64_t>(k, v); }},
        SRPL_INT("run.budget_steps", std::int64_t, train.budget_steps),
        SRPL_INT("run.train_scenarios", std::size_t, train.train_scenarios),
        SRPL_INT("run.train_scenario_base", std::uint64_t, train.train_scenario_base),
        Field{"run.output_dir", [](const RunConfig& c) { return c.output_dir; },
              [](RunConfig& c, std::string_view, std::string_view v) { c.output_dir = std::string(v); }},

        SRPL_DOUBLE("cmdp.gamma", train.cmdp.gamma),
        SRPL_DOUBLE("cmdp.kappa", train.cmdp.kappa),
        SRPL_INT("cmdp.max_episode_steps", int, train.cmdp.max_episode_steps),

        SRPL_INT("env.n_lidar", int, train.env.layout.n_lidar),
        SRPL_INT("env.n_boundary", int, train.env.layout.n_boundary),
        SRPL_INT("env.n_waypoints", int, train.env.layout.n_waypoints),
        SRPL_DOUBLE("env.range_max", train.env.layout.range_max),
        SRPL_DOUBLE("env.waypoint_spacing", train.env.layout.waypoint_spacing),
        SRPL_DOUBLE("env.dt", train.env.vehicle.dt),
        SRPL_DOUBLE("env.wheelbase", train.env.vehicle.wheelbase),
        SRPL_DOUBLE("env.accel_max", train.env.vehicle.accel_max),
        SRPL_DOUBLE("env.steer_max", train.env.vehicle.steer_max),
        SRPL_DOUBLE("env.speed_max", train.env.vehicle.speed_max),
        SRPL_DOUBLE("env.vehicle_radius", train.env.vehicle.radius),

        SRPL_DOUBLE("reward.w_drive", train.env.weights.w_drive),
        SRPL_DOUBLE("reward.w_heading", train.env.weights.w_heading),
        SRPL_DOUBLE("reward.w_lat", train.env.weights.w_lat),
        SRPL_DOUBLE("reward.r_success", train.env.weights.r_success),
        SRPL_DOUBLE("reward.r_fail", train.env.weights.r_fail),
        SRPL_DOUBLE("reward.w_crash", train.env.weights.w_crash),
        SRPL_DOUBLE("reward.w_oor", train.env.weights.w_oor),
        SRPL_DOUBLE("reward.lateral_cap", train.env.weights.lateral_cap),
        SRPL_BOOL("reward.integrate_penalties", train.env.weights.integrate_penalties),

        SRPL_INT("s2c.horizon", int, train.s2c.horizon),
        SRPL_INT("s2c.bin_size", int, train.s2c.bin_size),
        SRPL_INT("s2c.buffer_capacity", std::size_t, train.s2c.buffer_capacity),
        SRPL_INT("s2c.target_sync_period", int, train.s2c.target_sync_period),
        SRPL_INT("s2c.batch_size", int, train.s2c.batch_size),
        SRPL_INT("s2c.updates_per_scenario", int, train.s2c.updates_per_scenario),
        Field{"s2c.hidden", [](const RunConfig& c) { return fmt_list(c.train.s2c.hidden); },
              [](RunConfig& c, std::string_view k, std::string_view v) { c.train.s2c.hidden = parse_list<int>(k, v); }},
        SRPL_DOUBLE("s2c.learning_rate", train.s2c.learning_rate),

        SRPL_DOUBLE("algo.clip", train.algo.clip),
        SRPL_DOUBLE("algo.lambda_gae", train.algo.lambda_gae),
        SRPL_DOUBLE("algo.lr_lambda", train.algo.lr_lambda),
        SRPL_DOUBLE("algo.lambda_init", train.algo.lambda_init),
        SRPL_DOUBLE("algo.p3o_penalty", train.algo.p3o_penalty),
        SRPL_DOUBLE("algo.oncrpo_eta", train.algo.oncrpo_eta),
        SRPL_INT("algo.epochs", int, train.algo.epochs),
        SRPL_INT("algo.minibatch", int, train.algo.minibatch),
        SRPL_INT("algo.steps_per_batch", int, train.algo.steps_per_batch),
        SRPL_INT("algo.num_envs", int, train.algo.num_envs),
        SRPL_DOUBLE("algo.policy_lr", train.algo.policy_lr),
        SRPL_DOUBLE("algo.critic_lr", train.algo.critic_lr),
        SRPL_DOUBLE("algo.max_grad_norm", train.algo.max_grad_norm),
        SRPL_DOUBLE("algo.initial_log_std", train.algo.initial_log_std),
        Field{"algo.hidden", [](const RunConfig& c) { return fmt_list(c.train.algo.hidden); },
              [](RunConfig& c, std::string_view k, std::string_view v) { c.train.algo.hidden = parse_list<int>(k, v); }},
        SRPL_BOOL("algo.critics_use_augmented", train.algo.critics_use_augmented),
        SRPL_BOOL("algo.discounted_cost_estimate", train.algo.discounted_cost_estimate),
    };
    return table;
}

#undef SRPL_DOUBLE
#undef SRPL_INT
#undef SRPL_BOOL

const Field* find_field(std::string_view key) {
    for (const auto& f : fields())
        if (key == f.key) return &f;
    return nullptr;
}

}  // namespace

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
    const Field* f = find_field(key);
    if (f == nullptr) throw ConfigError(std::string(key), "unknown config key '" + std::string(key) + "'");
    f->set(cfg, key, value);
}

std::string get_config_value(const RunConfig& cfg, std::string_view key) {
    const Field* f = find_field(key);
    if (f == nullptr) throw ConfigError(std::string(key), "unknown config key '" + std::string(key) + "'");
    return f->get(cfg);
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.emplace_back(f.key);
    return out;
}

RunConfig parse_run_config(std::string_view text, std::map<std::string, std::string>* extra,
                           std::vector<std::string_view> passthrough_prefixes) {
    RunConfig cfg;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(stripped, "line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = trim(std::string_view(stripped).substr(0, eq));
        const std::string value = trim(std::string_view(stripped).substr(eq + 1));
        bool passthrough = false;
        for (auto p : passthrough_prefixes)
            if (std::string_view(key).starts_with(p)) passthrough = true;
        if (passthrough) {
            if (extra != nullptr) (*extra)[key] = value;
            continue;
        }
        set_config_value(cfg, key, value);
    }
    return cfg;
}

std::string to_config_text(const RunConfig& cfg) {
    std::string out;
    for (const auto& f : fields()) {
        out += f.key;
        out += " = ";
        out += f.get(cfg);
        out += '\n';
    }
    return out;
}

}  // namespace srpl
