// Command-line front end: train, eval, stats, sweep, transfer, gen-scenarios, defaults.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "srpl/checkpoint.hpp"
#include "srpl/config.hpp"
#include "srpl/eval.hpp"
#include "srpl/kernels.hpp"
#include "srpl/trainer.hpp"

namespace fs = std::filesystem;
using namespace srpl;

namespace {

enum Exit { kOk = 0, kConfigError = 2, kMissingArtifact = 3, kDataMismatch = 4 };

std::string artifact_name(const TrainConfig& c) {
    return std::string(to_string(c.algorithm)) + "_" + (c.srpl ? "srpl" : "base") + "_" +
           std::string(to_string(c.domain)) + "_" + std::to_string(c.seed);
}

std::string read_required(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifact("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<ScenarioSpec> load_scenarios_required(const std::string& path) {
    if (!fs::exists(path)) throw MissingArtifact("scenario file not found: " + path);
    try {
        return load_scenario_file(path);
    } catch (const MissingArtifact&) {
        throw;
    } catch (const std::exception& e) {
        throw DataMismatch("malformed scenario file " + path + ": " + e.what());
    }
}

struct LoadedCheckpoint {
    LoadedPolicy policy;
    std::string fingerprint;
    std::string label;
};

LoadedCheckpoint load_policy(const std::string& path) {
    const std::string bytes = read_required(path);
    LoadedCheckpoint out;
    try {
        out.policy = policy_from_checkpoint(deserialize_checkpoint(bytes));
    } catch (const ConfigError& e) {
        throw DataMismatch("checkpoint metadata: " + std::string(e.what()));
    } catch (const std::exception& e) {
        throw DataMismatch("corrupt checkpoint " + path + ": " + e.what());
    }
    out.fingerprint = hex64(fnv1a64(bytes));
    out.label = fs::path(path).stem().string();
    return out;
}

void ensure_dir(const std::string& dir) {
    if (!dir.empty()) fs::create_directories(dir);
}

EvaluationReport run_eval(const LoadedCheckpoint& ck, const std::vector<ScenarioSpec>& scenarios, double sigma,
                          std::uint64_t noise_seed) {
    EvalOptions opt;
    opt.env = ck.policy.config.resolved_env();
    opt.noise.sigma = sigma;
    opt.noise_seed = noise_seed;
    EvaluationReport rep = evaluate(PolicyController(ck.policy.bundle), scenarios, opt);
    rep.label = ck.label;
    rep.fingerprint = ck.fingerprint;
    rep.train_domain = std::string(to_string(ck.policy.config.domain));
    return rep;
}

// A cached report is reusable when it parses and matches the requested cell.
bool cell_complete(const std::string& path, const std::string& fingerprint, double sigma, std::uint64_t noise_seed,
                   const std::vector<ScenarioSpec>& scenarios) {
    if (!fs::exists(path)) return false;
    try {
        const EvaluationReport rep = EvaluationReport::from_jsonl(read_file(path));
        if (rep.fingerprint != fingerprint || rep.sigma != sigma || rep.noise_seed != noise_seed) return false;
        if (rep.rows.size() != scenarios.size()) return false;
        for (std::size_t i = 0; i < scenarios.size(); ++i)
            if (rep.rows[i].scenario_id != scenarios[i].id) return false;
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

void write_report(const EvaluationReport& rep, const std::string& prefix) {
    write_file(prefix + ".jsonl", rep.to_jsonl());
    write_file(prefix + ".csv", EvaluationReport::summary_header() + "\n" + rep.summary_row() + "\n");
}

std::string sigma_tag(double s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", s);
    return buf;
}

int cmd_defaults() {
    std::cout << to_config_text(RunConfig{});
    return kOk;
}

int cmd_gen(const std::string& domain, std::size_t count, std::uint64_t seed, const std::string& out) {
    Domain d;
    try {
        d = parse_domain(domain);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("--domain", e.what());
    }
    if (out.empty()) throw ConfigError("--out", "--out is required");
    if (const auto parent = fs::path(out).parent_path(); !parent.empty()) fs::create_directories(parent);
    save_scenario_file(out, generate_scenario_set(d, seed, count));
    std::cout << "wrote " << count << " " << domain << " scenarios to " << out << "\n";
    return kOk;
}

int cmd_train(const std::string& config_path, const std::vector<std::uint64_t>& seeds, const std::string& out) {
    if (config_path.empty()) throw ConfigError("--config", "--config is required");
    RunConfig rc = parse_run_config(read_required(config_path));
    if (!seeds.empty()) rc.seeds = seeds;
    if (!out.empty()) rc.output_dir = out;
    rc.validate();
    ensure_dir(rc.output_dir);
    for (std::uint64_t seed : rc.seeds) {
        const TrainConfig cfg = rc.for_seed(seed);
        const std::string base = (fs::path(rc.output_dir) / artifact_name(cfg)).string();
        std::ofstream log(base + ".log.jsonl", std::ios::binary | std::ios::trunc);
        {
            RunConfig echo = rc;
            echo.seeds = {seed};
            nlohmann::json head = {{"type", "config"}, {"config", to_config_text(echo)}, {"seed", seed}};
            log << head.dump() << "\n";
        }
        TrainResult res = train(cfg, nullptr, [&](const IterationLog& l) {
            log << to_json_line(l) << "\n";
            log.flush();
            std::cerr << artifact_name(cfg) << " it " << l.iteration << " steps " << l.steps << " return "
                      << l.mean_return << " cost " << l.mean_cost << " sr " << l.success_rate << "\n";
        });
        const Checkpoint ck = make_checkpoint(res.bundle, cfg, res.steps);
        save_checkpoint(base + ".ckpt", ck);
        std::cout << base << ".ckpt " << hex64(fnv1a64(serialize_checkpoint(ck))) << "\n";
    }
    return kOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& scenarios_path, double sigma, std::uint64_t seed,
             const std::string& out) {
    if (checkpoint.empty()) throw ConfigError("--checkpoint", "--checkpoint is required");
    if (scenarios_path.empty()) throw ConfigError("--scenarios", "--scenarios is required");
    if (!(sigma >= 0.0)) throw ConfigError("--sigma", "--sigma must be nonnegative");
    const LoadedCheckpoint ck = load_policy(checkpoint);
    const auto scenarios = load_scenarios_required(scenarios_path);
    const EvaluationReport rep = run_eval(ck, scenarios, sigma, seed);
    const std::string prefix = out.empty() ? ck.label + "_eval" : out;
    if (const auto parent = fs::path(prefix).parent_path(); !parent.empty()) fs::create_directories(parent);
    write_report(rep, prefix);
    std::cout << EvaluationReport::summary_header() << "\n" << rep.summary_row() << "\n";
    return kOk;
}

int cmd_stats(const std::vector<std::string>& reports, const std::string& metric) {
    if (reports.size() != 2) throw ConfigError("reports", "stats needs exactly two report files");
    Metric m;
    try {
        m = parse_metric(metric);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("--metric", e.what());
    }
    if (m != Metric::cost && m != Metric::sr) throw ConfigError("--metric", "--metric must be cost or sr");
    const auto a = EvaluationReport::from_jsonl(read_required(reports[0]));
    const auto b = EvaluationReport::from_jsonl(read_required(reports[1]));
    const TestResult t = compare(a, b, m);
    nlohmann::json j = nlohmann::json::parse(t.to_json());
    j["metric"] = metric;
    j["a"] = a.label;
    j["b"] = b.label;
    std::cout << j.dump() << "\n";
    return kOk;
}

int cmd_sweep(const std::vector<std::string>& checkpoints, const std::string& scenarios_path,
              std::vector<double> sigmas, std::uint64_t seed, const std::string& out) {
    if (checkpoints.empty()) throw ConfigError("--checkpoint", "sweep needs at least one --checkpoint");
    if (scenarios_path.empty()) throw ConfigError("--scenarios", "--scenarios is required");
    if (sigmas.empty()) sigmas = {0.0, 0.01, 0.05, 0.1};
    if (!std::is_sorted(sigmas.begin(), sigmas.end()) || sigmas.front() != 0.0 || sigmas.front() < 0.0)
        throw ConfigError("--sigma", "sigma list must be ascending and start at 0");
    const std::string dir = out.empty() ? "sweep" : out;
    ensure_dir(dir);
    const auto scenarios = load_scenarios_required(scenarios_path);
    std::vector<LoadedCheckpoint> cks;
    for (const auto& c : checkpoints) cks.push_back(load_policy(c));

    std::vector<SweepRow> rows;
    int computed = 0;
    for (double s : sigmas) {
        for (const auto& ck : cks) {
            const std::string prefix = (fs::path(dir) / (ck.label + "_sigma" + sigma_tag(s))).string();
            EvaluationReport rep;
            if (cell_complete(prefix + ".jsonl", ck.fingerprint, s, seed, scenarios)) {
                rep = EvaluationReport::from_jsonl(read_file(prefix + ".jsonl"));
            } else {
                rep = run_eval(ck, scenarios, s, seed);
                write_report(rep, prefix);
                ++computed;
            }
            rows.push_back({s, ck.label, rep.aggregate(Metric::reward).mean, rep.aggregate(Metric::cost).mean});
        }
    }
    write_file((fs::path(dir) / "sweep.csv").string(), sweep_csv(rows));
    std::cout << sweep_csv(rows);
    std::cerr << "computed " << computed << " of " << rows.size() << " cells\n";
    return kOk;
}

int cmd_transfer(const std::vector<std::string>& checkpoints, const std::vector<std::string>& scenario_paths,
                 std::uint64_t seed, const std::string& out) {
    if (checkpoints.empty()) throw ConfigError("--checkpoint", "transfer needs at least one --checkpoint");
    if (scenario_paths.size() != 2) throw ConfigError("--scenarios", "transfer needs one scenario file per domain");
    const std::string dir = out.empty() ? "transfer" : out;
    ensure_dir(dir);
    std::vector<std::vector<ScenarioSpec>> sets;
    for (const auto& p : scenario_paths) {
        sets.push_back(load_scenarios_required(p));
        if (sets.back().empty()) throw DataMismatch("empty scenario file " + p);
        for (const auto& s : sets.back())
            if (s.domain != sets.back().front().domain) throw DataMismatch("mixed domains in " + p);
    }
    if (sets[0].front().domain == sets[1].front().domain)
        throw DataMismatch("transfer needs one dense and one sparse scenario file");

    std::string csv = "label,train_domain,eval_domain,Reward,Cost,RC,SR,OOR\n";
    int computed = 0, cells = 0;
    for (const auto& path : checkpoints) {
        const LoadedCheckpoint ck = load_policy(path);
        for (const auto& set : sets) {
            const Domain eval_domain = set.front().domain;
            const std::string prefix =
                (fs::path(dir) / (ck.label + "_on_" + std::string(to_string(eval_domain)))).string();
            EvaluationReport rep;
            if (cell_complete(prefix + ".jsonl", ck.fingerprint, 0.0, seed, set)) {
                rep = EvaluationReport::from_jsonl(read_file(prefix + ".jsonl"));
            } else {
                EvalOptions opt;
                opt.env = ck.policy.config.resolved_env();
                opt.noise_seed = seed;
                rep = transfer_eval(ck.policy.bundle, ck.policy.config.domain, eval_domain, set, opt);
                rep.label = ck.label;
                rep.fingerprint = ck.fingerprint;
                write_report(rep, prefix);
                ++computed;
            }
            ++cells;
            const std::string row = rep.summary_row();
            csv += rep.label + "," + rep.train_domain + "," + rep.eval_domain + row.substr(rep.label.size()) + "\n";
        }
    }
    write_file((fs::path(dir) / "transfer.csv").string(), csv);
    std::cout << csv;
    std::cerr << "computed " << computed << " of " << cells << " cells\n";
    return kOk;
}

void apply_worker_env() {
    const char* w = std::getenv("SRPL_WORKERS");
    if (w == nullptr || *w == '\0') return;
    char* end = nullptr;
    const long n = std::strtol(w, &end, 10);
    if (*end != '\0' || n <= 0) throw ConfigError("SRPL_WORKERS", "SRPL_WORKERS must be a positive integer");
    kernels::set_workers(static_cast<int>(n));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Safety-representation RL laboratory"};
    app.require_subcommand(1);

    std::string config, out, scenarios_path, checkpoint, metric = "cost", domain = "sparse";
    std::vector<std::uint64_t> seeds;
    std::uint64_t seed = 0;
    std::size_t count = 200;
    double sigma = 0.0;
    std::vector<double> sigmas;
    std::vector<std::string> checkpoints, scenario_list, reports;

    app.add_subcommand("defaults", "Print every config key with its default value");

    auto* gen = app.add_subcommand("gen-scenarios", "Materialize a scenario set to a file");
    gen->add_option("--domain", domain, "dense or sparse");
    gen->add_option("--count", count, "Number of scenarios");
    gen->add_option("--seed", seed, "First scenario seed (ids are seed .. seed+count-1)");
    gen->add_option("--out", out, "Output file")->required();

    auto* tr = app.add_subcommand("train", "Train one run per seed");
    tr->add_option("--config", config, "Config file")->required();
    tr->add_option("--seed", seeds, "Override the seed list");
    tr->add_option("--out", out, "Output directory (overrides run.output_dir)");

    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a scenario file");
    ev->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    ev->add_option("--scenarios", scenarios_path, "Scenario file")->required();
    ev->add_option("--sigma", sigma, "Lidar noise standard deviation");
    ev->add_option("--seed", seed, "Noise seed");
    ev->add_option("--out", out, "Output prefix for .jsonl and .csv");

    auto* st = app.add_subcommand("stats", "Paired signed-rank test between two reports");
    st->add_option("reports", reports, "Two report files (.jsonl)")->expected(2);
    st->add_option("--metric", metric, "cost or sr");

    auto* sw = app.add_subcommand("sweep", "Noise robustness sweep");
    sw->add_option("--checkpoint", checkpoints, "Checkpoint files")->required();
    sw->add_option("--scenarios", scenarios_path, "Scenario file")->required();
    sw->add_option("--sigma", sigmas, "Ascending noise levels starting at 0");
    sw->add_option("--seed", seed, "Noise seed");
    sw->add_option("--out", out, "Output directory");

    auto* tf = app.add_subcommand("transfer", "Cross-domain evaluation grid");
    tf->add_option("--checkpoint", checkpoints, "Checkpoint files")->required();
    tf->add_option("--scenarios", scenario_list, "One scenario file per domain")->required();
    tf->add_option("--seed", seed, "Noise seed");
    tf->add_option("--out", out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    try {
        apply_worker_env();
        if (app.got_subcommand("defaults")) return cmd_defaults();
        if (gen->parsed()) return cmd_gen(domain, count, seed, out);
        if (tr->parsed()) return cmd_train(config, seeds, out);
        if (ev->parsed()) return cmd_eval(checkpoint, scenarios_path, sigma, seed, out);
        if (st->parsed()) return cmd_stats(reports, metric);
        if (sw->parsed()) return cmd_sweep(checkpoints, scenarios_path, sigmas, seed, out);
        if (tf->parsed()) return cmd_transfer(checkpoints, scenario_list, seed, out);
    } catch (const ConfigError& e) {
        std::cerr << "config error [" << e.key << "]: " << e.what() << "\n";
        return kConfigError;
    } catch (const MissingArtifact& e) {
        std::cerr << "missing artifact: " << e.what() << "\n";
        return kMissingArtifact;
    } catch (const DataMismatch& e) {
        std::cerr << "data mismatch: " << e.what() << "\n";
        return kDataMismatch;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kOk;
}
