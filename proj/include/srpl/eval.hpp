#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "srpl/env.hpp"
#include "srpl/saferl.hpp"
#include "srpl/scenario.hpp"
#include "srpl/stats.hpp"

namespace srpl {

struct DataMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Zero-mean gaussian perturbation of the obstacle-lidar slice.
struct NoiseSpec {
    double sigma = 0.0;
    bool clip_to_unit = true;

    void validate() const;
};

// Perturbs obs[lidar_offset, lidar_offset + n_lidar) only.
void apply_noise(std::span<float> obs, const ObservationLayout& layout, const NoiseSpec& noise, Rng& rng);

/// Maps an observation to an action. Implementations must be safe to call
/// concurrently on distinct environments.
class Controller {
public:
    virtual ~Controller() = default;
    virtual Action act(std::span<const float> obs, const DrivingEnv& env) const = 0;
    // Observation width the controller accepts; 0 accepts any.
    virtual int input_dim() const { return 0; }
};

class PolicyController final : public Controller {
public:
    explicit PolicyController(const PolicyBundle& bundle) : bundle_(&bundle) {}
    Action act(std::span<const float> obs, const DrivingEnv&) const override { return bundle_->mean_action(obs); }
    int input_dim() const override { return bundle_->raw_dim; }

private:
    const PolicyBundle* bundle_;
};

class ExpertController final : public Controller {
public:
    Action act(std::span<const float>, const DrivingEnv& env) const override { return expert_action(env); }
};

class ZeroController final : public Controller {
public:
    Action act(std::span<const float>, const DrivingEnv&) const override { return {0.0f, 0.0f}; }
};

struct ScenarioRow {
    std::uint64_t scenario_id = 0;
    EpisodeMetrics metrics;
    Outcome outcome = Outcome::timeout;
    int steps = 0;
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
};

enum class Metric { reward, cost, rc, sr, oor };

std::string_view to_string(Metric m);
Metric parse_metric(std::string_view s);
double metric_value(const EpisodeMetrics& m, Metric metric);

struct EvaluationReport {
    std::string label;
    std::string fingerprint;  // checkpoint hash or controller name
    double sigma = 0.0;
    std::uint64_t noise_seed = 0;
    std::string eval_domain;
    std::string train_domain;  // empty when not a trained policy
    std::vector<ScenarioRow> rows;

    MeanStd aggregate(Metric metric) const;

    // Header record followed by one record per scenario.
    std::string to_jsonl() const;
    static EvaluationReport from_jsonl(std::string_view text);

    static std::string summary_header();  // label,Reward,Cost,RC,SR,OOR
    std::string summary_row() const;      // values as "mean (std)"
};

struct EvalOptions {
    EnvConfig env;
    NoiseSpec noise;
    std::uint64_t noise_seed = 0;
};

/// One episode per scenario; the noise stream of a scenario is keyed by
/// (noise_seed, scenario id). Throws DataMismatch when the controller's input
/// width differs from the environment's observation width.
EvaluationReport evaluate(const Controller& controller, std::span<const ScenarioSpec> scenarios,
                          const EvalOptions& options);

// Paired by scenario id; difference is a - b. Throws DataMismatch when the
// two reports cover different scenario sets.
TestResult compare(const EvaluationReport& a, const EvaluationReport& b, Metric metric);

struct SweepRow {
    double sigma = 0.0;
    std::string algorithm;
    double reward = 0.0;
    double cost = 0.0;
};

struct NamedController {
    std::string label;
    const Controller* controller = nullptr;
};

// sigmas must be ascending and contain 0.
std::vector<SweepRow> robustness_sweep(std::span<const NamedController> controllers,
                                       std::span<const ScenarioSpec> scenarios, std::span<const double> sigmas,
                                       const EvalOptions& base);

std::string sweep_csv(std::span<const SweepRow> rows);

EvaluationReport transfer_eval(const PolicyBundle& bundle, Domain train_domain, Domain eval_domain,
                               std::span<const ScenarioSpec> scenarios, const EvalOptions& options);

/// `count` observations sampled from expert rollouts over `scenarios`.
std::vector<std::vector<float>> collect_observation_fixture(std::span<const ScenarioSpec> scenarios,
                                                            const EnvConfig& env, std::size_t count,
                                                            std::uint64_t seed);

struct ActionVariance {
    std::array<double, 2> clean{};     // per-dimension variance over the fixture
    std::array<double, 2> noisy{};
    std::array<double, 2> increase{};  // noisy - clean
    double total_increase = 0.0;       // summed over dimensions
    double sensitivity = 0.0;          // mean squared action shift, clean vs noisy
};

ActionVariance action_variance(const PolicyBundle& bundle, std::span<const std::vector<float>> observations,
                               const ObservationLayout& layout, const NoiseSpec& noise, std::uint64_t noise_seed);

struct VarianceComparison {
    ActionVariance baseline;
    ActionVariance srpl;
    double gap = 0.0;  // baseline.total_increase - srpl.total_increase
};

VarianceComparison action_variance_analysis(const PolicyBundle& baseline, const PolicyBundle& srpl,
                                            std::span<const std::vector<float>> observations,
                                            const ObservationLayout& layout, const NoiseSpec& noise,
                                            std::uint64_t noise_seed);

}  // namespace srpl
