#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "srpl/eval.hpp"

using namespace srpl;

namespace {

PolicyBundle random_policy(std::uint64_t seed, double spread = 1.0) {
    Rng rng = make_stream(seed, 0);
    AlgoConfig a;
    a.hidden = {16, 16};
    PolicyBundle b = PolicyBundle::create(ObservationLayout{}.total_dim(), a, 1.0, nullptr, rng);
    for (auto& p : b.policy.params()) p += static_cast<float>(spread * 0.3 * standard_normal(rng));
    return b;
}

EvaluationReport fake_report(std::vector<double> costs, std::uint64_t first_id = 0) {
    EvaluationReport r;
    r.eval_domain = "dense";
    for (std::size_t i = 0; i < costs.size(); ++i) {
        ScenarioRow row;
        row.scenario_id = first_id + i;
        row.metrics.total_cost = costs[i];
        row.metrics.success = costs[i] == 0.0 ? 1 : 0;
        r.rows.push_back(row);
    }
    return r;
}

}  // namespace

TEST(Noise, TouchesOnlyLidarSlice) {
    ObservationLayout layout;
    Rng src = make_stream(61, 0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<float> obs(static_cast<std::size_t>(layout.total_dim()));
        for (auto& v : obs) v = static_cast<float>(uniform01(src));
        auto noisy = obs;
        Rng rng = make_stream(61, 1 + static_cast<std::uint64_t>(trial));
        apply_noise(noisy, layout, NoiseSpec{0.3}, rng);
        bool changed = false;
        for (int i = 0; i < layout.total_dim(); ++i) {
            const auto k = static_cast<std::size_t>(i);
            if (i < layout.n_lidar) {
                changed |= noisy[k] != obs[k];
                EXPECT_GE(noisy[k], 0.0f);
                EXPECT_LE(noisy[k], 1.0f);
            } else {
                EXPECT_EQ(noisy[k], obs[k]);
            }
        }
        EXPECT_TRUE(changed);
    }
}

TEST(Noise, ZeroSigmaIsIdentityAndNegativeRejected) {
    ObservationLayout layout;
    std::vector<float> obs(static_cast<std::size_t>(layout.total_dim()), 0.4f);
    auto copy = obs;
    Rng rng = make_stream(62, 0);
    apply_noise(copy, layout, NoiseSpec{0.0}, rng);
    EXPECT_EQ(copy, obs);
    EXPECT_THROW(NoiseSpec{-0.1}.validate(), std::invalid_argument);
}

TEST(Noise, UnclippedCanLeaveUnitInterval) {
    ObservationLayout layout;
    std::vector<float> obs(static_cast<std::size_t>(layout.total_dim()), 1.0f);
    Rng rng = make_stream(63, 0);
    NoiseSpec n{0.5};
    n.clip_to_unit = false;
    apply_noise(obs, layout, n, rng);
    EXPECT_GT(*std::max_element(obs.begin(), obs.begin() + layout.n_lidar), 1.0f);
}

TEST(Evaluate, DeterministicAcrossRuns) {
    const auto specs = generate_scenario_set(Domain::dense, 3000, 16);
    const auto bundle = random_policy(1);
    EvalOptions opt;
    opt.noise.sigma = 0.1;
    opt.noise_seed = 5;
    const auto a = evaluate(PolicyController(bundle), specs, opt);
    const auto b = evaluate(PolicyController(bundle), specs, opt);
    EXPECT_EQ(a.to_jsonl(), b.to_jsonl());
    opt.noise.sigma = 0.0;
    EXPECT_EQ(evaluate(PolicyController(bundle), specs, opt).to_jsonl(),
              evaluate(PolicyController(bundle), specs, opt).to_jsonl());
}

TEST(Evaluate, ZeroControllerGoesNowhere) {
    const auto specs = generate_scenario_set(Domain::sparse, 3100, 20);
    const auto rep = evaluate(ZeroController{}, specs, EvalOptions{});
    ASSERT_EQ(rep.rows.size(), specs.size());
    EXPECT_EQ(rep.aggregate(Metric::sr).mean, 0.0);
    EXPECT_LT(rep.aggregate(Metric::rc).mean, 1e-9);
    EXPECT_EQ(rep.aggregate(Metric::cost).mean, 0.0);
}

TEST(Evaluate, ExpertOnSparse) {
    const auto specs = generate_scenario_set(Domain::sparse, 3200, 100);
    const auto rep = evaluate(ExpertController{}, specs, EvalOptions{});
    EXPECT_GE(rep.aggregate(Metric::sr).mean, 0.9);
    EXPECT_LE(rep.aggregate(Metric::oor).mean, 0.05);
}

TEST(Evaluate, DimensionMismatchDetected) {
    Rng rng = make_stream(64, 0);
    S2CConfig s2c;
    s2c.hidden = {8};
    AlgoConfig a;
    a.hidden = {8};
    EnvConfig env;
    const auto bundle = PolicyBundle::create(env.layout.total_dim(), a, 1.0, &s2c, rng);
    EvalOptions opt;
    opt.env.layout.n_lidar = 30;
    const auto specs = generate_scenario_set(Domain::sparse, 0, 2);
    EXPECT_THROW(evaluate(PolicyController(bundle), specs, opt), DataMismatch);
    // Augmented policy on the right layout is fine: it augments internally.
    EXPECT_NO_THROW(evaluate(PolicyController(bundle), specs, EvalOptions{}));
}

TEST(Report, AggregatesMatchRows) {
    const auto specs = generate_scenario_set(Domain::dense, 3300, 24);
    const auto rep = evaluate(ExpertController{}, specs, EvalOptions{});
    for (Metric m : {Metric::reward, Metric::cost, Metric::rc, Metric::sr, Metric::oor}) {
        double s = 0.0, s2 = 0.0;
        for (const auto& r : rep.rows) s += metric_value(r.metrics, m);
        const double mean = s / static_cast<double>(rep.rows.size());
        for (const auto& r : rep.rows) s2 += std::pow(metric_value(r.metrics, m) - mean, 2);
        const auto ms = rep.aggregate(m);
        EXPECT_NEAR(ms.mean, mean, 1e-9);
        EXPECT_NEAR(ms.std, std::sqrt(s2 / static_cast<double>(rep.rows.size())), 1e-9);
    }
}

TEST(Report, JsonlRoundTrip) {
    const auto specs = generate_scenario_set(Domain::dense, 3400, 6);
    auto rep = evaluate(ExpertController{}, specs, EvalOptions{});
    rep.label = "expert";
    rep.fingerprint = "abc";
    const auto text = rep.to_jsonl();
    const auto back = EvaluationReport::from_jsonl(text);
    EXPECT_EQ(back.to_jsonl(), text);
    EXPECT_EQ(back.rows.size(), 6u);
    EXPECT_THROW(EvaluationReport::from_jsonl(text.substr(0, text.rfind('{'))), DataMismatch);
    EXPECT_THROW(EvaluationReport::from_jsonl("not json\n"), DataMismatch);
    EXPECT_EQ(EvaluationReport::summary_header(), "label,Reward,Cost,RC,SR,OOR");
    EXPECT_EQ(rep.summary_row().rfind("expert,", 0), 0u);
}

TEST(Compare, SelfIsDegenerate) {
    const auto r = fake_report({1, 0, 2, 0, 4});
    const auto t = compare(r, r, Metric::cost);
    EXPECT_TRUE(t.degenerate);
    EXPECT_EQ(t.p_two_sided, 1.0);
}

TEST(Compare, ShiftByOneIsSignificant) {
    Rng rng = make_stream(65, 0);
    std::vector<double> base(1000), plus(1000);
    for (std::size_t i = 0; i < 1000; ++i) {
        base[i] = uniform01(rng) * 4.0;
        plus[i] = base[i] + 1.0;
    }
    const auto t = compare(fake_report(plus), fake_report(base), Metric::cost);
    EXPECT_LT(t.p_two_sided, 1e-3);
    EXPECT_GT(t.z, 0.0);
}

TEST(Compare, AntisymmetricAndPairedById) {
    Rng rng = make_stream(66, 0);
    std::vector<double> a(40), b(40);
    for (std::size_t i = 0; i < 40; ++i) {
        a[i] = uniform01(rng);
        b[i] = uniform01(rng) + 0.2;
    }
    auto ra = fake_report(a), rb = fake_report(b);
    const auto ab = compare(ra, rb, Metric::cost);
    const auto ba = compare(rb, ra, Metric::cost);
    EXPECT_EQ(ab.z, -ba.z);
    EXPECT_EQ(ab.p_two_sided, ba.p_two_sided);
    EXPECT_EQ(ab.effect_size_r, ba.effect_size_r);
    std::reverse(rb.rows.begin(), rb.rows.end());
    EXPECT_EQ(compare(ra, rb, Metric::cost).z, ab.z);
}

TEST(Compare, MismatchedSetsRejected) {
    const auto a = fake_report({1, 2, 3});
    EXPECT_THROW(compare(a, fake_report({1, 2}), Metric::cost), DataMismatch);
    EXPECT_THROW(compare(a, fake_report({1, 2, 3}, 10), Metric::cost), DataMismatch);
    auto other = fake_report({1, 2, 3});
    other.eval_domain = "sparse";
    EXPECT_THROW(compare(a, other, Metric::cost), DataMismatch);
}

TEST(Compare, IndependentReportsCalibrated) {
    Rng rng = make_stream(67, 0);
    int hits = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> a(60), b(60);
        for (std::size_t i = 0; i < 60; ++i) {
            a[i] = uniform01(rng) * 3.0;
            b[i] = uniform01(rng) * 3.0;
        }
        hits += compare(fake_report(a), fake_report(b), Metric::cost).significant;
    }
    EXPECT_NEAR(hits / 1000.0, 0.05, 0.02);
}

TEST(Metric, ParseRoundTrip) {
    for (Metric m : {Metric::reward, Metric::cost, Metric::rc, Metric::sr, Metric::oor})
        EXPECT_EQ(parse_metric(to_string(m)), m);
    EXPECT_THROW(parse_metric("speed"), std::invalid_argument);
}

TEST(Sweep, ZeroRowMatchesPlainEvaluation) {
    const auto specs = generate_scenario_set(Domain::dense, 3500, 12);
    const auto bundle = random_policy(2);
    PolicyController pc(bundle);
    ZeroController zc;
    const std::vector<NamedController> ctl{{"policy", &pc}, {"zero", &zc}};
    const std::vector<double> sigmas{0.0, 0.1, 0.2};
    const auto rows = robustness_sweep(ctl, specs, sigmas, EvalOptions{});
    ASSERT_EQ(rows.size(), 6u);
    const auto plain = evaluate(pc, specs, EvalOptions{});
    EXPECT_EQ(rows[0].algorithm, "policy");
    EXPECT_EQ(rows[0].cost, plain.aggregate(Metric::cost).mean);
    EXPECT_EQ(rows[0].reward, plain.aggregate(Metric::reward).mean);
    for (const auto& r : rows)
        if (r.algorithm == "zero") EXPECT_EQ(r.cost, 0.0);
    const auto csv = sweep_csv(rows);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "sigma,algorithm,reward,cost");
    EXPECT_THROW(robustness_sweep(ctl, specs, std::vector<double>{0.1, 0.0}, EvalOptions{}), std::invalid_argument);
    EXPECT_THROW(robustness_sweep(ctl, specs, std::vector<double>{0.1, 0.2}, EvalOptions{}), std::invalid_argument);
}

TEST(Transfer, SameDomainEqualsPlainEvaluation) {
    const auto specs = generate_scenario_set(Domain::sparse, 3600, 8);
    const auto bundle = random_policy(3);
    const auto t = transfer_eval(bundle, Domain::sparse, Domain::sparse, specs, EvalOptions{});
    auto plain = evaluate(PolicyController(bundle), specs, EvalOptions{});
    plain.train_domain = "sparse";
    EXPECT_EQ(t.to_jsonl(), plain.to_jsonl());
    const auto cross = transfer_eval(bundle, Domain::dense, Domain::sparse, specs, EvalOptions{});
    EXPECT_EQ(cross.train_domain, "dense");
    EXPECT_EQ(cross.eval_domain, "sparse");
    EXPECT_THROW(transfer_eval(bundle, Domain::dense, Domain::dense, specs, EvalOptions{}), DataMismatch);
}

TEST(ActionVariance, ZeroSigmaGivesZeroGap) {
    const auto specs = generate_scenario_set(Domain::dense, 3700, 10);
    const auto obs = collect_observation_fixture(specs, EnvConfig{}, 100, 1);
    ASSERT_EQ(obs.size(), 100u);
    const auto a = random_policy(4), b = random_policy(5);
    const auto c = action_variance_analysis(a, b, obs, ObservationLayout{}, NoiseSpec{0.0}, 9);
    EXPECT_EQ(c.baseline.clean, c.baseline.noisy);
    EXPECT_EQ(c.srpl.total_increase, 0.0);
    EXPECT_EQ(c.gap, 0.0);
}

TEST(ActionVariance, LidarBlindPolicyUnaffected) {
    const auto specs = generate_scenario_set(Domain::dense, 3800, 10);
    const auto obs = collect_observation_fixture(specs, EnvConfig{}, 100, 2);
    auto blind = random_policy(6);
    ObservationLayout layout;
    auto w = blind.policy.weight(0);
    const auto in = static_cast<std::size_t>(blind.policy.input_dim());
    for (std::size_t o = 0; o < w.size() / in; ++o)
        for (int k = 0; k < layout.n_lidar; ++k) w[o * in + static_cast<std::size_t>(k)] = 0.0f;
    const auto v = action_variance(blind, obs, layout, NoiseSpec{0.1}, 3);
    EXPECT_EQ(v.total_increase, 0.0);
    EXPECT_EQ(v.sensitivity, 0.0);
    const auto seeing = action_variance(random_policy(7, 3.0), obs, layout, NoiseSpec{0.1}, 3);
    EXPECT_GT(seeing.sensitivity, 0.0);
}

TEST(Fixture, DeterministicAndSized) {
    const auto specs = generate_scenario_set(Domain::dense, 3900, 5);
    EXPECT_EQ(collect_observation_fixture(specs, EnvConfig{}, 50, 4), collect_observation_fixture(specs, EnvConfig{}, 50, 4));
    EXPECT_THROW(collect_observation_fixture(specs, EnvConfig{}, 1000000, 4), std::invalid_argument);
}
