#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "prbslice/env.hpp"
#include "prbslice/error.hpp"

namespace prbslice {
namespace {

std::shared_ptr<const OracleSources> sources() {
    static const auto s = std::make_shared<const OracleSources>(OracleSources::defaults());
    return s;
}

SliceEnv make_env(ScenarioName name = ScenarioName::Stadium, OracleKind kind = OracleKind::Practical) {
    return SliceEnv(ScenarioConfig::preset(name), ThroughputOracle(kind, sources()));
}

TEST(LargestRemainder, ExactSumAndTieBreak) {
    const double w[] = {1.0, 1.0, 1.0};
    EXPECT_EQ(largest_remainder(w, 106), (std::vector<int>{36, 35, 35}));
    EXPECT_EQ(largest_remainder(w, 0), (std::vector<int>{0, 0, 0}));
    const double skew[] = {0.5, 0.3, 0.2};
    EXPECT_EQ(largest_remainder(skew, 10), (std::vector<int>{5, 3, 2}));
    const double one[] = {0.0, 2.0, 0.0};
    EXPECT_EQ(largest_remainder(one, 7), (std::vector<int>{0, 7, 0}));
}

TEST(LargestRemainder, RejectsBadWeights) {
    const double neg[] = {1.0, -1.0};
    EXPECT_THROW(largest_remainder(neg, 5), DomainError);
    const double zero[] = {0.0, 0.0};
    EXPECT_THROW(largest_remainder(zero, 5), DomainError);
    const double ok[] = {1.0};
    EXPECT_THROW(largest_remainder(ok, -1), ContractError);
}

TEST(ProjectAction, ZeroIsNearEvenSplit) {
    const double raw[] = {0.0, 0.0, 0.0};
    EXPECT_EQ(project_action(raw), (SliceAllocation{36, 35, 35}));
}

TEST(ProjectAction, RandomActionsSumToBudget) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0.0, 5.0);
    for (int i = 0; i < 2000; ++i) {
        const double raw[] = {g(rng), g(rng), g(rng)};
        const auto a = project_action(raw);
        EXPECT_EQ(a.total(), 106);
        EXPECT_GE(a.urllc, 0);
        EXPECT_GE(a.embb, 0);
        EXPECT_GE(a.mmtc, 0);
    }
}

TEST(ProjectAction, ExtremeAndInvalidInputs) {
    const double huge[] = {1e6, -1e6, 0.0};
    EXPECT_EQ(project_action(huge), (SliceAllocation{106, 0, 0}));
    const double nan[] = {std::nan(""), 0.0, 0.0};
    EXPECT_THROW(project_action(nan), DomainError);
    const double inf[] = {INFINITY, 0.0, 0.0};
    EXPECT_THROW(project_action(inf), DomainError);
    const double two[] = {0.0, 0.0};
    EXPECT_THROW(project_action(two), ContractError);
}

TEST(ProjectAction, ShiftInvariant) {
    const double a[] = {0.3, -1.2, 2.0};
    const double b[] = {100.3, 98.8, 102.0};
    EXPECT_EQ(project_action(a), project_action(b));
}

TEST(NormalizeDemand, ClampsAndRejectsDegenerate) {
    EXPECT_DOUBLE_EQ(normalize_demand(10.0, {5.0, 15.0}), 0.5);
    EXPECT_DOUBLE_EQ(normalize_demand(20.0, {5.0, 15.0}), 1.0);
    EXPECT_DOUBLE_EQ(normalize_demand(0.0, {5.0, 15.0}), 0.0);
    EXPECT_THROW(normalize_demand(1.0, {2.0, 2.0}), ConfigError);
}

TEST(ScenarioConfig, PresetsEmphasizeOneSlice) {
    const auto f = ScenarioConfig::preset(ScenarioName::SmartFactory);
    EXPECT_DOUBLE_EQ(f.weights.urllc, 0.4);
    EXPECT_EQ(f.emphasized(), SliceId::Urllc);
    EXPECT_EQ(ScenarioConfig::preset(ScenarioName::Stadium).emphasized(), SliceId::Embb);
    EXPECT_EQ(ScenarioConfig::preset(ScenarioName::SmartCity).emphasized(), SliceId::Mmtc);
    EXPECT_EQ(parse_scenario_name("SmartCity"), ScenarioName::SmartCity);
    EXPECT_EQ(parse_scenario_name(to_string(ScenarioName::SmartFactory)), ScenarioName::SmartFactory);
    EXPECT_THROW(parse_scenario_name("mall"), ConfigError);
    auto bad = f;
    bad.weights.urllc = 0.9;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(ScenarioTrace, DeterministicPerSeedAndBounded) {
    const auto sc = ScenarioConfig::preset(ScenarioName::Stadium);
    const RadioConfig radio;
    const SlaConfig sla;
    const auto a = ScenarioTrace::generate(sc, radio, sla, 42);
    const auto b = ScenarioTrace::generate(sc, radio, sla, 42);
    const auto c = ScenarioTrace::generate(sc, radio, sla, 43);
    EXPECT_EQ(a.hash(), b.hash());
    EXPECT_NE(a.hash(), c.hash());
    for (int s = 0; s <= a.steps; ++s) {
        for (int i = 0; i < a.n_ues; ++i) {
            EXPECT_LE(std::abs(a.position(s, i).x), sc.area_half_width_m);
            EXPECT_LE(std::abs(a.position(s, i).y), sc.area_half_width_m);
            EXPECT_GE(a.prx(s, i), radio.prx_min_db);
            EXPECT_LE(a.prx(s, i), radio.prx_max_db);
        }
    }
    for (int s = 0; s < a.steps; ++s) {
        for (int i = 0; i < a.n_ues; ++i) {
            if (slice_of_ue(i) != SliceId::Urllc) EXPECT_EQ(a.urllc_arrival(s, i), 0);
            if (slice_of_ue(i) != SliceId::Embb) EXPECT_EQ(a.embb_demand(s, i), 0.0);
        }
    }
}

TEST(ScenarioTrace, IndependentOfWeights) {
    // Streams depend on the seed only, so scenarios sharing geometry share traces.
    const RadioConfig radio;
    const SlaConfig sla;
    const auto a = ScenarioTrace::generate(ScenarioConfig::preset(ScenarioName::Stadium), radio, sla, 7);
    const auto b = ScenarioTrace::generate(ScenarioConfig::preset(ScenarioName::SmartCity), radio, sla, 7);
    EXPECT_EQ(a.hash(), b.hash());
}

TEST(SliceEnv, ObservationShapeAndRange) {
    auto env = make_env();
    const auto obs = env.reset(1);
    ASSERT_EQ(obs.size(), static_cast<std::size_t>(kObservationDim));
    for (double v : obs) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    EXPECT_DOUBLE_EQ(obs[0], 0.0);
    EXPECT_DOUBLE_EQ(obs[3 * kNumUrllc], 0.5);
    EXPECT_DOUBLE_EQ(obs[3 * (kNumUes - 1)], 1.0);
}

TEST(SliceEnv, EpisodeRunsToHorizon) {
    auto env = make_env();
    env.reset(5);
    int steps = 0;
    StepResult r;
    while (!env.done()) {
        r = env.step(SliceAllocation{36, 35, 35});
        ++steps;
        EXPECT_GE(r.reward, 0.0);
        EXPECT_LE(r.reward, 1.0);
    }
    EXPECT_EQ(steps, 256);
    EXPECT_TRUE(r.done);
    EXPECT_THROW(env.step(SliceAllocation{36, 35, 35}), ContractError);
}

TEST(SliceEnv, RejectsInvalidAllocations) {
    auto env = make_env();
    EXPECT_THROW(env.step(SliceAllocation{36, 35, 35}), ContractError);  // not reset
    env.reset(1);
    EXPECT_THROW(env.step(SliceAllocation{36, 35, 34}), ContractError);
    EXPECT_THROW(env.step(SliceAllocation{-1, 72, 35}), ContractError);
    EXPECT_NO_THROW(env.step(SliceAllocation{106, 0, 0}));
}

TEST(SliceEnv, UePrbsResumToSliceTotals) {
    for (auto rule : {SplitRule::Equal, SplitRule::DemandProportional}) {
        auto sc = ScenarioConfig::preset(ScenarioName::Stadium);
        sc.split = rule;
        SliceEnv env(sc, ThroughputOracle(OracleKind::Practical, sources()));
        env.reset(3);
        std::mt19937_64 rng(4);
        std::normal_distribution<double> g(0.0, 2.0);
        for (int i = 0; i < 200 && !env.done(); ++i) {
            const double raw[] = {g(rng), g(rng), g(rng)};
            const auto a = project_action(raw);
            const auto prbs = env.ue_prbs(a);
            const int u = std::accumulate(prbs.begin(), prbs.begin() + kNumUrllc, 0);
            const int e = std::accumulate(prbs.begin() + kNumUrllc, prbs.begin() + kNumUrllc + kNumEmbb, 0);
            const int m = std::accumulate(prbs.begin() + kNumUrllc + kNumEmbb, prbs.end(), 0);
            EXPECT_EQ(u, a.urllc);
            EXPECT_EQ(e, a.embb);
            EXPECT_EQ(m, a.mmtc);
            env.step(a);
        }
    }
}

TEST(SliceEnv, RewardIsWeightedScores) {
    auto env = make_env(ScenarioName::SmartFactory);
    env.reset(8);
    const auto w = env.scenario().weights;
    for (int i = 0; i < 20; ++i) {
        const auto r = env.step(SliceAllocation{50, 30, 26});
        EXPECT_NEAR(r.reward, w.urllc * r.scores.urllc + w.embb * r.scores.embb + w.mmtc * r.scores.mmtc, 1e-15);
        for (double s : {r.scores.urllc, r.scores.embb, r.scores.mmtc}) {
            EXPECT_GE(s, 0.0);
            EXPECT_LE(s, 1.0);
        }
    }
}

TEST(SliceEnv, ThroughputComesFromOracle) {
    auto env = make_env(ScenarioName::Stadium, OracleKind::Theoretical);
    env.reset(2);
    const auto ues = env.ues();
    const auto r = env.step(SliceAllocation{36, 35, 35});
    for (int i = 0; i < kNumUes; ++i) {
        const auto k = static_cast<std::size_t>(i);
        EXPECT_DOUBLE_EQ(r.ue_throughput_mbps[k], env.oracle()(ues[k].prx_db, r.ue_prbs[k]));
    }
}

TEST(SliceEnv, UrllcQueueSeesPreGeneratedArrivals) {
    auto env = make_env();
    env.reset(11);
    const auto& trace = env.trace();
    std::int64_t arrived = 0;
    for (int s = 0; s < 30; ++s) {
        for (int k = 0; k < kNumUrllc; ++k) arrived += trace.urllc_arrival(s, k);
        env.step(SliceAllocation{0, 106, 0});  // URLLC starved: nothing drains
    }
    std::int64_t queued = 0;
    for (int k = 0; k < kNumUrllc; ++k) queued += env.urllc_queue(k).backlog_bits();
    EXPECT_EQ(queued, arrived);
}

TEST(SliceEnv, SameTraceSameTrajectory) {
    auto a = make_env();
    auto b = make_env();
    a.reset(21);
    b.reset(21);
    for (int i = 0; i < 50; ++i) {
        const auto ra = a.step(SliceAllocation{20, 60, 26});
        const auto rb = b.step(SliceAllocation{20, 60, 26});
        EXPECT_EQ(ra.reward, rb.reward);
        EXPECT_EQ(ra.observation, rb.observation);
    }
}

TEST(SliceEnv, CopySnapshotsState) {
    auto env = make_env();
    env.reset(4);
    for (int i = 0; i < 10; ++i) env.step(SliceAllocation{36, 35, 35});
    auto copy = env;
    const auto r1 = env.step(SliceAllocation{10, 90, 6});
    const auto r2 = copy.step(SliceAllocation{10, 90, 6});
    EXPECT_EQ(r1.reward, r2.reward);
    EXPECT_EQ(env.step_index(), copy.step_index());
}

TEST(SliceEnv, TraceMismatchRejected) {
    auto env = make_env();
    auto sc = ScenarioConfig::preset(ScenarioName::Stadium);
    sc.episode_steps = 10;
    auto t = std::make_shared<const ScenarioTrace>(ScenarioTrace::generate(sc, RadioConfig{}, SlaConfig{}, 1));
    EXPECT_THROW(env.reset(t), ContractError);
    EXPECT_THROW(env.reset(std::shared_ptr<const ScenarioTrace>{}), ContractError);
}

}  // namespace
}  // namespace prbslice
