#include <benchmark/benchmark.h>

#include <memory>
#include <numeric>
#include <random>
#include <vector>

#include "prbslice/env.hpp"
#include "prbslice/link_sim.hpp"
#include "prbslice/oracle.hpp"
#include "prbslice/rl.hpp"

using namespace prbslice;

namespace {

void BM_SimulateLink(benchmark::State& state) {
    LinkRunSpec spec;
    spec.mcs = static_cast<int>(state.range(0));
    spec.n_ofdm_symbols = 14;
    std::uint64_t seed = 1;
    for (auto _ : state) {
        spec.seed = seed++;
        benchmark::DoNotOptimize(simulate_link(spec));
    }
    state.SetItemsProcessed(state.iterations() * spec.n_ofdm_symbols);
}
BENCHMARK(BM_SimulateLink)->Arg(6)->Arg(28)->Unit(benchmark::kMicrosecond);

void BM_TMcs(benchmark::State& state) {
    const RadioConfig cfg;
    int mcs = 6;
    for (auto _ : state) {
        benchmark::DoNotOptimize(t_mcs(106, mcs, 0.0, cfg));
        mcs = mcs == 28 ? 6 : mcs + 1;
    }
}
BENCHMARK(BM_TMcs);

void BM_OracleEval(benchmark::State& state) {
    const auto sources = std::make_shared<const OracleSources>(OracleSources::defaults());
    const ThroughputOracle oracle(static_cast<OracleKind>(state.range(0)), sources, HybridWeight(0.5));
    double prx = -23.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(oracle(prx, 53));
        prx = prx > -7.0 ? -23.0 : prx + 0.37;
    }
}
BENCHMARK(BM_OracleEval)->Arg(static_cast<int>(OracleKind::Theoretical))
    ->Arg(static_cast<int>(OracleKind::Practical))->Arg(static_cast<int>(OracleKind::Hybrid));

void BM_EnvStep(benchmark::State& state) {
    const auto sources = std::make_shared<const OracleSources>(OracleSources::defaults());
    SliceEnv env(ScenarioConfig::preset(ScenarioName::Stadium), ThroughputOracle(OracleKind::Hybrid, sources));
    env.reset(1);
    const SliceAllocation a{30, 46, 30};
    std::uint64_t seed = 2;
    for (auto _ : state) {
        if (env.done()) {
            state.PauseTiming();
            env.reset(seed++);
            state.ResumeTiming();
        }
        benchmark::DoNotOptimize(env.step(a));
    }
}
BENCHMARK(BM_EnvStep);

Batch random_batch(const PolicyParams& p, int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Batch b;
    b.obs_dim = p.shape().obs_dim;
    b.act_dim = p.shape().act_dim;
    for (int i = 0; i < n; ++i) {
        std::vector<double> obs(static_cast<std::size_t>(b.obs_dim));
        for (auto& v : obs) v = g(rng);
        const auto out = policy_forward(p, obs);
        const auto a = sample_action(out, rng);
        b.observations.insert(b.observations.end(), obs.begin(), obs.end());
        b.actions.insert(b.actions.end(), a.begin(), a.end());
        b.log_probs.push_back(gaussian_log_prob(out.mean, out.log_std, a));
        b.advantages.push_back(g(rng));
        b.returns.push_back(g(rng));
    }
    return b;
}

void BM_PpoLossGrad(benchmark::State& state) {
    std::mt19937_64 rng(3);
    const auto p = PolicyParams::initialize(NetworkShape{}, 1);
    const auto b = random_batch(p, static_cast<int>(state.range(0)), rng);
    std::vector<std::size_t> idx(b.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::vector<double> grad(p.flat().size());
    const PpoConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(ppo_loss(p, b, idx, cfg, grad));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PpoLossGrad)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_PpoUpdate(benchmark::State& state) {
    std::mt19937_64 rng(4);
    auto p = PolicyParams::initialize(NetworkShape{}, 1);
    const auto b = random_batch(p, 2048, rng);
    const PpoConfig cfg;
    AdamOptimizer opt(p.flat().size(), cfg.learning_rate);
    for (auto _ : state) benchmark::DoNotOptimize(ppo_update(p, opt, b, cfg, rng));
}
BENCHMARK(BM_PpoUpdate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
