#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "prbslice/config.hpp"
#include "prbslice/error.hpp"

namespace prbslice {
namespace {

namespace fs = std::filesystem;

EnvLookup fake_env(std::map<std::string, std::string> vars) {
    auto shared = std::make_shared<std::map<std::string, std::string>>(std::move(vars));
    return [shared](const char* key) -> const char* {
        const auto it = shared->find(key);
        return it == shared->end() ? nullptr : it->second.c_str();
    };
}

TEST(ScenarioPreset, ShippedFilesMatchBuiltins) {
    for (auto name : {ScenarioName::SmartFactory, ScenarioName::Stadium, ScenarioName::SmartCity}) {
        const auto path = fs::path(PRBSLICE_PRESET_DIR) / (std::string(to_string(name)) + ".yaml");
        const auto loaded = load_scenario_preset(path);
        const auto builtin = ScenarioConfig::preset(name);
        EXPECT_EQ(loaded.name, name);
        EXPECT_DOUBLE_EQ(loaded.weights.urllc, builtin.weights.urllc);
        EXPECT_DOUBLE_EQ(loaded.weights.embb, builtin.weights.embb);
        EXPECT_DOUBLE_EQ(loaded.weights.mmtc, builtin.weights.mmtc);
        EXPECT_EQ(loaded.episode_steps, builtin.episode_steps);
        EXPECT_EQ(loaded.eval_oracle, OracleKind::Practical);
    }
}

TEST(ScenarioPreset, PartialOverridesAndErrors) {
    const auto sc = parse_scenario_preset("name: smart_city\nepisode_steps: 64\nsplit: demand_proportional\n");
    EXPECT_EQ(sc.episode_steps, 64);
    EXPECT_DOUBLE_EQ(sc.weights.mmtc, 0.4);
    EXPECT_EQ(sc.split, SplitRule::DemandProportional);
    EXPECT_THROW(parse_scenario_preset("name: stadium\nbogus: 1\n"), ConfigError);
    EXPECT_THROW(parse_scenario_preset("weights: {urllc: 0.9, embb: 0.9, mmtc: 0.9}\n"), ConfigError);
    EXPECT_THROW(parse_scenario_preset("episode_steps: many\n"), ConfigError);
    EXPECT_THROW(parse_scenario_preset("[1, 2]\n"), ConfigError);
    EXPECT_THROW(parse_scenario_preset("name: {unclosed\n"), ConfigError);
}

TEST(Experiment, ParsesAllSections) {
    const auto spec = parse_experiment(R"(
scenario: smart_factory
agent: simulated
lambda: 0.25
train_seeds: [3, 4]
eval_seeds: [100, 101]
eval_episodes: 2
train_iterations: 7
jobs: 2
episode_steps: 32
out: /tmp/prbslice_cfg_out
ppo: {learning_rate: 0.001, epochs: 2}
network: {hidden1: 16, hidden2: 8}
sla: {urllc_latency_ms: 300}
sources: {scaling: literal, bler: 0.2, trace_efficiency: 0.5}
)");
    EXPECT_EQ(spec.scenario.name, ScenarioName::SmartFactory);
    EXPECT_EQ(spec.scenario.episode_steps, 32);
    EXPECT_EQ(spec.agent, AgentVariant::Simulated);
    EXPECT_DOUBLE_EQ(spec.lambda, 0.25);
    EXPECT_EQ(spec.train_seeds, (std::vector<std::uint64_t>{3, 4}));
    EXPECT_EQ(spec.eval_seeds, (std::vector<std::uint64_t>{100, 101}));
    EXPECT_EQ(spec.train_iterations, 7);
    EXPECT_EQ(spec.jobs, 2);
    EXPECT_EQ(spec.out_dir, fs::path("/tmp/prbslice_cfg_out"));
    EXPECT_DOUBLE_EQ(spec.ppo.learning_rate, 0.001);
    EXPECT_EQ(spec.ppo.epochs, 2);
    EXPECT_EQ(spec.network.hidden1, 16);
    EXPECT_DOUBLE_EQ(spec.sla.urllc_latency_ms, 300.0);
    ASSERT_TRUE(spec.sources);
    EXPECT_DOUBLE_EQ(spec.sources->bler.at(17), 0.2);
    const double prx = -10.0;
    EXPECT_NEAR(spec.sources->trace.at(prx),
                0.5 * theoretical_throughput(prx, 106, spec.sources->profile, spec.sources->bler, spec.sources->radio),
                1e-12);
}

TEST(Experiment, RejectsUnknownKeysAndOverlappingSeeds) {
    EXPECT_THROW(parse_experiment("agnet: hybrid\n"), ConfigError);
    EXPECT_THROW(parse_experiment("ppo: {lr: 1}\n"), ConfigError);
    EXPECT_THROW(parse_experiment("train_seeds: [5]\neval_seeds: [5]\neval_episodes: 1\n"), ConfigError);
    EXPECT_THROW(parse_experiment("agent: genius\n"), ConfigError);
    EXPECT_THROW(parse_experiment("sources: {profile_csv: /nonexistent.csv}\n"), ConfigError);
}

TEST(Experiment, EmptyFileGivesDefaults) {
    const auto spec = parse_experiment("");
    EXPECT_EQ(spec.agent, AgentVariant::Hybrid);
    EXPECT_EQ(spec.eval_episodes, 20);
}

TEST(Experiment, LoadsExampleFileWithRelativePaths) {
    const auto spec = load_experiment(fs::path(PRBSLICE_PRESET_DIR) / "experiment.yaml");
    EXPECT_EQ(spec.scenario.name, ScenarioName::Stadium);
    EXPECT_EQ(spec.out_dir.lexically_normal(), (fs::path(PRBSLICE_PRESET_DIR) / "../out/stadium_hybrid").lexically_normal());
}

TEST(Experiment, SourcesFromCsvFiles) {
    const auto dir = fs::temp_directory_path() / "prbslice_cfg_sources";
    fs::create_directories(dir);
    {
        std::ofstream t(dir / "trace.csv");
        t << "# schema: prbslice.throughput_trace v1\nprx_db,mbps_full_allocation\n-23,0.1\n-7,1.0\n";
        std::ofstream b(dir / "bler.csv");
        b << "mcs,bler\n28,0.5\n";
    }
    const auto spec = parse_experiment("sources: {trace_csv: trace.csv, bler_csv: bler.csv}\n", dir);
    EXPECT_DOUBLE_EQ(spec.sources->trace.at(-15.0), 0.55);
    EXPECT_DOUBLE_EQ(spec.sources->bler.at(28), 0.5);
    EXPECT_DOUBLE_EQ(spec.sources->bler.at(6), 0.1);
}

TEST(EnvOverrides, ApplyOnTopOfFile) {
    auto spec = parse_experiment("agent: practical\nlambda: 0.1\n");
    apply_env_overrides(spec, fake_env({{"PRBSLICE_AGENT", "hybrid"},
                                        {"PRBSLICE_LAMBDA", "0.75"},
                                        {"PRBSLICE_SCENARIO", "smart_city"},
                                        {"PRBSLICE_SEED", "9"},
                                        {"PRBSLICE_EPISODES", "4"},
                                        {"PRBSLICE_ITERATIONS", "12"},
                                        {"PRBSLICE_JOBS", "3"},
                                        {"PRBSLICE_OUT", "/tmp/x"}}));
    EXPECT_EQ(spec.agent, AgentVariant::Hybrid);
    EXPECT_DOUBLE_EQ(spec.lambda, 0.75);
    EXPECT_EQ(spec.scenario.name, ScenarioName::SmartCity);
    EXPECT_EQ(spec.train_seeds, (std::vector<std::uint64_t>{9}));
    EXPECT_EQ(spec.eval_episodes, 4);
    EXPECT_EQ(spec.train_iterations, 12);
    EXPECT_EQ(spec.jobs, 3);
    EXPECT_EQ(spec.out_dir, fs::path("/tmp/x"));
}

TEST(EnvOverrides, MalformedValuesAreConfigErrors) {
    ExperimentSpec spec;
    EXPECT_THROW(apply_env_overrides(spec, fake_env({{"PRBSLICE_LAMBDA", "half"}})), ConfigError);
    EXPECT_THROW(apply_env_overrides(spec, fake_env({{"PRBSLICE_SEED", "-3"}})), ConfigError);
    EXPECT_THROW(apply_env_overrides(spec, fake_env({{"PRBSLICE_JOBS", "2x"}})), ConfigError);
    EXPECT_THROW(apply_env_overrides(spec, fake_env({{"PRBSLICE_AGENT", "other"}})), ConfigError);
}

TEST(EnvOverrides, EmptyOrMissingIgnored) {
    ExperimentSpec spec;
    apply_env_overrides(spec, fake_env({{"PRBSLICE_AGENT", ""}, {"OTHER", "x"}}));
    EXPECT_EQ(spec.agent, AgentVariant::Hybrid);
}

}  // namespace
}  // namespace prbslice
