#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prbslice/env.hpp"
#include "prbslice/oracle.hpp"
#include "prbslice/rl.hpp"
#include "prbslice/traffic.hpp"

namespace prbslice {

/// The three compared agents differ only in the oracle producing their
/// training reward.
enum class AgentVariant { Practical, Simulated, Hybrid };

AgentVariant parse_agent(std::string_view name);
std::string_view to_string(AgentVariant a);
OracleKind reward_oracle_for(AgentVariant a);

inline constexpr std::string_view kCsvSchemaVersion = "v1";

struct ExperimentSpec {
    ScenarioConfig scenario = ScenarioConfig::preset(ScenarioName::Stadium);
    AgentVariant agent = AgentVariant::Hybrid;
    double lambda = 0.5;
    std::vector<std::uint64_t> train_seeds{1};
    std::vector<std::uint64_t> eval_seeds;  // empty: 10000, 10001, ...
    int eval_episodes = 20;
    int train_iterations = 40;
    PpoConfig ppo{};
    NetworkShape network{};
    SlaConfig sla{};
    std::shared_ptr<const OracleSources> sources;  // null: OracleSources::defaults()
    std::filesystem::path out_dir = "out";
    int jobs = 1;

    void validate() const;
    std::shared_ptr<const OracleSources> resolved_sources() const;
    /// Scenario with reward_oracle set from the agent variant.
    ScenarioConfig training_scenario() const;
    std::uint64_t checkpoint_hash() const { return config_hash(network, ppo); }
    /// One seed per evaluation episode.
    std::vector<std::uint64_t> episode_eval_seeds() const;
    std::string label() const;
};

using PolicyFn = std::function<SliceAllocation(const Observation&)>;

/// Raw action (0,0,0), i.e. the near-even split (36, 35, 35).
PolicyFn uniform_policy(int prb_total = 106);
/// Deterministic policy: mean action of the Gaussian head, projected.
PolicyFn greedy_policy(PolicyParams params, int prb_total = 106);

struct IterationRecord {
    int iteration = 0;
    double mean_episode_reward = 0.0;
    double mean_step_reward = 0.0;
    LossBreakdown loss{};
};

struct TrainResult {
    PolicyParams params;
    std::vector<IterationRecord> curve;
    std::filesystem::path checkpoint;
    std::filesystem::path curve_csv;
};

/// Rolls out one episode with sampled actions and returns the trajectory.
Trajectory collect_episode(const PolicyParams& params, SliceEnv& env, std::uint64_t scenario_seed,
                           std::mt19937_64& action_rng);

/// Trains with the agent's reward oracle. Writes checkpoint.txt and
/// training_curve.csv under spec.out_dir. On divergence writes
/// checkpoint.partial.txt plus the curve so far, then rethrows.
TrainResult run_train(const ExperimentSpec& spec);

struct ResultBundle {
    std::string scenario;
    std::string agent;
    int episodes = 0;
    double mean_episode_reward = 0.0;
    double urllc_mean_latency_ms = 0.0;
    double urllc_violation_rate = 0.0;
    double embb_mean_mbps = 0.0;
    double embb_satisfaction_rate = 0.0;
    double mmtc_mean_devices = 0.0;
    double mmtc_service_ratio = 0.0;
    std::vector<double> episode_rewards;
    std::vector<double> latency_samples_ms;     // sorted
    std::vector<double> throughput_samples_mbps;  // sorted, eMBB per UE-step
    std::vector<std::uint64_t> trace_hashes;

    bool operator==(const ResultBundle&) const = default;
};

/// Emphasized-slice metric name for a scenario and whether larger is better.
struct EmphasizedMetric {
    std::string_view name;
    bool higher_is_better = true;
};
EmphasizedMetric emphasized_metric(ScenarioName s);
double emphasized_value(const ResultBundle& b, ScenarioName s);

/// Evaluates under the scenario's evaluation oracle on pre-generated traces,
/// so every policy sees identical exogenous streams per seed.
ResultBundle evaluate_policy(const PolicyFn& policy, const ExperimentSpec& spec, std::string agent_label);
ResultBundle run_eval(const PolicyParams& params, const ExperimentSpec& spec);
/// Refuses (CheckpointMismatch) when the checkpoint hash differs from the spec.
ResultBundle run_eval(const std::filesystem::path& checkpoint, const ExperimentSpec& spec);

/// `value,cdf` rows, sorted, with the final cdf exactly 1.
void write_cdf_csv(std::ostream& out, std::span<const double> samples, std::string_view value_name);
void write_bundle_summary_header(std::ostream& out);
void write_bundle_summary_row(std::ostream& out, const ResultBundle& b, ScenarioName s);
/// summary.csv, latency_cdf.csv, throughput_cdf.csv into dir.
void write_bundle(const std::filesystem::path& dir, const ResultBundle& b, ScenarioName s);

struct MatrixCell {
    ExperimentSpec spec;
    bool ok = false;
    std::string error;
    ResultBundle bundle;
};

/// 3 scenarios x 3 agents from a base spec; each cell gets its own out_dir.
std::vector<ExperimentSpec> full_matrix(const ExperimentSpec& base);

/// Trains and evaluates every spec; at most `jobs` cells run concurrently.
/// Failures are captured per cell.
std::vector<MatrixCell> run_matrix(std::span<const ExperimentSpec> specs, int jobs = 1);

void write_matrix_summary(std::ostream& out, std::span<const MatrixCell> cells);

struct OrderingCheck {
    ScenarioName scenario;
    double hybrid = 0.0;
    double weaker_baseline = 0.0;
    bool hybrid_not_worse = false;
};

/// Per scenario: is the hybrid emphasized metric at least as good as the
/// weaker of the practical and simulated agents?
std::vector<OrderingCheck> ordering_checks(std::span<const MatrixCell> cells);

struct OracleTableOptions {
    std::vector<int> prbs{106};
    bool with_link_sim = false;
    int link_sim_symbols = 28;
    int link_sim_mcs = 28;
    std::uint64_t seed = 1;
};

/// Throughput vs received power for each estimator (and optionally the
/// link simulator at a fixed MCS) on the profile grid.
void write_oracle_table(std::ostream& out, const OracleSources& sources, const OracleTableOptions& opt,
                        HybridWeight w = HybridWeight{});

}  // namespace prbslice
