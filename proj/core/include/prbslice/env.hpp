#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "prbslice/oracle.hpp"
#include "prbslice/phy.hpp"
#include "prbslice/traffic.hpp"

namespace prbslice {

enum class SliceId : int { Urllc = 0, Embb = 1, Mmtc = 2 };

inline constexpr int kNumSlices = 3;
inline constexpr int kNumUrllc = 3;
inline constexpr int kNumEmbb = 3;
inline constexpr int kNumMmtc = 8;
inline constexpr int kNumUes = kNumUrllc + kNumEmbb + kNumMmtc;
inline constexpr int kObservationDim = 3 * kNumUes;

std::string_view to_string(SliceId s);

struct SliceAllocation {
    int urllc = 0;
    int embb = 0;
    int mmtc = 0;

    int total() const { return urllc + embb + mmtc; }
    int of(SliceId s) const;
    bool operator==(const SliceAllocation&) const = default;
};

/// Apportions `total` units by the weights using largest remainders;
/// ties go to the lower index. Weights must be non-negative with a positive sum.
std::vector<int> largest_remainder(std::span<const double> weights, int total);

/// softmax(raw) * total, rounded with largest remainders. Throws
/// DomainError on non-finite input.
SliceAllocation project_action(std::span<const double> raw, int total = 106);

struct DemandBounds {
    double min = 0.0;
    double max = 1.0;
};

/// (r - min) / (max - min) clamped to [0,1]; ConfigError on degenerate bounds.
double normalize_demand(double r, DemandBounds bounds);

enum class ScenarioName { SmartFactory, Stadium, SmartCity };

ScenarioName parse_scenario_name(std::string_view name);
std::string_view to_string(ScenarioName name);

struct SliceWeights {
    double urllc = 1.0 / 3.0;
    double embb = 1.0 / 3.0;
    double mmtc = 1.0 / 3.0;

    double of(SliceId s) const;
};

enum class SplitRule { Equal, DemandProportional };

SplitRule parse_split_rule(std::string_view name);

struct ScenarioConfig {
    ScenarioName name = ScenarioName::Stadium;
    SliceWeights weights{0.3, 0.4, 0.3};
    OracleKind reward_oracle = OracleKind::Hybrid;
    OracleKind eval_oracle = OracleKind::Practical;
    int episode_steps = 256;
    double mobility_std_m = 20.0;
    std::uint64_t seed = 1;
    SplitRule split = SplitRule::Equal;
    double area_half_width_m = 750.0;
    double min_distance_m = 10.0;

    /// Emphasized slice gets 0.4, the other two 0.3 each.
    static ScenarioConfig preset(ScenarioName name);
    SliceId emphasized() const;
    void validate() const;
};

struct Position {
    double x = 0.0;
    double y = 0.0;
};

struct UeState {
    int id = 0;
    SliceId slice = SliceId::Urllc;
    Position position{};
    double prx_db = 0.0;
    double demand = 0.0;  // URLLC backlog (Mbit), eMBB rate (Mbps), mMTC per-device rate (Mbps)
    DemandBounds bounds{};
};

/// Action-independent exogenous streams for one episode: mobility, received
/// power, URLLC arrivals and eMBB demand. Every agent evaluated on the same
/// seed consumes an identical trace.
struct ScenarioTrace {
    int steps = 0;
    int n_ues = kNumUes;
    std::vector<SliceId> slices;
    std::vector<Position> positions;             // (steps + 1) x n_ues
    std::vector<double> prx_db;                  // (steps + 1) x n_ues
    std::vector<double> embb_mean_mbps;          // n_ues, zero outside eMBB
    std::vector<double> embb_demand_mbps;        // steps x n_ues
    std::vector<std::int64_t> urllc_arrival_bits;  // steps x n_ues, zero means no arrival

    static ScenarioTrace generate(const ScenarioConfig& scenario, const RadioConfig& radio, const SlaConfig& sla,
                                  std::uint64_t seed);

    double prx(int step, int ue) const { return prx_db[idx(step, ue)]; }
    const Position& position(int step, int ue) const { return positions[idx(step, ue)]; }
    double embb_demand(int step, int ue) const { return embb_demand_mbps[idx(step, ue)]; }
    std::int64_t urllc_arrival(int step, int ue) const { return urllc_arrival_bits[idx(step, ue)]; }

    std::uint64_t hash() const;

private:
    std::size_t idx(int step, int ue) const {
        return static_cast<std::size_t>(step) * static_cast<std::size_t>(n_ues) + static_cast<std::size_t>(ue);
    }
};

SliceId slice_of_ue(int ue);

using Observation = std::vector<double>;

struct RewardBreakdown {
    double urllc = 0.0;
    double embb = 0.0;
    double mmtc = 0.0;
    double reward = 0.0;
};

struct StepResult {
    Observation observation;
    double reward = 0.0;
    bool done = false;
    StepMetrics metrics;
    RewardBreakdown scores;
    std::vector<int> ue_prbs;
    std::vector<double> ue_throughput_mbps;
};

/// Slice-level PRB allocation environment. Value type: copying an
/// environment snapshots its full state (the oracle sources are shared and
/// immutable).
class SliceEnv {
public:
    SliceEnv(ScenarioConfig scenario, ThroughputOracle oracle, SlaConfig sla = {});

    Observation reset(std::uint64_t seed);
    Observation reset(std::shared_ptr<const ScenarioTrace> trace);

    StepResult step(const SliceAllocation& action);
    StepResult step_raw(std::span<const double> raw);

    /// Per-UE PRB shares for a slice allocation under the configured split rule.
    std::vector<int> ue_prbs(const SliceAllocation& action) const;

    Observation observe() const;
    bool done() const { return step_ >= scenario_.episode_steps; }
    int step_index() const { return step_; }
    const std::vector<UeState>& ues() const { return ues_; }
    const UrllcQueue& urllc_queue(int k) const { return queues_.at(static_cast<std::size_t>(k)); }
    const ScenarioTrace& trace() const { return *trace_; }
    const ScenarioConfig& scenario() const { return scenario_; }
    const SlaConfig& sla() const { return sla_; }
    const ThroughputOracle& oracle() const { return oracle_; }
    const RadioConfig& radio() const { return oracle_.sources().radio; }

private:
    void load_step_state();

    ScenarioConfig scenario_;
    ThroughputOracle oracle_;
    SlaConfig sla_;
    std::shared_ptr<const ScenarioTrace> trace_;
    std::vector<UeState> ues_;
    std::vector<UrllcQueue> queues_;
    int step_ = 0;
};

}  // namespace prbslice
