#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <vector>

namespace prbslice {

struct SlaConfig {
    double urllc_latency_ms = 400.0;
    double urllc_p = 0.8;
    double urllc_size_min_mbits = 1.5;
    double urllc_size_max_mbits = 4.0;
    double embb_min_mbps = 5.0;
    double embb_demand_min_mbps = 5.0;
    double embb_demand_max_mbps = 15.0;
    double embb_rel_std = 0.1;
    double mmtc_per_device_mbps = 3.5;
    double mmtc_min_ratio = 0.95;
    int mmtc_devices = 8;
    double step_ms = 100.0;

    void validate() const;
};

/// Packet sizes are tracked in whole bits so queue accounting is exact.
struct UrllcPacket {
    std::int64_t size_bits = 0;
    std::int64_t remaining_bits = 0;
    int arrival_step = 0;
    std::optional<int> completion_step;

    double size_mbits() const { return static_cast<double>(size_bits) * 1e-6; }
    double remaining_mbits() const { return static_cast<double>(remaining_bits) * 1e-6; }
};

std::int64_t mbits_to_bits(double mbits);

/// Bernoulli(urllc_p) arrival with size ~ U(size_min, size_max).
std::optional<UrllcPacket> gen_urllc(std::mt19937_64& rng, int step, const SlaConfig& cfg);

/// Per-episode eMBB mean demand ~ U(embb_demand_min, embb_demand_max).
double draw_embb_mean(std::mt19937_64& rng, const SlaConfig& cfg);

/// max(0, N(mu, rel_std * mu)).
double gen_embb_demand(std::mt19937_64& rng, double mu, double rel_std = 0.1);

struct CompletedPacket {
    UrllcPacket packet;
    double latency_ms = 0.0;
};

/// FIFO transmission queue for one URLLC UE.
class UrllcQueue {
public:
    void push(UrllcPacket packet);

    /// Drains floor(throughput * step_ms / 1000 Mbit) bits in FIFO order.
    /// Latency of a packet completed at `step` is (step - arrival + 1) * step_ms.
    std::vector<CompletedPacket> drain(double throughput_mbps, double step_ms, int step);

    bool empty() const { return packets_.empty(); }
    std::size_t size() const { return packets_.size(); }
    std::int64_t backlog_bits() const { return backlog_bits_; }
    double backlog_mbits() const { return static_cast<double>(backlog_bits_) * 1e-6; }

    /// Age of the head-of-line packet at the end of `step`, same accounting as latency.
    std::optional<double> head_age_ms(int step, double step_ms) const;

    std::int64_t total_enqueued_bits() const { return enqueued_bits_; }
    std::int64_t total_drained_bits() const { return drained_bits_; }
    const std::deque<UrllcPacket>& packets() const { return packets_; }

private:
    std::deque<UrllcPacket> packets_;
    std::int64_t backlog_bits_ = 0;
    std::int64_t enqueued_bits_ = 0;
    std::int64_t drained_bits_ = 0;
};

struct UrllcUeInput {
    std::vector<double> completed_latencies_ms;
    std::optional<double> head_age_ms;
    double backlog_mbits = 0.0;
    double throughput_mbps = 0.0;
};

struct EmbbUeInput {
    double achieved_mbps = 0.0;
    double demand_mbps = 0.0;
};

struct SlaInputs {
    std::vector<UrllcUeInput> urllc;
    std::vector<EmbbUeInput> embb;
    std::vector<double> mmtc_mbps;
};

struct SliceMetrics {
    double achieved_mbps = 0.0;
    double demand_mbps = 0.0;
    bool satisfied = true;
    int violations = 0;
};

struct StepMetrics {
    SliceMetrics urllc;
    SliceMetrics embb;
    SliceMetrics mmtc;
    std::vector<bool> urllc_ue_violated;
    std::vector<bool> embb_ue_satisfied;
    std::vector<double> urllc_latencies_ms;
    int mmtc_supported_devices = 0;
    double mmtc_service_ratio = 0.0;
};

/// floor(total / per_device), capped at the device count.
int supported_devices(double total_mbps, const SlaConfig& cfg);

/// UE-level SLA checks: URLLC latency bound on completed and head-of-line
/// packets, eMBB rate floor, mMTC service ratio.
StepMetrics eval_sla(const SlaInputs& in, const SlaConfig& cfg);

}  // namespace prbslice
