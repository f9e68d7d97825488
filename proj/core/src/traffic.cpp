#include "prbslice/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prbslice/error.hpp"

namespace prbslice {

void SlaConfig::validate() const {
    if (!(urllc_latency_ms > 0 && embb_min_mbps > 0 && mmtc_per_device_mbps > 0 && step_ms > 0)) {
        throw ConfigError("SLA thresholds and step duration must be positive");
    }
    if (!(mmtc_min_ratio > 0.0 && mmtc_min_ratio <= 1.0)) throw ConfigError("mmtc_min_ratio must lie in (0,1]");
    if (!(urllc_p >= 0.0 && urllc_p <= 1.0)) throw ConfigError("urllc_p must lie in [0,1]");
    if (!(urllc_size_min_mbits > 0.0 && urllc_size_min_mbits <= urllc_size_max_mbits)) {
        throw ConfigError("URLLC packet size range must be positive and ordered");
    }
    if (!(embb_demand_min_mbps > 0.0 && embb_demand_min_mbps < embb_demand_max_mbps)) {
        throw ConfigError("eMBB demand range must be positive and ordered");
    }
    if (!(embb_rel_std >= 0.0)) throw ConfigError("eMBB relative std must be >= 0");
    if (mmtc_devices <= 0) throw ConfigError("mmtc_devices must be positive");
}

std::int64_t mbits_to_bits(double mbits) { return std::llround(mbits * 1e6); }

std::optional<UrllcPacket> gen_urllc(std::mt19937_64& rng, int step, const SlaConfig& cfg) {
    std::bernoulli_distribution arrival(cfg.urllc_p);
    if (!arrival(rng)) return std::nullopt;
    std::uniform_real_distribution<double> size(cfg.urllc_size_min_mbits, cfg.urllc_size_max_mbits);
    UrllcPacket p;
    p.size_bits = mbits_to_bits(size(rng));
    p.remaining_bits = p.size_bits;
    p.arrival_step = step;
    return p;
}

double draw_embb_mean(std::mt19937_64& rng, const SlaConfig& cfg) {
    std::uniform_real_distribution<double> mu(cfg.embb_demand_min_mbps, cfg.embb_demand_max_mbps);
    return mu(rng);
}

double gen_embb_demand(std::mt19937_64& rng, double mu, double rel_std) {
    const double sigma = rel_std * mu;
    if (sigma <= 0.0) return std::max(0.0, mu);
    std::normal_distribution<double> demand(mu, sigma);
    return std::max(0.0, demand(rng));
}

void UrllcQueue::push(UrllcPacket packet) {
    if (packet.size_bits <= 0 || packet.remaining_bits != packet.size_bits) {
        throw ContractError("URLLC packet must be non-empty and untouched when enqueued");
    }
    if (!packets_.empty() && packet.arrival_step < packets_.back().arrival_step) {
        throw ContractError("URLLC packets must be enqueued in arrival order");
    }
    backlog_bits_ += packet.remaining_bits;
    enqueued_bits_ += packet.size_bits;
    packets_.push_back(packet);
}

std::vector<CompletedPacket> UrllcQueue::drain(double throughput_mbps, double step_ms, int step) {
    if (!(throughput_mbps >= 0.0)) throw DomainError("drain throughput must be >= 0");
    // Mbps * ms = kbit; 1e-6 slack absorbs representation error in exact products.
    auto budget = static_cast<std::int64_t>(std::floor(throughput_mbps * step_ms * 1e3 + 1e-6));
    std::vector<CompletedPacket> done;
    while (budget > 0 && !packets_.empty()) {
        auto& head = packets_.front();
        const std::int64_t take = std::min(budget, head.remaining_bits);
        head.remaining_bits -= take;
        budget -= take;
        backlog_bits_ -= take;
        drained_bits_ += take;
        if (head.remaining_bits == 0) {
            head.completion_step = step;
            const double latency = (step - head.arrival_step + 1) * step_ms;
            done.push_back(CompletedPacket{head, latency});
            packets_.pop_front();
        }
    }
    return done;
}

std::optional<double> UrllcQueue::head_age_ms(int step, double step_ms) const {
    if (packets_.empty()) return std::nullopt;
    return (step - packets_.front().arrival_step + 1) * step_ms;
}

int supported_devices(double total_mbps, const SlaConfig& cfg) {
    if (!(total_mbps > 0.0)) return 0;
    const double ratio = total_mbps / cfg.mmtc_per_device_mbps;
    const auto devices = static_cast<long long>(std::floor(ratio * (1.0 + 1e-12)));
    return static_cast<int>(std::min<long long>(devices, cfg.mmtc_devices));
}

StepMetrics eval_sla(const SlaInputs& in, const SlaConfig& cfg) {
    StepMetrics m;

    for (const auto& ue : in.urllc) {
        bool violated = ue.head_age_ms && *ue.head_age_ms > cfg.urllc_latency_ms;
        for (double lat : ue.completed_latencies_ms) {
            violated = violated || lat > cfg.urllc_latency_ms;
            m.urllc_latencies_ms.push_back(lat);
        }
        m.urllc_ue_violated.push_back(violated);
        m.urllc.violations += violated ? 1 : 0;
        m.urllc.demand_mbps += ue.backlog_mbits;
        m.urllc.achieved_mbps += ue.throughput_mbps;
    }
    m.urllc.satisfied = m.urllc.violations == 0;

    for (const auto& ue : in.embb) {
        const bool ok = ue.achieved_mbps >= cfg.embb_min_mbps;
        m.embb_ue_satisfied.push_back(ok);
        m.embb.violations += ok ? 0 : 1;
        m.embb.achieved_mbps += ue.achieved_mbps;
        m.embb.demand_mbps += ue.demand_mbps;
    }
    m.embb.satisfied = m.embb.violations == 0;

    double total = 0.0;
    for (double v : in.mmtc_mbps) total += v;
    m.mmtc.achieved_mbps = total;
    m.mmtc.demand_mbps = cfg.mmtc_devices * cfg.mmtc_per_device_mbps;
    m.mmtc_supported_devices = supported_devices(total, cfg);
    m.mmtc_service_ratio = static_cast<double>(m.mmtc_supported_devices) / cfg.mmtc_devices;
    m.mmtc.satisfied = m.mmtc_service_ratio >= cfg.mmtc_min_ratio;
    m.mmtc.violations = m.mmtc.satisfied ? 0 : 1;
    return m;
}

}  // namespace prbslice
