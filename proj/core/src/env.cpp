#include "prbslice/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "prbslice/error.hpp"
#include "prbslice/seeding.hpp"

namespace prbslice {

namespace {

enum StreamTag : std::uint64_t { kPlacement = 1, kMobility = 2, kUrllc = 3, kEmbbMean = 4, kEmbbDemand = 5 };

double reflect(double v, double half) {
    while (v > half || v < -half) {
        if (v > half) v = 2.0 * half - v;
        if (v < -half) v = -2.0 * half - v;
    }
    return v;
}

double prx_at(const Position& p, const ScenarioConfig& sc, const RadioConfig& radio) {
    const double d_m = std::max(std::hypot(p.x, p.y), sc.min_distance_m);
    return received_power(query_at(d_m / 1000.0, radio), radio).clipped_db;
}

DemandBounds bounds_for(SliceId s, const SlaConfig& sla) {
    switch (s) {
        case SliceId::Urllc:
            return {0.0, sla.urllc_size_max_mbits};
        case SliceId::Embb:
            return {sla.embb_demand_min_mbps, sla.embb_demand_max_mbps};
        case SliceId::Mmtc:
            return {0.0, sla.mmtc_per_device_mbps};
    }
    return {};
}

}  // namespace

std::string_view to_string(SliceId s) {
    switch (s) {
        case SliceId::Urllc:
            return "URLLC";
        case SliceId::Embb:
            return "eMBB";
        case SliceId::Mmtc:
            return "mMTC";
    }
    return "?";
}

int SliceAllocation::of(SliceId s) const {
    switch (s) {
        case SliceId::Urllc:
            return urllc;
        case SliceId::Embb:
            return embb;
        case SliceId::Mmtc:
            return mmtc;
    }
    return 0;
}

std::vector<int> largest_remainder(std::span<const double> weights, int total) {
    if (weights.empty()) throw ContractError("largest_remainder: no weights");
    if (total < 0) throw ContractError("largest_remainder: negative total");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("largest_remainder: weights must be finite and >= 0");
        sum += w;
    }
    if (!(sum > 0.0)) throw DomainError("largest_remainder: weights sum to zero");

    const std::size_t n = weights.size();
    std::vector<int> out(n);
    std::vector<double> frac(n);
    int assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double quota = total * (weights[i] / sum);
        const double fl = std::floor(quota);
        out[i] = static_cast<int>(fl);
        frac[i] = quota - fl;
        assigned += out[i];
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    int remaining = total - assigned;
    for (std::size_t k = 0; remaining > 0; k = (k + 1) % n, --remaining) ++out[order[k]];
    if (remaining < 0) throw ContractError("largest_remainder: floors exceed the total");
    return out;
}

SliceAllocation project_action(std::span<const double> raw, int total) {
    if (raw.size() != static_cast<std::size_t>(kNumSlices)) throw ContractError("project_action expects 3 values");
    for (double v : raw) {
        if (!std::isfinite(v)) throw DomainError("project_action: non-finite action component");
    }
    const double mx = *std::max_element(raw.begin(), raw.end());
    std::array<double, kNumSlices> w{};
    for (int i = 0; i < kNumSlices; ++i) w[static_cast<std::size_t>(i)] = std::exp(raw[static_cast<std::size_t>(i)] - mx);
    const auto parts = largest_remainder(w, total);
    return SliceAllocation{parts[0], parts[1], parts[2]};
}

double normalize_demand(double r, DemandBounds bounds) {
    if (!(bounds.max > bounds.min)) throw ConfigError("demand bounds must satisfy min < max");
    return std::clamp((r - bounds.min) / (bounds.max - bounds.min), 0.0, 1.0);
}

ScenarioName parse_scenario_name(std::string_view name) {
    if (name == "smart_factory" || name == "SmartFactory") return ScenarioName::SmartFactory;
    if (name == "stadium" || name == "Stadium") return ScenarioName::Stadium;
    if (name == "smart_city" || name == "SmartCity") return ScenarioName::SmartCity;
    throw ConfigError("unknown scenario '" + std::string(name) + "' (smart_factory|stadium|smart_city)");
}

std::string_view to_string(ScenarioName name) {
    switch (name) {
        case ScenarioName::SmartFactory:
            return "smart_factory";
        case ScenarioName::Stadium:
            return "stadium";
        case ScenarioName::SmartCity:
            return "smart_city";
    }
    return "?";
}

SplitRule parse_split_rule(std::string_view name) {
    if (name == "equal") return SplitRule::Equal;
    if (name == "demand_proportional") return SplitRule::DemandProportional;
    throw ConfigError("unknown split rule '" + std::string(name) + "' (equal|demand_proportional)");
}

double SliceWeights::of(SliceId s) const {
    switch (s) {
        case SliceId::Urllc:
            return urllc;
        case SliceId::Embb:
            return embb;
        case SliceId::Mmtc:
            return mmtc;
    }
    return 0.0;
}

ScenarioConfig ScenarioConfig::preset(ScenarioName name) {
    ScenarioConfig c;
    c.name = name;
    switch (name) {
        case ScenarioName::SmartFactory:
            c.weights = {0.4, 0.3, 0.3};
            break;
        case ScenarioName::Stadium:
            c.weights = {0.3, 0.4, 0.3};
            break;
        case ScenarioName::SmartCity:
            c.weights = {0.3, 0.3, 0.4};
            break;
    }
    return c;
}

SliceId ScenarioConfig::emphasized() const {
    switch (name) {
        case ScenarioName::SmartFactory:
            return SliceId::Urllc;
        case ScenarioName::Stadium:
            return SliceId::Embb;
        case ScenarioName::SmartCity:
            return SliceId::Mmtc;
    }
    return SliceId::Embb;
}

void ScenarioConfig::validate() const {
    const double w[3] = {weights.urllc, weights.embb, weights.mmtc};
    for (double v : w) {
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("slice weights must lie in [0,1]");
    }
    if (std::abs(w[0] + w[1] + w[2] - 1.0) > 1e-9) throw ConfigError("slice weights must sum to 1");
    if (episode_steps < 1) throw ConfigError("episode_steps must be >= 1");
    if (!(mobility_std_m >= 0.0)) throw ConfigError("mobility std must be >= 0");
    if (!(area_half_width_m > min_distance_m && min_distance_m > 0.0)) {
        throw ConfigError("area half width must exceed the positive minimum distance");
    }
}

SliceId slice_of_ue(int ue) {
    if (ue < kNumUrllc) return SliceId::Urllc;
    if (ue < kNumUrllc + kNumEmbb) return SliceId::Embb;
    return SliceId::Mmtc;
}

ScenarioTrace ScenarioTrace::generate(const ScenarioConfig& sc, const RadioConfig& radio, const SlaConfig& sla,
                                      std::uint64_t seed) {
    sc.validate();
    ScenarioTrace t;
    t.steps = sc.episode_steps;
    t.n_ues = kNumUes;
    const auto n = static_cast<std::size_t>(kNumUes);
    const auto rows = static_cast<std::size_t>(t.steps);
    for (int i = 0; i < kNumUes; ++i) t.slices.push_back(slice_of_ue(i));
    t.positions.resize((rows + 1) * n);
    t.prx_db.resize((rows + 1) * n);
    t.embb_mean_mbps.assign(n, 0.0);
    t.embb_demand_mbps.assign(rows * n, 0.0);
    t.urllc_arrival_bits.assign(rows * n, 0);

    std::mt19937_64 place(derive_seed(seed, {kPlacement}));
    std::mt19937_64 move(derive_seed(seed, {kMobility}));
    std::mt19937_64 urllc(derive_seed(seed, {kUrllc}));
    std::mt19937_64 embb_mean(derive_seed(seed, {kEmbbMean}));
    std::mt19937_64 embb_demand(derive_seed(seed, {kEmbbDemand}));

    const double half = sc.area_half_width_m;
    std::uniform_real_distribution<double> coord(-half, half);
    for (std::size_t i = 0; i < n; ++i) {
        Position p;
        do {
            p = {coord(place), coord(place)};
        } while (std::hypot(p.x, p.y) < sc.min_distance_m);
        t.positions[i] = p;
        t.prx_db[i] = prx_at(p, sc, radio);
    }

    std::normal_distribution<double> step_noise(0.0, 1.0);
    for (std::size_t s = 1; s <= rows; ++s) {
        for (std::size_t i = 0; i < n; ++i) {
            Position p = t.positions[(s - 1) * n + i];
            if (sc.mobility_std_m > 0.0) {
                p.x = reflect(p.x + sc.mobility_std_m * step_noise(move), half);
                p.y = reflect(p.y + sc.mobility_std_m * step_noise(move), half);
            }
            t.positions[s * n + i] = p;
            t.prx_db[s * n + i] = prx_at(p, sc, radio);
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (t.slices[i] == SliceId::Embb) t.embb_mean_mbps[i] = draw_embb_mean(embb_mean, sla);
    }
    for (std::size_t s = 0; s < rows; ++s) {
        for (std::size_t i = 0; i < n; ++i) {
            if (t.slices[i] == SliceId::Urllc) {
                if (auto pkt = gen_urllc(urllc, static_cast<int>(s), sla)) t.urllc_arrival_bits[s * n + i] = pkt->size_bits;
            } else if (t.slices[i] == SliceId::Embb) {
                t.embb_demand_mbps[s * n + i] = gen_embb_demand(embb_demand, t.embb_mean_mbps[i], sla.embb_rel_std);
            }
        }
    }
    return t;
}

std::uint64_t ScenarioTrace::hash() const {
    Fnv1a h;
    h.update_value(steps);
    h.update_value(n_ues);
    for (auto s : slices) h.update_value(static_cast<int>(s));
    h.update(std::span<const Position>(positions));
    h.update(std::span<const double>(prx_db));
    h.update(std::span<const double>(embb_mean_mbps));
    h.update(std::span<const double>(embb_demand_mbps));
    h.update(std::span<const std::int64_t>(urllc_arrival_bits));
    return h.digest();
}

SliceEnv::SliceEnv(ScenarioConfig scenario, ThroughputOracle oracle, SlaConfig sla)
    : scenario_(scenario), oracle_(std::move(oracle)), sla_(sla) {
    scenario_.validate();
    sla_.validate();
    oracle_.sources().radio.validate();
}

Observation SliceEnv::reset(std::uint64_t seed) {
    return reset(std::make_shared<const ScenarioTrace>(ScenarioTrace::generate(scenario_, radio(), sla_, seed)));
}

Observation SliceEnv::reset(std::shared_ptr<const ScenarioTrace> trace) {
    if (!trace || trace->steps != scenario_.episode_steps || trace->n_ues != kNumUes) {
        throw ContractError("scenario trace does not match the environment configuration");
    }
    trace_ = std::move(trace);
    step_ = 0;
    queues_.assign(kNumUrllc, UrllcQueue{});
    ues_.clear();
    for (int i = 0; i < kNumUes; ++i) {
        UeState u;
        u.id = i;
        u.slice = slice_of_ue(i);
        u.bounds = bounds_for(u.slice, sla_);
        ues_.push_back(u);
    }
    load_step_state();
    return observe();
}

void SliceEnv::load_step_state() {
    const int demand_row = std::min(step_, trace_->steps - 1);
    for (int i = 0; i < kNumUes; ++i) {
        auto& u = ues_[static_cast<std::size_t>(i)];
        u.position = trace_->position(step_, i);
        u.prx_db = trace_->prx(step_, i);
        switch (u.slice) {
            case SliceId::Urllc:
                u.demand = queues_[static_cast<std::size_t>(i)].backlog_mbits();
                break;
            case SliceId::Embb:
                u.demand = trace_->embb_demand(demand_row, i);
                break;
            case SliceId::Mmtc:
                u.demand = sla_.mmtc_per_device_mbps;
                break;
        }
    }
}

Observation SliceEnv::observe() const {
    if (!trace_) throw ContractError("environment has not been reset");
    const auto& r = radio();
    Observation obs;
    obs.reserve(kObservationDim);
    for (const auto& u : ues_) {
        obs.push_back(static_cast<double>(static_cast<int>(u.slice)) / 2.0);
        obs.push_back(normalize_demand(u.demand, u.bounds));
        obs.push_back(std::clamp((u.prx_db - r.prx_min_db) / (r.prx_max_db - r.prx_min_db), 0.0, 1.0));
    }
    return obs;
}

std::vector<int> SliceEnv::ue_prbs(const SliceAllocation& action) const {
    std::vector<int> out(kNumUes, 0);
    const int ranges[3][2] = {{0, kNumUrllc}, {kNumUrllc, kNumUrllc + kNumEmbb}, {kNumUrllc + kNumEmbb, kNumUes}};
    for (int s = 0; s < kNumSlices; ++s) {
        const int lo = ranges[s][0];
        const int hi = ranges[s][1];
        std::vector<double> w(static_cast<std::size_t>(hi - lo), 1.0);
        if (scenario_.split == SplitRule::DemandProportional) {
            double sum = 0.0;
            for (int i = lo; i < hi; ++i) {
                w[static_cast<std::size_t>(i - lo)] = ues_[static_cast<std::size_t>(i)].demand;
                sum += ues_[static_cast<std::size_t>(i)].demand;
            }
            if (!(sum > 0.0)) std::fill(w.begin(), w.end(), 1.0);
        }
        const auto shares = largest_remainder(w, action.of(static_cast<SliceId>(s)));
        for (int i = lo; i < hi; ++i) out[static_cast<std::size_t>(i)] = shares[static_cast<std::size_t>(i - lo)];
    }
    return out;
}

StepResult SliceEnv::step(const SliceAllocation& action) {
    if (!trace_) throw ContractError("environment has not been reset");
    if (done()) throw ContractError("step called on a finished episode");
    if (action.urllc < 0 || action.embb < 0 || action.mmtc < 0 || action.total() != radio().prb_total) {
        throw ContractError("slice allocation must be non-negative and sum to " + std::to_string(radio().prb_total));
    }

    StepResult res;
    res.ue_prbs = ue_prbs(action);
    res.ue_throughput_mbps.resize(kNumUes);
    for (int i = 0; i < kNumUes; ++i) {
        const auto k = static_cast<std::size_t>(i);
        res.ue_throughput_mbps[k] = oracle_(ues_[k].prx_db, res.ue_prbs[k]);
    }

    SlaInputs in;
    for (int i = 0; i < kNumUes; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double thr = res.ue_throughput_mbps[k];
        switch (ues_[k].slice) {
            case SliceId::Urllc: {
                auto& q = queues_[k];
                if (const auto bits = trace_->urllc_arrival(step_, i); bits > 0) {
                    UrllcPacket p;
                    p.size_bits = bits;
                    p.remaining_bits = bits;
                    p.arrival_step = step_;
                    q.push(p);
                }
                UrllcUeInput u;
                for (const auto& c : q.drain(thr, sla_.step_ms, step_)) u.completed_latencies_ms.push_back(c.latency_ms);
                u.head_age_ms = q.head_age_ms(step_, sla_.step_ms);
                u.backlog_mbits = q.backlog_mbits();
                u.throughput_mbps = thr;
                in.urllc.push_back(std::move(u));
                break;
            }
            case SliceId::Embb:
                in.embb.push_back(EmbbUeInput{thr, trace_->embb_demand(step_, i)});
                break;
            case SliceId::Mmtc:
                in.mmtc_mbps.push_back(thr);
                break;
        }
    }
    res.metrics = eval_sla(in, sla_);

    auto& sc = res.scores;
    int on_time = 0;
    for (const auto& u : in.urllc) {
        if (!u.head_age_ms || *u.head_age_ms <= sla_.urllc_latency_ms) ++on_time;
    }
    sc.urllc = static_cast<double>(on_time) / static_cast<double>(in.urllc.size());
    double embb = 0.0;
    for (const auto& u : in.embb) embb += u.demand_mbps > 0.0 ? std::min(1.0, u.achieved_mbps / u.demand_mbps) : 1.0;
    sc.embb = embb / static_cast<double>(in.embb.size());
    sc.mmtc = std::min(1.0, static_cast<double>(res.metrics.mmtc_supported_devices) / sla_.mmtc_devices);
    const auto& w = scenario_.weights;
    sc.reward = w.urllc * sc.urllc + w.embb * sc.embb + w.mmtc * sc.mmtc;
    res.reward = sc.reward;

    ++step_;
    load_step_state();
    res.observation = observe();
    res.done = done();
    return res;
}

StepResult SliceEnv::step_raw(std::span<const double> raw) { return step(project_action(raw, radio().prb_total)); }

}  // namespace prbslice
