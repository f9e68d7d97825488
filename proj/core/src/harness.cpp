#include "prbslice/harness.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include "csv_util.hpp"
#include "prbslice/error.hpp"
#include "prbslice/link_sim.hpp"
#include "prbslice/seeding.hpp"

namespace prbslice {

namespace {

constexpr std::uint64_t kEvalSeedBase = 10000;
constexpr std::uint64_t kTagRollout = 0x726f6c6c;
constexpr std::uint64_t kTagAction = 0x616374;
constexpr std::uint64_t kTagUpdate = 0x757064;
constexpr std::uint64_t kTagInit = 0x696e6974;

using detail::write_schema;

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << std::setprecision(10);
    return out;
}

void write_curve_header(std::ostream& out) {
    write_schema(out, "training_curve");
    out << "iteration,mean_episode_reward,mean_step_reward,loss,surrogate,value_loss,entropy,approx_kl,clip_fraction\n";
}

void write_curve_row(std::ostream& out, const IterationRecord& r) {
    out << r.iteration << ',' << r.mean_episode_reward << ',' << r.mean_step_reward << ',' << r.loss.total << ','
        << r.loss.surrogate << ',' << r.loss.value_loss << ',' << r.loss.entropy << ',' << r.loss.approx_kl << ','
        << r.loss.clip_fraction << '\n';
    out.flush();
}

double mean_of(std::span<const double> v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

AgentVariant parse_agent(std::string_view name) {
    if (name == "practical") return AgentVariant::Practical;
    if (name == "simulated" || name == "theoretical") return AgentVariant::Simulated;
    if (name == "hybrid") return AgentVariant::Hybrid;
    throw ConfigError("unknown agent '" + std::string(name) + "' (expected practical, simulated or hybrid)");
}

std::string_view to_string(AgentVariant a) {
    switch (a) {
        case AgentVariant::Practical: return "practical";
        case AgentVariant::Simulated: return "simulated";
        case AgentVariant::Hybrid: return "hybrid";
    }
    return "?";
}

OracleKind reward_oracle_for(AgentVariant a) {
    switch (a) {
        case AgentVariant::Practical: return OracleKind::Practical;
        case AgentVariant::Simulated: return OracleKind::Theoretical;
        case AgentVariant::Hybrid: return OracleKind::Hybrid;
    }
    return OracleKind::Hybrid;
}

// ------------------------------------------------------------ ExperimentSpec

void ExperimentSpec::validate() const {
    scenario.validate();
    sla.validate();
    ppo.validate();
    (void)HybridWeight{lambda};
    if (train_seeds.empty()) throw ConfigError("at least one training seed is required");
    if (eval_episodes <= 0) throw ConfigError("eval_episodes must be positive");
    if (train_iterations < 0) throw ConfigError("train_iterations must be non-negative");
    if (jobs <= 0) throw ConfigError("jobs must be positive");
    if (network.obs_dim != kObservationDim || network.act_dim != kNumSlices) {
        throw ConfigError("network must map " + std::to_string(kObservationDim) + " inputs to " +
                          std::to_string(kNumSlices) + " outputs");
    }
    if (network.hidden1 <= 0 || network.hidden2 <= 0) throw ConfigError("hidden layer widths must be positive");
    const auto eval = episode_eval_seeds();
    for (auto s : eval) {
        if (std::find(train_seeds.begin(), train_seeds.end(), s) != train_seeds.end()) {
            throw ConfigError("evaluation seed " + std::to_string(s) + " is also a training seed");
        }
    }
}

std::shared_ptr<const OracleSources> ExperimentSpec::resolved_sources() const {
    if (sources) return sources;
    static const auto defaults = std::make_shared<const OracleSources>(OracleSources::defaults());
    return defaults;
}

ScenarioConfig ExperimentSpec::training_scenario() const {
    ScenarioConfig s = scenario;
    s.reward_oracle = reward_oracle_for(agent);
    return s;
}

std::vector<std::uint64_t> ExperimentSpec::episode_eval_seeds() const {
    std::vector<std::uint64_t> seeds;
    seeds.reserve(static_cast<std::size_t>(std::max(eval_episodes, 0)));
    for (int i = 0; i < eval_episodes; ++i) {
        const auto k = static_cast<std::size_t>(i);
        seeds.push_back(k < eval_seeds.size() ? eval_seeds[k] : kEvalSeedBase + k);
    }
    return seeds;
}

std::string ExperimentSpec::label() const {
    return std::string(to_string(scenario.name)) + "_" + std::string(to_string(agent));
}

// ------------------------------------------------------------------ policies

PolicyFn uniform_policy(int prb_total) {
    return [prb_total](const Observation&) {
        const double raw[kNumSlices] = {0.0, 0.0, 0.0};
        return project_action(raw, prb_total);
    };
}

PolicyFn greedy_policy(PolicyParams params, int prb_total) {
    return [p = std::move(params), prb_total](const Observation& obs) {
        const auto out = policy_forward(p, obs);
        return project_action(out.mean, prb_total);
    };
}

// ------------------------------------------------------------------ training

Trajectory collect_episode(const PolicyParams& params, SliceEnv& env, std::uint64_t scenario_seed,
                           std::mt19937_64& action_rng) {
    Trajectory traj;
    Observation obs = env.reset(scenario_seed);
    const auto steps = static_cast<std::size_t>(env.scenario().episode_steps);
    traj.observations.reserve(steps * obs.size());
    traj.rewards.reserve(steps);
    while (!env.done()) {
        const auto out = policy_forward(params, obs);
        const auto action = sample_action(out, action_rng);
        for (double a : action) {
            if (!std::isfinite(a)) throw DivergenceError("policy produced a non-finite action");
        }
        traj.observations.insert(traj.observations.end(), obs.begin(), obs.end());
        traj.actions.insert(traj.actions.end(), action.begin(), action.end());
        traj.log_probs.push_back(gaussian_log_prob(out.mean, out.log_std, action));
        traj.values.push_back(out.value);
        auto result = env.step_raw(action);
        traj.rewards.push_back(result.reward);
        traj.dones.push_back(result.done ? 1 : 0);
        obs = std::move(result.observation);
    }
    traj.bootstrap_value = 0.0;
    return traj;
}

TrainResult run_train(const ExperimentSpec& spec) {
    spec.validate();
    const auto sources = spec.resolved_sources();
    const ScenarioConfig scenario = spec.training_scenario();
    const ThroughputOracle oracle(scenario.reward_oracle, sources, HybridWeight{spec.lambda});
    const SliceEnv prototype(scenario, oracle, spec.sla);

    const std::uint64_t base = spec.train_seeds.front();
    TrainResult result;
    result.params = PolicyParams::initialize(spec.network, derive_seed(base, {kTagInit}));
    result.checkpoint = spec.out_dir / "checkpoint.txt";
    result.curve_csv = spec.out_dir / "training_curve.csv";

    AdamOptimizer opt(result.params.flat().size(), spec.ppo.learning_rate, spec.ppo.adam_beta1, spec.ppo.adam_beta2,
                      spec.ppo.adam_eps);
    std::mt19937_64 update_rng(derive_seed(base, {kTagUpdate}));
    const std::uint64_t hash = spec.checkpoint_hash();

    auto curve = open_out(result.curve_csv);
    write_curve_header(curve);

    const int n_episodes = spec.ppo.episodes_per_rollout;
    const auto n_seeds = static_cast<int>(spec.train_seeds.size());

    for (int it = 0; it < spec.train_iterations; ++it) {
        std::vector<Trajectory> trajs(static_cast<std::size_t>(n_episodes));
        auto run_one = [&](int e) {
            SliceEnv env = prototype;
            const auto it_u = static_cast<std::uint64_t>(it);
            const auto e_u = static_cast<std::uint64_t>(e);
            const std::uint64_t seed = spec.train_seeds[static_cast<std::size_t>(e % n_seeds)];
            std::mt19937_64 action_rng(derive_seed(base, {kTagAction, it_u, e_u}));
            trajs[static_cast<std::size_t>(e)] =
                collect_episode(result.params, env, derive_seed(seed, {kTagRollout, it_u, e_u}), action_rng);
        };
        try {
            if (spec.jobs <= 1) {
                for (int e = 0; e < n_episodes; ++e) run_one(e);
            } else {
                for (int start = 0; start < n_episodes; start += spec.jobs) {
                    std::vector<std::future<void>> futures;
                    for (int e = start; e < std::min(n_episodes, start + spec.jobs); ++e) {
                        futures.push_back(std::async(std::launch::async, run_one, e));
                    }
                    for (auto& f : futures) f.get();
                }
            }
        } catch (const DivergenceError& e) {
            spdlog::error("training diverged at iteration {}: {}", it, e.what());
            save_checkpoint(spec.out_dir / "checkpoint.partial.txt", result.params, hash);
            throw;
        }

        IterationRecord rec;
        rec.iteration = it;
        std::vector<double> returns;
        double step_sum = 0.0;
        std::size_t step_count = 0;
        for (const auto& t : trajs) {
            const double r = std::accumulate(t.rewards.begin(), t.rewards.end(), 0.0);
            returns.push_back(r);
            step_sum += r;
            step_count += t.size();
        }
        rec.mean_episode_reward = mean_of(returns);
        rec.mean_step_reward = step_count ? step_sum / static_cast<double>(step_count) : 0.0;

        const PolicyParams before = result.params;
        try {
            Batch batch = Batch::from_trajectories(trajs, spec.network, spec.ppo);
            rec.loss = ppo_update(result.params, opt, std::move(batch), spec.ppo, update_rng).mean_loss;
        } catch (const DivergenceError& e) {
            spdlog::error("training diverged at iteration {}: {}", it, e.what());
            save_checkpoint(spec.out_dir / "checkpoint.partial.txt", before, hash);
            throw;
        }
        result.curve.push_back(rec);
        write_curve_row(curve, rec);
        spdlog::debug("{} iteration {} mean episode reward {:.4f}", spec.label(), it, rec.mean_episode_reward);
    }

    save_checkpoint(result.checkpoint, result.params, hash);
    return result;
}

// ---------------------------------------------------------------- evaluation

EmphasizedMetric emphasized_metric(ScenarioName s) {
    switch (s) {
        case ScenarioName::SmartFactory: return {"urllc_violation_rate", false};
        case ScenarioName::Stadium: return {"embb_mean_mbps", true};
        case ScenarioName::SmartCity: return {"mmtc_mean_devices", true};
    }
    return {"embb_mean_mbps", true};
}

double emphasized_value(const ResultBundle& b, ScenarioName s) {
    switch (s) {
        case ScenarioName::SmartFactory: return b.urllc_violation_rate;
        case ScenarioName::Stadium: return b.embb_mean_mbps;
        case ScenarioName::SmartCity: return b.mmtc_mean_devices;
    }
    return b.embb_mean_mbps;
}

ResultBundle evaluate_policy(const PolicyFn& policy, const ExperimentSpec& spec, std::string agent_label) {
    spec.validate();
    const auto sources = spec.resolved_sources();
    const ThroughputOracle oracle(spec.scenario.eval_oracle, sources, HybridWeight{spec.lambda});
    SliceEnv env(spec.scenario, oracle, spec.sla);

    ResultBundle b;
    b.scenario = std::string(to_string(spec.scenario.name));
    b.agent = std::move(agent_label);

    long long urllc_ue_steps = 0, urllc_violations = 0;
    long long embb_ue_steps = 0, embb_satisfied = 0;
    long long steps = 0;
    double embb_sum = 0.0, mmtc_devices = 0.0, mmtc_ratio = 0.0;

    for (const auto seed : spec.episode_eval_seeds()) {
        auto trace = std::make_shared<const ScenarioTrace>(
            ScenarioTrace::generate(spec.scenario, sources->radio, spec.sla, seed));
        b.trace_hashes.push_back(trace->hash());
        Observation obs = env.reset(trace);
        double episode_reward = 0.0;
        while (!env.done()) {
            auto r = env.step(policy(obs));
            episode_reward += r.reward;
            ++steps;
            const auto& m = r.metrics;
            for (bool v : m.urllc_ue_violated) {
                ++urllc_ue_steps;
                urllc_violations += v ? 1 : 0;
            }
            for (bool s : m.embb_ue_satisfied) {
                ++embb_ue_steps;
                embb_satisfied += s ? 1 : 0;
            }
            b.latency_samples_ms.insert(b.latency_samples_ms.end(), m.urllc_latencies_ms.begin(),
                                        m.urllc_latencies_ms.end());
            for (int u = 0; u < kNumUes; ++u) {
                if (slice_of_ue(u) != SliceId::Embb) continue;
                const double t = r.ue_throughput_mbps[static_cast<std::size_t>(u)];
                b.throughput_samples_mbps.push_back(t);
                embb_sum += t;
            }
            mmtc_devices += m.mmtc_supported_devices;
            mmtc_ratio += m.mmtc_service_ratio;
            obs = std::move(r.observation);
        }
        // Packets still queued at the horizon enter the latency sample with their censored age.
        for (int k = 0; k < kNumUrllc; ++k) {
            const auto& q = env.urllc_queue(k);
            const int last = env.step_index() - 1;
            for (const auto& p : q.packets()) {
                b.latency_samples_ms.push_back(static_cast<double>(last - p.arrival_step + 1) * spec.sla.step_ms);
            }
        }
        b.episode_rewards.push_back(episode_reward);
    }

    b.episodes = static_cast<int>(b.episode_rewards.size());
    b.mean_episode_reward = mean_of(b.episode_rewards);
    std::sort(b.latency_samples_ms.begin(), b.latency_samples_ms.end());
    std::sort(b.throughput_samples_mbps.begin(), b.throughput_samples_mbps.end());
    b.urllc_mean_latency_ms = mean_of(b.latency_samples_ms);
    b.urllc_violation_rate = urllc_ue_steps ? static_cast<double>(urllc_violations) / urllc_ue_steps : 0.0;
    b.embb_mean_mbps = embb_ue_steps ? embb_sum / static_cast<double>(embb_ue_steps) : 0.0;
    b.embb_satisfaction_rate = embb_ue_steps ? static_cast<double>(embb_satisfied) / embb_ue_steps : 0.0;
    b.mmtc_mean_devices = steps ? mmtc_devices / static_cast<double>(steps) : 0.0;
    b.mmtc_service_ratio = steps ? mmtc_ratio / static_cast<double>(steps) : 0.0;
    return b;
}

ResultBundle run_eval(const PolicyParams& params, const ExperimentSpec& spec) {
    return evaluate_policy(greedy_policy(params, spec.resolved_sources()->radio.prb_total), spec,
                           std::string(to_string(spec.agent)));
}

ResultBundle run_eval(const std::filesystem::path& checkpoint, const ExperimentSpec& spec) {
    return run_eval(load_checkpoint(checkpoint, spec.checkpoint_hash()), spec);
}

// ---------------------------------------------------------------- CSV output

void write_cdf_csv(std::ostream& out, std::span<const double> samples, std::string_view value_name) {
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    write_schema(out, "cdf");
    out << value_name << ",cdf\n";
    const auto n = sorted.size();
    for (std::size_t i = 0; i < n; ++i) {
        // Only the last of a run of equal values is emitted.
        if (i + 1 < n && sorted[i + 1] == sorted[i]) continue;
        const double p = (i + 1 == n) ? 1.0 : static_cast<double>(i + 1) / static_cast<double>(n);
        out << sorted[i] << ',' << p << '\n';
    }
}

void write_bundle_summary_header(std::ostream& out) {
    write_schema(out, "summary");
    out << "scenario,agent,episodes,mean_episode_reward,urllc_mean_latency_ms,urllc_violation_rate,"
           "embb_mean_mbps,embb_satisfaction_rate,mmtc_mean_devices,mmtc_service_ratio,emphasized_metric,"
           "emphasized_value\n";
}

void write_bundle_summary_row(std::ostream& out, const ResultBundle& b, ScenarioName s) {
    const auto em = emphasized_metric(s);
    out << b.scenario << ',' << b.agent << ',' << b.episodes << ',' << b.mean_episode_reward << ','
        << b.urllc_mean_latency_ms << ',' << b.urllc_violation_rate << ',' << b.embb_mean_mbps << ','
        << b.embb_satisfaction_rate << ',' << b.mmtc_mean_devices << ',' << b.mmtc_service_ratio << ',' << em.name
        << ',' << emphasized_value(b, s) << '\n';
}

void write_bundle(const std::filesystem::path& dir, const ResultBundle& b, ScenarioName s) {
    {
        auto out = open_out(dir / "summary.csv");
        write_bundle_summary_header(out);
        write_bundle_summary_row(out, b, s);
    }
    {
        auto out = open_out(dir / "latency_cdf.csv");
        write_cdf_csv(out, b.latency_samples_ms, "latency_ms");
    }
    {
        auto out = open_out(dir / "throughput_cdf.csv");
        write_cdf_csv(out, b.throughput_samples_mbps, "throughput_mbps");
    }
}

// -------------------------------------------------------------------- matrix

std::vector<ExperimentSpec> full_matrix(const ExperimentSpec& base) {
    std::vector<ExperimentSpec> specs;
    for (auto name : {ScenarioName::SmartFactory, ScenarioName::Stadium, ScenarioName::SmartCity}) {
        for (auto agent : {AgentVariant::Practical, AgentVariant::Simulated, AgentVariant::Hybrid}) {
            ExperimentSpec s = base;
            ScenarioConfig sc = ScenarioConfig::preset(name);
            sc.episode_steps = base.scenario.episode_steps;
            sc.mobility_std_m = base.scenario.mobility_std_m;
            sc.split = base.scenario.split;
            s.scenario = sc;
            s.agent = agent;
            s.out_dir = base.out_dir / s.label();
            s.jobs = 1;
            specs.push_back(std::move(s));
        }
    }
    return specs;
}

std::vector<MatrixCell> run_matrix(std::span<const ExperimentSpec> specs, int jobs) {
    if (jobs <= 0) throw ConfigError("jobs must be positive");
    std::vector<MatrixCell> cells(specs.size());
    auto run_cell = [&](std::size_t i) {
        MatrixCell& c = cells[i];
        c.spec = specs[i];
        try {
            const auto trained = run_train(c.spec);
            c.bundle = run_eval(trained.params, c.spec);
            write_bundle(c.spec.out_dir, c.bundle, c.spec.scenario.name);
            c.ok = true;
        } catch (const std::exception& e) {
            c.error = e.what();
            spdlog::error("matrix cell {} failed: {}", c.spec.label(), c.error);
        }
    };
    for (std::size_t start = 0; start < specs.size(); start += static_cast<std::size_t>(jobs)) {
        const std::size_t end = std::min(specs.size(), start + static_cast<std::size_t>(jobs));
        if (jobs == 1) {
            run_cell(start);
            continue;
        }
        std::vector<std::future<void>> futures;
        for (std::size_t i = start; i < end; ++i) futures.push_back(std::async(std::launch::async, run_cell, i));
        for (auto& f : futures) f.get();
    }
    return cells;
}

void write_matrix_summary(std::ostream& out, std::span<const MatrixCell> cells) {
    write_schema(out, "matrix_summary");
    out << "scenario,agent,status,episodes,mean_episode_reward,urllc_mean_latency_ms,urllc_violation_rate,"
           "embb_mean_mbps,embb_satisfaction_rate,mmtc_mean_devices,mmtc_service_ratio,emphasized_metric,"
           "emphasized_value\n";
    for (const auto& c : cells) {
        const auto& b = c.bundle;
        const auto s = c.spec.scenario.name;
        out << to_string(s) << ',' << to_string(c.spec.agent) << ',' << (c.ok ? "ok" : "failed");
        if (!c.ok) {
            out << ",,,,,,,,,," << emphasized_metric(s).name << ",\n";
            continue;
        }
        out << ',' << b.episodes << ',' << b.mean_episode_reward << ',' << b.urllc_mean_latency_ms << ','
            << b.urllc_violation_rate << ',' << b.embb_mean_mbps << ',' << b.embb_satisfaction_rate << ','
            << b.mmtc_mean_devices << ',' << b.mmtc_service_ratio << ',' << emphasized_metric(s).name << ','
            << emphasized_value(b, s) << '\n';
    }
}

std::vector<OrderingCheck> ordering_checks(std::span<const MatrixCell> cells) {
    std::vector<OrderingCheck> checks;
    for (auto name : {ScenarioName::SmartFactory, ScenarioName::Stadium, ScenarioName::SmartCity}) {
        const MatrixCell* by_agent[3] = {nullptr, nullptr, nullptr};
        for (const auto& c : cells) {
            if (c.ok && c.spec.scenario.name == name) by_agent[static_cast<int>(c.spec.agent)] = &c;
        }
        if (!by_agent[0] || !by_agent[1] || !by_agent[2]) continue;
        const auto em = emphasized_metric(name);
        const double p = emphasized_value(by_agent[0]->bundle, name);
        const double s = emphasized_value(by_agent[1]->bundle, name);
        const double h = emphasized_value(by_agent[2]->bundle, name);
        OrderingCheck oc{name, h, em.higher_is_better ? std::min(p, s) : std::max(p, s), false};
        oc.hybrid_not_worse = em.higher_is_better ? h >= oc.weaker_baseline : h <= oc.weaker_baseline;
        checks.push_back(oc);
    }
    return checks;
}

// -------------------------------------------------------------- oracle table

void write_oracle_table(std::ostream& out, const OracleSources& sources, const OracleTableOptions& opt,
                        HybridWeight w) {
    auto shared = std::make_shared<const OracleSources>(sources);
    const ThroughputOracle theo(OracleKind::Theoretical, shared);
    const ThroughputOracle prac(OracleKind::Practical, shared);
    const ThroughputOracle hyb(OracleKind::Hybrid, shared, w);

    write_schema(out, "oracle_table");
    out << "prx_db,prbs,theoretical_mbps,practical_mbps,hybrid_mbps";
    if (opt.with_link_sim) out << ",link_sim_mbps,link_sim_ber";
    out << '\n';
    out << std::setprecision(10);
    for (double prx : sources.profile.grid()) {
        for (int prbs : opt.prbs) {
            out << prx << ',' << prbs << ',' << theo(prx, prbs) << ',' << prac(prx, prbs) << ',' << hyb(prx, prbs);
            if (opt.with_link_sim) {
                LinkRunSpec ls;
                ls.prbs = prbs;
                ls.mcs = opt.link_sim_mcs;
                ls.prx_db = prx;
                ls.noise_db = sources.radio.noise_floor_db;
                ls.n_ofdm_symbols = opt.link_sim_symbols;
                ls.seed = opt.seed;
                LinkSimOptions lo;
                lo.radio = sources.radio;
                const auto r = simulate_link(ls, lo);
                out << ',' << r.throughput_bps * 1e-6 << ',' << r.bit_error_rate;
            }
            out << '\n';
        }
    }
}

}  // namespace prbslice
