#include "prbslice/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "prbslice/error.hpp"

namespace prbslice {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

YAML::Node parse_yaml(std::string_view text, std::string_view what) {
    try {
        YAML::Node n = YAML::Load(std::string(text));
        if (n.IsNull()) return YAML::Node(YAML::NodeType::Map);
        if (!n.IsMap()) throw ConfigError(std::string(what) + ": top level must be a mapping");
        return n;
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string(what) + ": " + e.what());
    }
}

template <typename T>
T as(const YAML::Node& n, std::string_view key) {
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError("config key '" + std::string(key) + "' has an invalid value");
    }
}

void reject_unknown(const YAML::Node& map, const std::set<std::string>& allowed, std::string_view where) {
    for (const auto& kv : map) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + std::string(where));
    }
}

template <typename T>
void maybe(const YAML::Node& map, const char* key, T& out) {
    if (const auto n = map[key]) out = as<T>(n, key);
}

std::vector<std::uint64_t> seed_list(const YAML::Node& n, std::string_view key) {
    std::vector<std::uint64_t> out;
    if (n.IsScalar()) {
        out.push_back(as<std::uint64_t>(n, key));
    } else if (n.IsSequence()) {
        for (const auto& x : n) out.push_back(as<std::uint64_t>(x, key));
    } else {
        throw ConfigError("config key '" + std::string(key) + "' must be a seed or a list of seeds");
    }
    return out;
}

void apply_scenario(const YAML::Node& n, ScenarioConfig& sc) {
    reject_unknown(n,
                   {"name", "weights", "reward_oracle", "eval_oracle", "episode_steps", "mobility_std_m", "seed",
                    "split", "area_half_width_m", "min_distance_m"},
                   "scenario preset");
    if (const auto w = n["weights"]) {
        reject_unknown(w, {"urllc", "embb", "mmtc"}, "scenario weights");
        maybe(w, "urllc", sc.weights.urllc);
        maybe(w, "embb", sc.weights.embb);
        maybe(w, "mmtc", sc.weights.mmtc);
    }
    if (const auto r = n["reward_oracle"]) sc.reward_oracle = parse_oracle_kind(as<std::string>(r, "reward_oracle"));
    if (const auto r = n["eval_oracle"]) sc.eval_oracle = parse_oracle_kind(as<std::string>(r, "eval_oracle"));
    if (const auto s = n["split"]) sc.split = parse_split_rule(as<std::string>(s, "split"));
    maybe(n, "episode_steps", sc.episode_steps);
    maybe(n, "mobility_std_m", sc.mobility_std_m);
    maybe(n, "seed", sc.seed);
    maybe(n, "area_half_width_m", sc.area_half_width_m);
    maybe(n, "min_distance_m", sc.min_distance_m);
}

ScenarioConfig scenario_from_node(const YAML::Node& n) {
    ScenarioName name = ScenarioName::Stadium;
    if (const auto nm = n["name"]) name = parse_scenario_name(as<std::string>(nm, "name"));
    ScenarioConfig sc = ScenarioConfig::preset(name);
    apply_scenario(n, sc);
    sc.validate();
    return sc;
}

void apply_ppo(const YAML::Node& n, PpoConfig& p) {
    reject_unknown(n,
                   {"clip", "gamma", "gae_lambda", "epochs", "minibatch_size", "learning_rate", "entropy_coef",
                    "value_coef", "max_grad_norm", "episodes_per_rollout", "adam_beta1", "adam_beta2", "adam_eps",
                    "log_std_min", "log_std_max"},
                   "ppo");
    maybe(n, "clip", p.clip);
    maybe(n, "gamma", p.gamma);
    maybe(n, "gae_lambda", p.gae_lambda);
    maybe(n, "epochs", p.epochs);
    maybe(n, "minibatch_size", p.minibatch_size);
    maybe(n, "learning_rate", p.learning_rate);
    maybe(n, "entropy_coef", p.entropy_coef);
    maybe(n, "value_coef", p.value_coef);
    maybe(n, "max_grad_norm", p.max_grad_norm);
    maybe(n, "episodes_per_rollout", p.episodes_per_rollout);
    maybe(n, "adam_beta1", p.adam_beta1);
    maybe(n, "adam_beta2", p.adam_beta2);
    maybe(n, "adam_eps", p.adam_eps);
    maybe(n, "log_std_min", p.log_std_min);
    maybe(n, "log_std_max", p.log_std_max);
}

void apply_sla(const YAML::Node& n, SlaConfig& s) {
    reject_unknown(n,
                   {"urllc_latency_ms", "urllc_p", "urllc_size_min_mbits", "urllc_size_max_mbits", "embb_min_mbps",
                    "embb_demand_min_mbps", "embb_demand_max_mbps", "embb_rel_std", "mmtc_per_device_mbps",
                    "mmtc_min_ratio", "mmtc_devices", "step_ms"},
                   "sla");
    maybe(n, "urllc_latency_ms", s.urllc_latency_ms);
    maybe(n, "urllc_p", s.urllc_p);
    maybe(n, "urllc_size_min_mbits", s.urllc_size_min_mbits);
    maybe(n, "urllc_size_max_mbits", s.urllc_size_max_mbits);
    maybe(n, "embb_min_mbps", s.embb_min_mbps);
    maybe(n, "embb_demand_min_mbps", s.embb_demand_min_mbps);
    maybe(n, "embb_demand_max_mbps", s.embb_demand_max_mbps);
    maybe(n, "embb_rel_std", s.embb_rel_std);
    maybe(n, "mmtc_per_device_mbps", s.mmtc_per_device_mbps);
    maybe(n, "mmtc_min_ratio", s.mmtc_min_ratio);
    maybe(n, "mmtc_devices", s.mmtc_devices);
    maybe(n, "step_ms", s.step_ms);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::shared_ptr<const OracleSources> sources_from_node(const YAML::Node& n, const std::filesystem::path& base) {
    reject_unknown(n,
                   {"profile_csv", "trace_csv", "bler_csv", "mcs_table_csv", "scaling", "bler", "trace_efficiency",
                    "profile"},
                   "sources");
    OracleSources s;
    if (const auto m = n["mcs_table_csv"]) {
        // Only validated here: the estimators read the bundled table.
        McsTable::load(resolve(base, as<std::string>(m, "mcs_table_csv")));
    }
    if (const auto sc = n["scaling"]) s.scaling = parse_scaling_mode(as<std::string>(sc, "scaling"));
    double uniform_bler = 0.1;
    maybe(n, "bler", uniform_bler);
    s.bler = n["bler_csv"] ? BlerTable::load(resolve(base, as<std::string>(n["bler_csv"], "bler_csv")), uniform_bler)
                           : BlerTable(uniform_bler);
    ProfileParams pp;
    if (const auto p = n["profile"]) {
        reject_unknown(p, {"slope", "anchor_db", "spread", "grid_step_db"}, "sources.profile");
        maybe(p, "slope", pp.slope);
        maybe(p, "spread", pp.spread);
        maybe(p, "grid_step_db", pp.grid_step_db);
        if (const auto a = p["anchor_db"]) pp.anchor_db = as<double>(a, "anchor_db");
    }
    s.profile = n["profile_csv"] ? McsProfile::load(resolve(base, as<std::string>(n["profile_csv"], "profile_csv")))
                                 : synthesize_profile(pp, s.radio);
    double efficiency = 0.85;
    maybe(n, "trace_efficiency", efficiency);
    s.trace = n["trace_csv"] ? ThroughputTrace::load(resolve(base, as<std::string>(n["trace_csv"], "trace_csv")))
                             : synthesize_trace(s.profile, s.bler, s.radio, efficiency, s.scaling);
    return std::make_shared<const OracleSources>(std::move(s));
}

}  // namespace

ScenarioConfig parse_scenario_preset(std::string_view yaml_text) {
    return scenario_from_node(parse_yaml(yaml_text, "scenario preset"));
}

ScenarioConfig load_scenario_preset(const std::filesystem::path& path) {
    return parse_scenario_preset(read_file(path));
}

ExperimentSpec parse_experiment(std::string_view yaml_text, const std::filesystem::path& base_dir) {
    const YAML::Node n = parse_yaml(yaml_text, "experiment config");
    reject_unknown(n,
                   {"scenario", "scenario_file", "agent", "lambda", "train_seeds", "eval_seeds", "eval_episodes",
                    "train_iterations", "jobs", "out", "episode_steps", "ppo", "network", "sla", "sources"},
                   "experiment config");
    ExperimentSpec spec;
    if (const auto f = n["scenario_file"]) {
        spec.scenario = load_scenario_preset(resolve(base_dir, as<std::string>(f, "scenario_file")));
    } else if (const auto s = n["scenario"]) {
        spec.scenario = ScenarioConfig::preset(parse_scenario_name(as<std::string>(s, "scenario")));
    }
    maybe(n, "episode_steps", spec.scenario.episode_steps);
    if (const auto a = n["agent"]) spec.agent = parse_agent(as<std::string>(a, "agent"));
    maybe(n, "lambda", spec.lambda);
    if (const auto s = n["train_seeds"]) spec.train_seeds = seed_list(s, "train_seeds");
    if (const auto s = n["eval_seeds"]) spec.eval_seeds = seed_list(s, "eval_seeds");
    maybe(n, "eval_episodes", spec.eval_episodes);
    maybe(n, "train_iterations", spec.train_iterations);
    maybe(n, "jobs", spec.jobs);
    if (const auto o = n["out"]) spec.out_dir = resolve(base_dir, as<std::string>(o, "out"));
    if (const auto p = n["ppo"]) apply_ppo(p, spec.ppo);
    if (const auto w = n["network"]) {
        reject_unknown(w, {"hidden1", "hidden2"}, "network");
        maybe(w, "hidden1", spec.network.hidden1);
        maybe(w, "hidden2", spec.network.hidden2);
    }
    if (const auto s = n["sla"]) apply_sla(s, spec.sla);
    if (const auto s = n["sources"]) spec.sources = sources_from_node(s, base_dir);
    spec.validate();
    return spec;
}

ExperimentSpec load_experiment(const std::filesystem::path& path) {
    return parse_experiment(read_file(path), path.has_parent_path() ? path.parent_path() : ".");
}

void apply_env_overrides(ExperimentSpec& spec, const EnvLookup& lookup) {
    const auto get = [&](std::string_view name) -> const char* {
        const std::string key = std::string(kEnvPrefix) + std::string(name);
        const char* v = lookup ? lookup(key.c_str()) : std::getenv(key.c_str());
        return (v && *v) ? v : nullptr;
    };
    const auto number = [&](std::string_view name, const char* v) {
        char* end = nullptr;
        const double x = std::strtod(v, &end);
        if (end == v || *end != '\0') {
            throw ConfigError(std::string(kEnvPrefix) + std::string(name) + " is not a number: '" + v + "'");
        }
        return x;
    };
    const auto integer = [&](std::string_view name, const char* v) {
        char* end = nullptr;
        const long long x = std::strtoll(v, &end, 10);
        if (end == v || *end != '\0') {
            throw ConfigError(std::string(kEnvPrefix) + std::string(name) + " is not an integer: '" + v + "'");
        }
        return x;
    };

    if (const char* v = get("SCENARIO")) {
        const int steps = spec.scenario.episode_steps;
        spec.scenario = ScenarioConfig::preset(parse_scenario_name(v));
        spec.scenario.episode_steps = steps;
    }
    if (const char* v = get("AGENT")) spec.agent = parse_agent(v);
    if (const char* v = get("LAMBDA")) spec.lambda = number("LAMBDA", v);
    if (const char* v = get("SEED")) {
        const auto s = integer("SEED", v);
        if (s < 0) throw ConfigError("PRBSLICE_SEED must be non-negative");
        spec.train_seeds = {static_cast<std::uint64_t>(s)};
    }
    if (const char* v = get("EPISODES")) spec.eval_episodes = static_cast<int>(integer("EPISODES", v));
    if (const char* v = get("ITERATIONS")) spec.train_iterations = static_cast<int>(integer("ITERATIONS", v));
    if (const char* v = get("JOBS")) spec.jobs = static_cast<int>(integer("JOBS", v));
    if (const char* v = get("OUT")) spec.out_dir = v;
}

}  // namespace prbslice
