// prbslice: train, evaluate and compare PRB slicing agents.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "prbslice/config.hpp"
#include "prbslice/error.hpp"
#include "prbslice/harness.hpp"
#include "prbslice/oracle.hpp"

namespace fs = std::filesystem;
using namespace prbslice;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

struct CommonFlags {
    std::string config;
    std::optional<std::string> scenario;
    std::optional<std::string> agent;
    std::optional<double> lambda;
    std::optional<std::uint64_t> seed;
    std::optional<int> episodes;
    std::optional<int> iterations;
    std::optional<std::string> out;
    std::optional<int> jobs;
};

void add_common(CLI::App* app, CommonFlags& f, bool with_agent) {
    app->add_option("--config", f.config, "Experiment config file (YAML)");
    app->add_option("--scenario", f.scenario, "smart_factory | stadium | smart_city");
    if (with_agent) {
        app->add_option("--agent", f.agent, "Reward oracle of the agent")
            ->check(CLI::IsMember({"practical", "simulated", "hybrid"}));
    }
    app->add_option("--lambda", f.lambda, "Hybrid weight on the practical estimator");
    app->add_option("--out", f.out, "Output directory");
    app->add_option("--jobs", f.jobs, "Parallel tasks");
}

/// defaults < config file < PRBSLICE_* environment < command line.
ExperimentSpec build_spec(const CommonFlags& f) {
    ExperimentSpec spec = f.config.empty() ? ExperimentSpec{} : load_experiment(f.config);
    apply_env_overrides(spec);
    if (f.scenario) {
        const int steps = spec.scenario.episode_steps;
        spec.scenario = ScenarioConfig::preset(parse_scenario_name(*f.scenario));
        spec.scenario.episode_steps = steps;
    }
    if (f.agent) spec.agent = parse_agent(*f.agent);
    if (f.lambda) spec.lambda = *f.lambda;
    if (f.iterations) spec.train_iterations = *f.iterations;
    if (f.out) spec.out_dir = *f.out;
    if (f.jobs) spec.jobs = *f.jobs;
    return spec;
}

void print_summary(const ResultBundle& b, ScenarioName s) {
    std::cout << std::setprecision(8);
    write_bundle_summary_header(std::cout);
    write_bundle_summary_row(std::cout, b, s);
}

std::ofstream open_file(const std::string& path) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) throw ConfigError("cannot write " + path);
    out << std::setprecision(10);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PRB slicing with practical, simulated and hybrid throughput oracles"};
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace | debug | info | warn | error | off");

    CommonFlags train_f;
    auto* train = app.add_subcommand("train", "Train one agent and write checkpoint.txt + training_curve.csv");
    add_common(train, train_f, true);
    train->add_option("--seed", train_f.seed, "Training seed");
    train->add_option("--episodes", train_f.episodes, "Episodes per PPO rollout");
    train->add_option("--iterations", train_f.iterations, "PPO iterations");

    CommonFlags eval_f;
    std::string checkpoint;
    bool baseline = false;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint or the uniform baseline");
    add_common(eval, eval_f, true);
    eval->add_option("--seed", eval_f.seed, "First evaluation seed (consecutive seeds follow)");
    eval->add_option("--episodes", eval_f.episodes, "Evaluation episodes");
    auto* ck = eval->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate");
    eval->add_flag("--baseline", baseline, "Evaluate the uniform-allocation baseline")->excludes(ck);

    CommonFlags matrix_f;
    auto* matrix = app.add_subcommand("matrix", "Train and evaluate all 3 agents x 3 scenarios");
    add_common(matrix, matrix_f, false);
    matrix->add_option("--seed", matrix_f.seed, "Training seed");
    matrix->add_option("--episodes", matrix_f.episodes, "Evaluation episodes per cell");
    matrix->add_option("--iterations", matrix_f.iterations, "PPO iterations per cell");

    std::string table_out;
    std::string table_config;
    std::vector<int> table_prbs{106};
    bool table_link = false;
    std::optional<double> table_lambda;
    std::uint64_t table_seed = 1;
    auto* table = app.add_subcommand("oracle-table", "Throughput vs received power for every estimator");
    table->add_option("--config", table_config, "Experiment config supplying the oracle sources");
    table->add_option("--out", table_out, "Output CSV (stdout when omitted)");
    table->add_option("--prbs", table_prbs, "PRB counts")->delimiter(',');
    table->add_flag("--link-sim", table_link, "Add Monte-Carlo link-simulator columns at MCS 28");
    table->add_option("--lambda", table_lambda, "Hybrid weight");
    table->add_option("--seed", table_seed, "Link-simulator seed");

    ProfileParams pp;
    std::optional<double> anchor;
    std::string profile_out;
    std::string trace_out;
    auto* synth = app.add_subcommand("profile-synth", "Emit a synthetic MCS profile CSV");
    synth->add_option("--slope", pp.slope, "MCS steps per dB");
    synth->add_option("--spread", pp.spread, "Gaussian spread in MCS steps");
    synth->add_option("--anchor", anchor, "P_rx (dB) where the mean MCS is 6");
    synth->add_option("--step", pp.grid_step_db, "Grid step (dB)");
    synth->add_option("--out", profile_out, "Output CSV (stdout when omitted)");
    synth->add_option("--trace-out", trace_out, "Also write the matching synthetic throughput trace");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        spdlog::set_level(spdlog::level::from_str(log_level));

        if (*train) {
            ExperimentSpec spec = build_spec(train_f);
            if (train_f.seed) spec.train_seeds = {*train_f.seed};
            if (train_f.episodes) spec.ppo.episodes_per_rollout = *train_f.episodes;
            spec.validate();
            const auto r = run_train(spec);
            spdlog::info("{}: {} iterations, final mean episode reward {:.4f}", spec.label(), r.curve.size(),
                         r.curve.empty() ? 0.0 : r.curve.back().mean_episode_reward);
            std::cout << r.checkpoint.string() << '\n' << r.curve_csv.string() << '\n';
        } else if (*eval) {
            ExperimentSpec spec = build_spec(eval_f);
            if (eval_f.episodes) spec.eval_episodes = *eval_f.episodes;
            if (eval_f.seed) {
                spec.eval_seeds.clear();
                for (int i = 0; i < spec.eval_episodes; ++i) spec.eval_seeds.push_back(*eval_f.seed + i);
            }
            if (!baseline && checkpoint.empty()) throw ConfigError("eval needs --checkpoint or --baseline");
            const ResultBundle b = baseline ? evaluate_policy(uniform_policy(), spec, "uniform")
                                            : run_eval(fs::path(checkpoint), spec);
            write_bundle(spec.out_dir, b, spec.scenario.name);
            print_summary(b, spec.scenario.name);
        } else if (*matrix) {
            ExperimentSpec base = build_spec(matrix_f);
            if (matrix_f.seed) base.train_seeds = {*matrix_f.seed};
            if (matrix_f.episodes) base.eval_episodes = *matrix_f.episodes;
            base.validate();
            const auto specs = full_matrix(base);
            const auto cells = run_matrix(specs, base.jobs);
            {
                fs::create_directories(base.out_dir);
                std::ofstream out(base.out_dir / "matrix_summary.csv");
                out << std::setprecision(10);
                write_matrix_summary(out, cells);
            }
            write_matrix_summary(std::cout, cells);
            for (const auto& oc : ordering_checks(cells)) {
                spdlog::info("{}: hybrid {} = {:.6g}, weaker baseline {:.6g} -> {}", to_string(oc.scenario),
                             emphasized_metric(oc.scenario).name, oc.hybrid, oc.weaker_baseline,
                             oc.hybrid_not_worse ? "not worse" : "worse");
            }
            bool diverged = false;
            bool failed = false;
            for (const auto& c : cells) {
                if (c.ok) continue;
                failed = true;
                diverged = diverged || c.error.find("diverge") != std::string::npos;
            }
            if (failed) return diverged ? kExitDivergence : kExitFailure;
        } else if (*table) {
            ExperimentSpec spec = table_config.empty() ? ExperimentSpec{} : load_experiment(table_config);
            apply_env_overrides(spec);
            OracleTableOptions opt;
            opt.prbs = table_prbs;
            opt.with_link_sim = table_link;
            opt.seed = table_seed;
            const double lambda = table_lambda.value_or(spec.lambda);
            (void)HybridWeight{lambda};
            OracleSources sources = *spec.resolved_sources();
            // The table's hybrid column uses the requested weight.
            const auto write = [&](std::ostream& out) { write_oracle_table(out, sources, opt, HybridWeight{lambda}); };
            if (table_out.empty()) {
                std::cout << std::setprecision(10);
                write(std::cout);
            } else {
                auto out = open_file(table_out);
                write(out);
            }
        } else if (*synth) {
            pp.anchor_db = anchor;
            const RadioConfig radio{};
            const McsProfile profile = synthesize_profile(pp, radio);
            if (profile_out.empty()) {
                std::cout << std::setprecision(10);
                profile.write_csv(std::cout);
            } else {
                auto out = open_file(profile_out);
                profile.write_csv(out);
            }
            if (!trace_out.empty()) {
                auto out = open_file(trace_out);
                synthesize_trace(profile, BlerTable{}, radio).write_csv(out);
            }
        }
    } catch (const DivergenceError& e) {
        spdlog::error("divergence: {}", e.what());
        return kExitDivergence;
    } catch (const ConfigError& e) {
        spdlog::error("config error: {}", e.what());
        return kExitConfig;
    } catch (const DomainError& e) {
        spdlog::error("invalid value: {}", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitFailure;
    }
    return 0;
}
