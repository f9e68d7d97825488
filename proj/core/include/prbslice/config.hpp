#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

#include "prbslice/env.hpp"
#include "prbslice/harness.hpp"

namespace prbslice {

/// Environment variables starting with this prefix override config-file
/// values: SCENARIO, AGENT, LAMBDA, SEED, EPISODES, ITERATIONS, JOBS, OUT.
inline constexpr std::string_view kEnvPrefix = "PRBSLICE_";

/// Scenario preset file (flat YAML mapping). Unlisted keys keep the
/// built-in preset for `name`.
ScenarioConfig load_scenario_preset(const std::filesystem::path& path);
ScenarioConfig parse_scenario_preset(std::string_view yaml_text);

/// Experiment file. Keys: scenario, scenario_file, agent, lambda,
/// train_seeds, eval_seeds, eval_episodes, train_iterations, jobs, out,
/// episode_steps, ppo.*, network.*, sla.*, sources.*. Unknown keys are errors.
ExperimentSpec load_experiment(const std::filesystem::path& path);
ExperimentSpec parse_experiment(std::string_view yaml_text,
                                const std::filesystem::path& base_dir = std::filesystem::current_path());

using EnvLookup = std::function<const char*(const char*)>;

/// Applies PRBSLICE_* overrides; `lookup` defaults to std::getenv.
void apply_env_overrides(ExperimentSpec& spec, const EnvLookup& lookup = {});

}  // namespace prbslice
