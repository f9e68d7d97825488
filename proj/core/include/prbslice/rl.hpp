#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "prbslice/error.hpp"

namespace prbslice {

/// Two tanh hidden layers shared by a Gaussian policy head (means plus
/// state-independent log-stds) and a scalar value head.
struct NetworkShape {
    int obs_dim = 42;
    int hidden1 = 64;
    int hidden2 = 64;
    int act_dim = 3;

    std::size_t param_count() const;
    bool operator==(const NetworkShape&) const = default;
};

/// Offsets of each tensor inside the flat parameter vector. Weight matrices
/// are row-major [out x in].
struct ParamLayout {
    std::size_t w1, b1, w2, b2, w_mean, b_mean, w_value, b_value, log_std, total;
};

ParamLayout layout_of(const NetworkShape& shape);

class PolicyParams {
public:
    PolicyParams() = default;

    static PolicyParams zeros(const NetworkShape& shape);
    /// LeCun-normal hidden layers, 0.01-scaled policy head, zero biases, log-std 0.
    static PolicyParams initialize(const NetworkShape& shape, std::uint64_t seed);
    static PolicyParams from_flat(const NetworkShape& shape, std::vector<double> flat);

    const NetworkShape& shape() const { return shape_; }
    ParamLayout layout() const { return layout_of(shape_); }
    std::span<double> flat() { return flat_; }
    std::span<const double> flat() const { return flat_; }
    std::span<const double> log_std() const;

    void clamp_log_std(double lo, double hi);
    bool all_finite() const;

private:
    NetworkShape shape_{};
    std::vector<double> flat_;
};

struct PolicyOutput {
    std::vector<double> mean;
    std::vector<double> log_std;
    double value = 0.0;
};

/// Throws ContractError if obs has the wrong length or non-finite entries.
PolicyOutput policy_forward(const PolicyParams& params, std::span<const double> obs);

double gaussian_log_prob(std::span<const double> mean, std::span<const double> log_std,
                         std::span<const double> action);
double gaussian_entropy(std::span<const double> log_std);
std::vector<double> sample_action(const PolicyOutput& out, std::mt19937_64& rng);

struct GaeOutput {
    std::vector<double> advantages;
    std::vector<double> returns;
};

/// delta_t = r_t + gamma V_{t+1} (1 - d_t) - V_t,
/// A_t = delta_t + gamma lambda (1 - d_t) A_{t+1}; returns = A + V.
/// V_{T} is `bootstrap_value` when the last step is not terminal.
GaeOutput gae(std::span<const double> rewards, std::span<const double> values, std::span<const std::uint8_t> dones,
              double bootstrap_value, double gamma, double lambda);

struct Trajectory {
    std::vector<double> observations;  // T x obs_dim
    std::vector<double> actions;       // T x act_dim, raw pre-projection samples
    std::vector<double> log_probs;
    std::vector<double> rewards;
    std::vector<double> values;
    std::vector<std::uint8_t> dones;
    double bootstrap_value = 0.0;

    std::size_t size() const { return rewards.size(); }
    void validate(const NetworkShape& shape) const;
};

struct PpoConfig {
    double clip = 0.2;
    double gamma = 0.99;
    double gae_lambda = 0.95;
    int epochs = 4;
    int minibatch_size = 64;
    double learning_rate = 3e-4;
    double entropy_coef = 0.01;
    double value_coef = 0.5;
    double max_grad_norm = 0.5;  // 0 disables clipping
    int episodes_per_rollout = 8;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double log_std_min = -5.0;
    double log_std_max = 2.0;

    void validate() const;
    /// Stable textual form used for checkpoint hashing.
    std::string canonical() const;
};

/// Flattened samples ready for minibatch updates.
struct Batch {
    int obs_dim = 0;
    int act_dim = 0;
    std::vector<double> observations;
    std::vector<double> actions;
    std::vector<double> log_probs;
    std::vector<double> advantages;
    std::vector<double> returns;

    std::size_t size() const { return log_probs.size(); }

    /// Runs GAE per trajectory and concatenates.
    static Batch from_trajectories(std::span<const Trajectory> trajectories, const NetworkShape& shape,
                                   const PpoConfig& cfg);
    /// Mean 0, std 1 (centering only when the std is below 1e-8).
    void normalize_advantages();
};

/// min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A).
double clipped_surrogate(double ratio, double advantage, double clip);

struct LossBreakdown {
    double total = 0.0;  // -surrogate + c_v * value_loss - c_e * entropy
    double surrogate = 0.0;
    double value_loss = 0.0;  // mean 0.5 (V - R)^2
    double entropy = 0.0;
    double approx_kl = 0.0;
    double clip_fraction = 0.0;
};

/// PPO loss over `indices`; accumulates d(total)/d(params) into `grad`
/// (overwritten) when non-empty.
LossBreakdown ppo_loss(const PolicyParams& params, const Batch& batch, std::span<const std::size_t> indices,
                       const PpoConfig& cfg, std::span<double> grad = {});

class AdamOptimizer {
public:
    AdamOptimizer() = default;
    AdamOptimizer(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    /// Descent step on `params` along `grad`, with bias correction.
    void step(std::span<double> params, std::span<const double> grad);
    long long steps() const { return t_; }

private:
    double lr_ = 3e-4;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    long long t_ = 0;
    std::vector<double> m_;
    std::vector<double> v_;
};

struct UpdateStats {
    LossBreakdown mean_loss;
    int minibatches = 0;
};

/// Normalizes advantages, then runs epochs x shuffled minibatches of Adam
/// steps. Throws DivergenceError on a non-finite loss or parameter.
UpdateStats ppo_update(PolicyParams& params, AdamOptimizer& opt, Batch batch, const PpoConfig& cfg,
                       std::mt19937_64& rng);

std::uint64_t config_hash(const NetworkShape& shape, const PpoConfig& cfg);

class CheckpointMismatch : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Text format: magic/version line, config hash, shape, then one hexfloat per line.
void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params, std::uint64_t hash);
PolicyParams load_checkpoint(const std::filesystem::path& path, std::uint64_t expected_hash);

}  // namespace prbslice
