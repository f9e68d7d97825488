#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "prbslice/error.hpp"
#include "prbslice/rl.hpp"

namespace prbslice {
namespace {

const NetworkShape kSmall{5, 4, 3, 3};

// Samples whose old log-probs sit well inside or well outside the clip band,
// so no parameter perturbation of size h crosses a kink.
Batch synthetic_batch(const PolicyParams& p, int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Batch b;
    b.obs_dim = p.shape().obs_dim;
    b.act_dim = p.shape().act_dim;
    for (int i = 0; i < n; ++i) {
        std::vector<double> obs(static_cast<std::size_t>(b.obs_dim));
        for (auto& v : obs) v = g(rng);
        const auto out = policy_forward(p, obs);
        const auto a = sample_action(out, rng);
        const double lp = gaussian_log_prob(out.mean, out.log_std, a);
        const double shift = (i % 3 == 0) ? 0.6 : (i % 3 == 1 ? -0.6 : 0.05);
        b.observations.insert(b.observations.end(), obs.begin(), obs.end());
        b.actions.insert(b.actions.end(), a.begin(), a.end());
        b.log_probs.push_back(lp + shift);
        b.advantages.push_back(g(rng));
        b.returns.push_back(g(rng));
    }
    return b;
}

PolicyParams randomized(const NetworkShape& shape, std::uint64_t seed) {
    auto p = PolicyParams::initialize(shape, seed);
    std::mt19937_64 rng(seed + 1);
    std::normal_distribution<double> g(0.0, 0.3);
    for (auto& v : p.flat()) v += g(rng);
    return p;
}

TEST(NetworkShape, ParamCountMatchesLayout) {
    const NetworkShape s;
    EXPECT_EQ(s.param_count(), 42u * 64 + 64 + 64u * 64 + 64 + 3u * 64 + 3 + 64 + 1 + 3);
    const auto l = layout_of(kSmall);
    EXPECT_EQ(l.w1, 0u);
    EXPECT_EQ(l.total, kSmall.param_count());
    EXPECT_EQ(l.log_std + 3, l.total);
}

TEST(PolicyParams, InitializeIsSeeded) {
    const auto a = PolicyParams::initialize(NetworkShape{}, 3);
    const auto b = PolicyParams::initialize(NetworkShape{}, 3);
    const auto c = PolicyParams::initialize(NetworkShape{}, 4);
    EXPECT_TRUE(std::equal(a.flat().begin(), a.flat().end(), b.flat().begin()));
    EXPECT_FALSE(std::equal(a.flat().begin(), a.flat().end(), c.flat().begin()));
    for (double ls : a.log_std()) EXPECT_EQ(ls, 0.0);
    EXPECT_THROW(PolicyParams::from_flat(kSmall, std::vector<double>(3)), ContractError);
}

TEST(PolicyForward, ChecksInput) {
    const auto p = PolicyParams::initialize(kSmall, 1);
    const std::vector<double> wrong(4, 0.0);
    EXPECT_THROW(policy_forward(p, wrong), ContractError);
    std::vector<double> nan(5, 0.0);
    nan[2] = std::nan("");
    EXPECT_THROW(policy_forward(p, nan), ContractError);
}

TEST(Gaussian, LogProbAndEntropyClosedForm) {
    const std::vector<double> mean{0.0, 1.0};
    const std::vector<double> log_std{0.0, std::log(2.0)};
    const std::vector<double> a{1.0, 1.0};
    const double expected = -0.5 - std::log(2.0) - 2.0 * 0.5 * std::log(2.0 * M_PI);
    EXPECT_NEAR(gaussian_log_prob(mean, log_std, a), expected, 1e-14);
    EXPECT_NEAR(gaussian_entropy(log_std), 1.0 + std::log(2.0) + std::log(2.0 * M_PI), 1e-14);
}

TEST(Gae, MatchesBruteForceFiveSteps) {
    const std::vector<double> r{1.0, 0.5, -0.2, 0.3, 0.9};
    const std::vector<double> v{0.2, 0.1, 0.4, -0.3, 0.5};
    const std::vector<std::uint8_t> d{0, 0, 1, 0, 0};
    const double gamma = 0.9, lam = 0.8, boot = 0.7;
    const auto out = gae(r, v, d, boot, gamma, lam);
    for (int t = 0; t < 5; ++t) {
        double a = 0.0, discount = 1.0;
        for (int k = t; k < 5; ++k) {
            const double next_v = k + 1 < 5 ? v[static_cast<std::size_t>(k + 1)] : boot;
            const double live = d[static_cast<std::size_t>(k)] ? 0.0 : 1.0;
            const double delta = r[static_cast<std::size_t>(k)] + gamma * next_v * live - v[static_cast<std::size_t>(k)];
            a += discount * delta;
            if (!live) break;
            discount *= gamma * lam;
        }
        EXPECT_NEAR(out.advantages[static_cast<std::size_t>(t)], a, 1e-14) << t;
        EXPECT_NEAR(out.returns[static_cast<std::size_t>(t)], a + v[static_cast<std::size_t>(t)], 1e-14);
    }
}

TEST(Gae, LambdaOneGivesDiscountedReturn) {
    const std::vector<double> r{1.0, 2.0, 3.0};
    const std::vector<double> v{0.0, 0.0, 0.0};
    const std::vector<std::uint8_t> d{0, 0, 1};
    const auto out = gae(r, v, d, 0.0, 0.5, 1.0);
    EXPECT_DOUBLE_EQ(out.returns[0], 1.0 + 0.5 * 2.0 + 0.25 * 3.0);
    const std::vector<double> short_v{0.0};
    EXPECT_THROW(gae(r, short_v, d, 0.0, 0.5, 1.0), ContractError);
}

TEST(ClippedSurrogate, Examples) {
    EXPECT_DOUBLE_EQ(clipped_surrogate(2.0, 1.0, 0.2), 1.2);
    EXPECT_DOUBLE_EQ(clipped_surrogate(0.5, 1.0, 0.2), 0.5);
    EXPECT_DOUBLE_EQ(clipped_surrogate(0.5, -1.0, 0.2), -0.8);
    EXPECT_DOUBLE_EQ(clipped_surrogate(2.0, -1.0, 0.2), -2.0);
    for (double r = 0.8; r <= 1.2; r += 0.01) {
        for (double a : {-2.0, 0.3, 1.5}) EXPECT_DOUBLE_EQ(clipped_surrogate(r, a, 0.2), r * a);
    }
}

TEST(PpoLoss, AnalyticGradientMatchesFiniteDifference) {
    PpoConfig cfg;
    auto p = randomized(kSmall, 7);
    const auto batch = synthetic_batch(p, 24, 8);
    std::vector<std::size_t> idx(batch.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::vector<double> grad(p.flat().size());
    ppo_loss(p, batch, idx, cfg, grad);

    double worst = 0.0;
    const double h = 1e-6;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        auto q = p;
        q.flat()[i] += h;
        const double up = ppo_loss(q, batch, idx, cfg).total;
        q.flat()[i] -= 2.0 * h;
        const double down = ppo_loss(q, batch, idx, cfg).total;
        const double numeric = (up - down) / (2.0 * h);
        const double rel = std::abs(numeric - grad[i]) / std::max({std::abs(numeric), std::abs(grad[i]), 1e-6});
        worst = std::max(worst, rel);
    }
    EXPECT_LT(worst, 1e-4);
}

TEST(PpoLoss, ClipInactiveEqualsUnclipped) {
    PpoConfig cfg;
    cfg.entropy_coef = 0.0;
    cfg.value_coef = 0.0;
    const auto p = randomized(kSmall, 2);
    auto batch = synthetic_batch(p, 12, 3);
    // Old log-probs equal to new ones: ratio 1 everywhere.
    std::vector<std::size_t> idx(batch.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const auto obs = std::span<const double>(batch.observations).subspan(k * 5, 5);
        const auto out = policy_forward(p, obs);
        batch.log_probs[k] =
            gaussian_log_prob(out.mean, out.log_std, std::span<const double>(batch.actions).subspan(k * 3, 3));
    }
    const auto loss = ppo_loss(p, batch, idx, cfg);
    const double mean_adv = std::accumulate(batch.advantages.begin(), batch.advantages.end(), 0.0) / batch.size();
    EXPECT_NEAR(loss.surrogate, mean_adv, 1e-12);
    EXPECT_NEAR(loss.approx_kl, 0.0, 1e-12);
    EXPECT_EQ(loss.clip_fraction, 0.0);
}

TEST(PpoLoss, ContractChecks) {
    const auto p = PolicyParams::initialize(kSmall, 1);
    const auto batch = synthetic_batch(p, 4, 1);
    const std::vector<std::size_t> none;
    EXPECT_THROW(ppo_loss(p, batch, none, PpoConfig{}), ContractError);
    const std::vector<std::size_t> bad{9};
    EXPECT_THROW(ppo_loss(p, batch, bad, PpoConfig{}), ContractError);
    std::vector<double> small(3);
    const std::vector<std::size_t> one{0};
    EXPECT_THROW(ppo_loss(p, batch, one, PpoConfig{}, small), ContractError);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    AdamOptimizer opt(2, 0.1);
    std::vector<double> x{1.0, -1.0};
    const std::vector<double> g{3.0, -0.5};
    opt.step(x, g);
    EXPECT_NEAR(x[0], 0.9, 1e-7);
    EXPECT_NEAR(x[1], -0.9, 1e-7);
    EXPECT_EQ(opt.steps(), 1);
}

TEST(Adam, MinimizesQuadratic) {
    AdamOptimizer opt(1, 0.05);
    std::vector<double> x{5.0};
    for (int i = 0; i < 2000; ++i) {
        const std::vector<double> g{2.0 * (x[0] - 1.5)};
        opt.step(x, g);
    }
    EXPECT_NEAR(x[0], 1.5, 1e-3);
}

TEST(PpoUpdate, ReducesLossOnFixedBatch) {
    PpoConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.minibatch_size = 16;
    auto p = randomized(kSmall, 5);
    auto batch = synthetic_batch(p, 64, 6);
    auto norm = batch;
    norm.normalize_advantages();
    std::vector<std::size_t> idx(batch.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const double before = ppo_loss(p, norm, idx, cfg).total;
    AdamOptimizer opt(p.flat().size(), cfg.learning_rate);
    std::mt19937_64 rng(1);
    ppo_update(p, opt, batch, cfg, rng);
    EXPECT_LT(ppo_loss(p, norm, idx, cfg).total, before);
    EXPECT_TRUE(p.all_finite());
}

TEST(PpoUpdate, NonFiniteBatchDiverges) {
    auto p = PolicyParams::initialize(kSmall, 1);
    auto batch = synthetic_batch(p, 8, 2);
    batch.returns[0] = std::numeric_limits<double>::infinity();
    AdamOptimizer opt(p.flat().size(), 1e-3);
    std::mt19937_64 rng(1);
    EXPECT_THROW(ppo_update(p, opt, batch, PpoConfig{}, rng), DivergenceError);
}

TEST(PpoUpdate, LogStdStaysClamped) {
    PpoConfig cfg;
    cfg.learning_rate = 0.5;
    cfg.entropy_coef = 10.0;
    cfg.max_grad_norm = 0.0;
    auto p = PolicyParams::initialize(kSmall, 1);
    auto batch = synthetic_batch(p, 32, 2);
    AdamOptimizer opt(p.flat().size(), cfg.learning_rate);
    std::mt19937_64 rng(1);
    for (int i = 0; i < 5; ++i) ppo_update(p, opt, batch, cfg, rng);
    for (double ls : p.log_std()) {
        EXPECT_GE(ls, cfg.log_std_min);
        EXPECT_LE(ls, cfg.log_std_max);
    }
}

TEST(Batch, NormalizeAdvantages) {
    Batch b;
    b.advantages = {1.0, 2.0, 3.0, 4.0};
    b.normalize_advantages();
    const double mean = std::accumulate(b.advantages.begin(), b.advantages.end(), 0.0) / 4.0;
    double var = 0.0;
    for (double a : b.advantages) var += (a - mean) * (a - mean);
    EXPECT_NEAR(mean, 0.0, 1e-15);
    EXPECT_NEAR(var / 4.0, 1.0, 1e-12);
    Batch c;
    c.advantages = {2.0, 2.0};
    c.normalize_advantages();
    EXPECT_EQ(c.advantages, (std::vector<double>{0.0, 0.0}));
}

TEST(PpoConfig, ValidateAndHash) {
    PpoConfig c;
    EXPECT_NO_THROW(c.validate());
    c.clip = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    const PpoConfig a;
    PpoConfig b;
    EXPECT_EQ(config_hash(NetworkShape{}, a), config_hash(NetworkShape{}, b));
    b.learning_rate = 1e-3;
    EXPECT_NE(config_hash(NetworkShape{}, a), config_hash(NetworkShape{}, b));
    EXPECT_NE(config_hash(NetworkShape{}, a), config_hash(kSmall, a));
}

TEST(Checkpoint, RoundTripIsExactAndHashGuarded) {
    const auto dir = std::filesystem::temp_directory_path() / "prbslice_rl_ckpt";
    std::filesystem::create_directories(dir);
    const auto path = dir / "ck.txt";
    const auto p = randomized(kSmall, 11);
    save_checkpoint(path, p, 0xabcdef0123456789ULL);
    const auto q = load_checkpoint(path, 0xabcdef0123456789ULL);
    EXPECT_EQ(q.shape(), p.shape());
    EXPECT_TRUE(std::equal(p.flat().begin(), p.flat().end(), q.flat().begin()));
    EXPECT_THROW(load_checkpoint(path, 1), CheckpointMismatch);
    {
        std::ofstream out(dir / "bad.txt");
        out << "something else\n";
    }
    EXPECT_THROW(load_checkpoint(dir / "bad.txt", 1), ConfigError);
    EXPECT_THROW(load_checkpoint(dir / "missing.txt", 1), ConfigError);
}

}  // namespace
}  // namespace prbslice
