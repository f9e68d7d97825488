#include "prbslice/rl.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "prbslice/seeding.hpp"

namespace prbslice {

namespace {

using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMat>;
using MatMap = Eigen::Map<RowMat>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

struct Views {
    ConstMatMap w1, w2, wm, wv;
    ConstVecMap b1, b2, bm, ls;
    double bv;
};

Views views_of(const PolicyParams& p) {
    const auto& s = p.shape();
    const auto l = p.layout();
    const double* d = p.flat().data();
    return Views{ConstMatMap(d + l.w1, s.hidden1, s.obs_dim),
                 ConstMatMap(d + l.w2, s.hidden2, s.hidden1),
                 ConstMatMap(d + l.w_mean, s.act_dim, s.hidden2),
                 ConstMatMap(d + l.w_value, 1, s.hidden2),
                 ConstVecMap(d + l.b1, s.hidden1),
                 ConstVecMap(d + l.b2, s.hidden2),
                 ConstVecMap(d + l.b_mean, s.act_dim),
                 ConstVecMap(d + l.log_std, s.act_dim),
                 d[l.b_value]};
}

}  // namespace

std::size_t NetworkShape::param_count() const { return layout_of(*this).total; }

ParamLayout layout_of(const NetworkShape& s) {
    if (s.obs_dim <= 0 || s.hidden1 <= 0 || s.hidden2 <= 0 || s.act_dim <= 0) {
        throw ContractError("network dimensions must be positive");
    }
    const auto o = static_cast<std::size_t>(s.obs_dim);
    const auto h1 = static_cast<std::size_t>(s.hidden1);
    const auto h2 = static_cast<std::size_t>(s.hidden2);
    const auto a = static_cast<std::size_t>(s.act_dim);
    ParamLayout l{};
    std::size_t off = 0;
    l.w1 = off;
    off += h1 * o;
    l.b1 = off;
    off += h1;
    l.w2 = off;
    off += h2 * h1;
    l.b2 = off;
    off += h2;
    l.w_mean = off;
    off += a * h2;
    l.b_mean = off;
    off += a;
    l.w_value = off;
    off += h2;
    l.b_value = off;
    off += 1;
    l.log_std = off;
    off += a;
    l.total = off;
    return l;
}

PolicyParams PolicyParams::zeros(const NetworkShape& shape) {
    PolicyParams p;
    p.shape_ = shape;
    p.flat_.assign(shape.param_count(), 0.0);
    return p;
}

PolicyParams PolicyParams::initialize(const NetworkShape& shape, std::uint64_t seed) {
    PolicyParams p = zeros(shape);
    const auto l = p.layout();
    std::mt19937_64 rng(derive_seed(seed, {0x1417}));
    std::normal_distribution<double> n01(0.0, 1.0);
    auto fill = [&](std::size_t off, std::size_t count, double stddev) {
        for (std::size_t i = 0; i < count; ++i) p.flat_[off + i] = stddev * n01(rng);
    };
    const auto o = static_cast<std::size_t>(shape.obs_dim);
    const auto h1 = static_cast<std::size_t>(shape.hidden1);
    const auto h2 = static_cast<std::size_t>(shape.hidden2);
    const auto a = static_cast<std::size_t>(shape.act_dim);
    fill(l.w1, h1 * o, 1.0 / std::sqrt(double(o)));
    fill(l.w2, h2 * h1, 1.0 / std::sqrt(double(h1)));
    fill(l.w_mean, a * h2, 0.01 / std::sqrt(double(h2)));
    fill(l.w_value, h2, 1.0 / std::sqrt(double(h2)));
    return p;
}

PolicyParams PolicyParams::from_flat(const NetworkShape& shape, std::vector<double> flat) {
    if (flat.size() != shape.param_count()) throw ContractError("flat parameter vector has the wrong length");
    PolicyParams p;
    p.shape_ = shape;
    p.flat_ = std::move(flat);
    return p;
}

std::span<const double> PolicyParams::log_std() const {
    return std::span<const double>(flat_).subspan(layout().log_std, static_cast<std::size_t>(shape_.act_dim));
}

void PolicyParams::clamp_log_std(double lo, double hi) {
    const auto off = layout().log_std;
    for (int i = 0; i < shape_.act_dim; ++i) {
        auto& v = flat_[off + static_cast<std::size_t>(i)];
        v = std::clamp(v, lo, hi);
    }
}

bool PolicyParams::all_finite() const {
    return std::all_of(flat_.begin(), flat_.end(), [](double v) { return std::isfinite(v); });
}

PolicyOutput policy_forward(const PolicyParams& params, std::span<const double> obs) {
    const auto& s = params.shape();
    if (obs.size() != static_cast<std::size_t>(s.obs_dim)) {
        throw ContractError("observation length " + std::to_string(obs.size()) + " != " + std::to_string(s.obs_dim));
    }
    for (double v : obs) {
        if (!std::isfinite(v)) throw ContractError("observation contains a non-finite value");
    }
    const auto v = views_of(params);
    const ConstVecMap x(obs.data(), s.obs_dim);
    const Eigen::VectorXd h1 = (v.w1 * x + v.b1).array().tanh();
    const Eigen::VectorXd h2 = (v.w2 * h1 + v.b2).array().tanh();
    const Eigen::VectorXd mu = v.wm * h2 + v.bm;
    PolicyOutput out;
    out.mean.assign(mu.data(), mu.data() + mu.size());
    out.log_std.assign(v.ls.data(), v.ls.data() + v.ls.size());
    out.value = (v.wv * h2)(0, 0) + v.bv;
    return out;
}

double gaussian_log_prob(std::span<const double> mean, std::span<const double> log_std,
                         std::span<const double> action) {
    if (mean.size() != log_std.size() || mean.size() != action.size()) {
        throw ContractError("gaussian_log_prob: dimension mismatch");
    }
    double lp = 0.0;
    for (std::size_t i = 0; i < mean.size(); ++i) {
        const double z = (action[i] - mean[i]) * std::exp(-log_std[i]);
        lp += -0.5 * z * z - log_std[i] - kHalfLog2Pi;
    }
    return lp;
}

double gaussian_entropy(std::span<const double> log_std) {
    double h = 0.0;
    for (double ls : log_std) h += ls + 0.5 + kHalfLog2Pi;
    return h;
}

std::vector<double> sample_action(const PolicyOutput& out, std::mt19937_64& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    std::vector<double> a(out.mean.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = out.mean[i] + std::exp(out.log_std[i]) * n01(rng);
    return a;
}

GaeOutput gae(std::span<const double> rewards, std::span<const double> values, std::span<const std::uint8_t> dones,
              double bootstrap_value, double gamma, double lambda) {
    const std::size_t n = rewards.size();
    if (values.size() != n || dones.size() != n) throw ContractError("gae: rewards, values and dones must align");
    GaeOutput out;
    out.advantages.assign(n, 0.0);
    out.returns.assign(n, 0.0);
    double next_adv = 0.0;
    double next_value = bootstrap_value;
    for (std::size_t k = n; k-- > 0;) {
        const double live = dones[k] ? 0.0 : 1.0;
        const double delta = rewards[k] + gamma * next_value * live - values[k];
        next_adv = delta + gamma * lambda * live * next_adv;
        out.advantages[k] = next_adv;
        out.returns[k] = next_adv + values[k];
        next_value = values[k];
    }
    return out;
}

void Trajectory::validate(const NetworkShape& shape) const {
    const std::size_t n = size();
    if (observations.size() != n * static_cast<std::size_t>(shape.obs_dim) ||
        actions.size() != n * static_cast<std::size_t>(shape.act_dim) || log_probs.size() != n ||
        values.size() != n || dones.size() != n) {
        throw ContractError("trajectory arrays are not aligned");
    }
}

void PpoConfig::validate() const {
    if (!(clip > 0.0 && clip < 1.0)) throw ConfigError("PPO clip must lie in (0,1)");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("PPO gamma must lie in (0,1]");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("GAE lambda must lie in [0,1]");
    if (epochs < 1 || minibatch_size < 1 || episodes_per_rollout < 1) {
        throw ConfigError("PPO epochs, minibatch size and rollout episodes must be >= 1");
    }
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(entropy_coef >= 0.0 && value_coef >= 0.0 && max_grad_norm >= 0.0)) {
        throw ConfigError("PPO coefficients must be non-negative");
    }
    if (!(log_std_min < log_std_max)) throw ConfigError("log-std bounds must be ordered");
}

std::string PpoConfig::canonical() const {
    std::ostringstream os;
    os << std::setprecision(17) << "clip=" << clip << ";gamma=" << gamma << ";gae_lambda=" << gae_lambda
       << ";epochs=" << epochs << ";minibatch=" << minibatch_size << ";lr=" << learning_rate
       << ";entropy=" << entropy_coef << ";value=" << value_coef << ";max_grad_norm=" << max_grad_norm
       << ";episodes=" << episodes_per_rollout << ";beta1=" << adam_beta1 << ";beta2=" << adam_beta2
       << ";eps=" << adam_eps << ";log_std=[" << log_std_min << "," << log_std_max << "]";
    return os.str();
}

Batch Batch::from_trajectories(std::span<const Trajectory> trajectories, const NetworkShape& shape,
                               const PpoConfig& cfg) {
    Batch b;
    b.obs_dim = shape.obs_dim;
    b.act_dim = shape.act_dim;
    for (const auto& t : trajectories) {
        t.validate(shape);
        const auto g = gae(t.rewards, t.values, t.dones, t.bootstrap_value, cfg.gamma, cfg.gae_lambda);
        b.observations.insert(b.observations.end(), t.observations.begin(), t.observations.end());
        b.actions.insert(b.actions.end(), t.actions.begin(), t.actions.end());
        b.log_probs.insert(b.log_probs.end(), t.log_probs.begin(), t.log_probs.end());
        b.advantages.insert(b.advantages.end(), g.advantages.begin(), g.advantages.end());
        b.returns.insert(b.returns.end(), g.returns.begin(), g.returns.end());
    }
    return b;
}

void Batch::normalize_advantages() {
    if (advantages.empty()) return;
    const double n = static_cast<double>(advantages.size());
    const double mean = std::accumulate(advantages.begin(), advantages.end(), 0.0) / n;
    double var = 0.0;
    for (double a : advantages) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / n);
    for (double& a : advantages) a = sd < 1e-8 ? a - mean : (a - mean) / sd;
}

double clipped_surrogate(double ratio, double advantage, double clip) {
    return std::min(ratio * advantage, std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage);
}

LossBreakdown ppo_loss(const PolicyParams& params, const Batch& batch, std::span<const std::size_t> indices,
                       const PpoConfig& cfg, std::span<double> grad) {
    const auto& s = params.shape();
    if (batch.obs_dim != s.obs_dim || batch.act_dim != s.act_dim) throw ContractError("batch/network shape mismatch");
    if (indices.empty()) throw ContractError("ppo_loss needs at least one sample");
    if (!grad.empty() && grad.size() != params.flat().size()) throw ContractError("gradient buffer has the wrong size");

    const auto n = static_cast<Eigen::Index>(indices.size());
    const auto od = static_cast<std::size_t>(s.obs_dim);
    const auto ad = static_cast<std::size_t>(s.act_dim);
    Mat x(s.obs_dim, n);
    Mat act(s.act_dim, n);
    Eigen::RowVectorXd logp_old(n), adv(n), ret(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const std::size_t k = indices[static_cast<std::size_t>(j)];
        if (k >= batch.size()) throw ContractError("sample index out of range");
        x.col(j) = ConstVecMap(batch.observations.data() + k * od, s.obs_dim);
        act.col(j) = ConstVecMap(batch.actions.data() + k * ad, s.act_dim);
        logp_old(j) = batch.log_probs[k];
        adv(j) = batch.advantages[k];
        ret(j) = batch.returns[k];
    }

    const auto v = views_of(params);
    const Mat h1 = ((v.w1 * x).colwise() + v.b1).array().tanh();
    const Mat h2 = ((v.w2 * h1).colwise() + v.b2).array().tanh();
    const Mat mu = (v.wm * h2).colwise() + v.bm;
    const Eigen::RowVectorXd value = (v.wv * h2).array() + v.bv;

    const Eigen::VectorXd inv_var = (-2.0 * v.ls.array()).exp();
    const Mat diff = act - mu;
    const Mat z2 = diff.array().square().colwise() * inv_var.array();
    const double log_norm = v.ls.sum() + static_cast<double>(s.act_dim) * kHalfLog2Pi;
    const Eigen::RowVectorXd logp = (-0.5 * z2.colwise().sum()).array() - log_norm;
    const Eigen::RowVectorXd ratio = (logp - logp_old).array().exp();

    LossBreakdown out;
    Eigen::RowVectorXd dsurr_dlogp(n);
    double surr = 0.0;
    int clipped = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double r = ratio(j);
        const double a = adv(j);
        const double unclipped = r * a;
        const double clipped_term = std::clamp(r, 1.0 - cfg.clip, 1.0 + cfg.clip) * a;
        surr += std::min(unclipped, clipped_term);
        dsurr_dlogp(j) = unclipped <= clipped_term ? unclipped : 0.0;
        if (std::abs(r - 1.0) > cfg.clip) ++clipped;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    out.surrogate = surr * inv_n;
    out.value_loss = 0.5 * (value - ret).array().square().sum() * inv_n;
    out.entropy = gaussian_entropy(std::span<const double>(v.ls.data(), ad));
    out.total = -out.surrogate + cfg.value_coef * out.value_loss - cfg.entropy_coef * out.entropy;
    out.approx_kl = (logp_old - logp).sum() * inv_n;
    out.clip_fraction = clipped * inv_n;

    if (grad.empty()) return out;

    // d total / d logp_j = -dsurr_dlogp_j / n
    const Eigen::RowVectorXd g_logp = -dsurr_dlogp * inv_n;
    // d logp / d mu = (a - mu) / sigma^2 ; d logp / d log_std = z^2 - 1
    const Mat d_mu = (diff.array().colwise() * inv_var.array()).rowwise() * g_logp.array();
    const Eigen::VectorXd d_ls =
        ((z2.array() - 1.0).rowwise() * g_logp.array()).rowwise().sum().matrix() -
        Eigen::VectorXd::Constant(s.act_dim, cfg.entropy_coef);
    const Eigen::RowVectorXd d_v = cfg.value_coef * (value - ret) * inv_n;

    const auto l = params.layout();
    double* g = grad.data();
    std::fill(grad.begin(), grad.end(), 0.0);
    MatMap(g + l.w_mean, s.act_dim, s.hidden2) = d_mu * h2.transpose();
    VecMap(g + l.b_mean, s.act_dim) = d_mu.rowwise().sum();
    MatMap(g + l.w_value, 1, s.hidden2) = d_v * h2.transpose();
    g[l.b_value] = d_v.sum();
    VecMap(g + l.log_std, s.act_dim) = d_ls;

    const Mat d_h2 = v.wm.transpose() * d_mu + v.wv.transpose() * d_v;
    const Mat d_z2 = d_h2.array() * (1.0 - h2.array().square());
    MatMap(g + l.w2, s.hidden2, s.hidden1) = d_z2 * h1.transpose();
    VecMap(g + l.b2, s.hidden2) = d_z2.rowwise().sum();
    const Mat d_h1 = v.w2.transpose() * d_z2;
    const Mat d_z1 = d_h1.array() * (1.0 - h1.array().square());
    MatMap(g + l.w1, s.hidden1, s.obs_dim) = d_z1 * x.transpose();
    VecMap(g + l.b1, s.hidden1) = d_z1.rowwise().sum();
    return out;
}

AdamOptimizer::AdamOptimizer(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void AdamOptimizer::step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) throw ContractError("Adam: size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
        params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
}

UpdateStats ppo_update(PolicyParams& params, AdamOptimizer& opt, Batch batch, const PpoConfig& cfg,
                       std::mt19937_64& rng) {
    cfg.validate();
    if (batch.size() == 0) throw ContractError("ppo_update needs a non-empty batch");
    batch.normalize_advantages();

    std::vector<std::size_t> order(batch.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> grad(params.flat().size());
    UpdateStats stats;
    const auto mb = static_cast<std::size_t>(cfg.minibatch_size);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += mb) {
            const std::size_t len = std::min(mb, order.size() - start);
            const auto loss = ppo_loss(params, batch, std::span<const std::size_t>(order).subspan(start, len), cfg, grad);
            if (!std::isfinite(loss.total)) {
                throw DivergenceError("non-finite PPO loss (surrogate " + std::to_string(loss.surrogate) +
                                      ", value " + std::to_string(loss.value_loss) + ") at epoch " +
                                      std::to_string(epoch));
            }
            if (cfg.max_grad_norm > 0.0) {
                double sq = 0.0;
                for (double g : grad) sq += g * g;
                const double norm = std::sqrt(sq);
                if (norm > cfg.max_grad_norm) {
                    for (double& g : grad) g *= cfg.max_grad_norm / norm;
                }
            }
            opt.step(params.flat(), grad);
            params.clamp_log_std(cfg.log_std_min, cfg.log_std_max);
            if (!params.all_finite()) throw DivergenceError("non-finite policy parameters after update");

            auto& m = stats.mean_loss;
            m.total += loss.total;
            m.surrogate += loss.surrogate;
            m.value_loss += loss.value_loss;
            m.entropy += loss.entropy;
            m.approx_kl += loss.approx_kl;
            m.clip_fraction += loss.clip_fraction;
            ++stats.minibatches;
        }
    }
    const double k = 1.0 / stats.minibatches;
    auto& m = stats.mean_loss;
    m.total *= k;
    m.surrogate *= k;
    m.value_loss *= k;
    m.entropy *= k;
    m.approx_kl *= k;
    m.clip_fraction *= k;
    return stats;
}

std::uint64_t config_hash(const NetworkShape& shape, const PpoConfig& cfg) {
    Fnv1a h;
    std::ostringstream os;
    os << "shape=" << shape.obs_dim << "x" << shape.hidden1 << "x" << shape.hidden2 << "x" << shape.act_dim << ";"
       << cfg.canonical();
    h.update(os.str());
    return h.digest();
}

namespace {
constexpr const char* kCheckpointMagic = "prbslice-checkpoint";
constexpr int kCheckpointVersion = 1;
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params, std::uint64_t hash) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write checkpoint " + path.string());
    const auto& s = params.shape();
    out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
    out << "config_hash " << std::hex << std::setw(16) << std::setfill('0') << hash << std::dec << '\n';
    out << "shape " << s.obs_dim << ' ' << s.hidden1 << ' ' << s.hidden2 << ' ' << s.act_dim << '\n';
    out << "params " << params.flat().size() << '\n';
    out << std::hexfloat;
    for (double v : params.flat()) out << v << '\n';
    if (!out) throw ConfigError("failed writing checkpoint " + path.string());
}

PolicyParams load_checkpoint(const std::filesystem::path& path, std::uint64_t expected_hash) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open checkpoint " + path.string());
    std::string magic, key;
    int version = 0;
    in >> magic >> version;
    if (magic != kCheckpointMagic || version != kCheckpointVersion) {
        throw ConfigError("unsupported checkpoint format in " + path.string());
    }
    std::uint64_t hash = 0;
    in >> key >> std::hex >> hash >> std::dec;
    if (key != "config_hash") throw ConfigError("checkpoint missing config_hash");
    if (hash != expected_hash) {
        std::ostringstream os;
        os << "checkpoint config hash " << std::hex << hash << " does not match expected " << expected_hash;
        throw CheckpointMismatch(os.str());
    }
    NetworkShape s;
    in >> key >> s.obs_dim >> s.hidden1 >> s.hidden2 >> s.act_dim;
    if (key != "shape") throw ConfigError("checkpoint missing shape");
    std::size_t count = 0;
    in >> key >> count;
    if (key != "params" || count != s.param_count()) throw ConfigError("checkpoint parameter count mismatch");
    std::vector<double> flat(count);
    // operator>> with hexfloat is unreliable in libstdc++, so parse with strtod.
    std::string tok;
    for (auto& v : flat) {
        if (!(in >> tok)) throw ConfigError("truncated checkpoint " + path.string());
        char* end = nullptr;
        v = std::strtod(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size()) throw ConfigError("bad parameter value in checkpoint");
    }
    return PolicyParams::from_flat(s, std::move(flat));
}

}  // namespace prbslice
