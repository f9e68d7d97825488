#include "prbslice/oracle.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include "csv_util.hpp"
#include "prbslice/error.hpp"

namespace prbslice {

namespace {

constexpr double kSimplexTol = 1e-9;

void require_increasing(std::span<const double> grid, std::string_view what) {
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) throw ConfigError(std::string(what) + ": grid must be strictly increasing");
    }
    for (double g : grid) {
        if (!std::isfinite(g)) throw ConfigError(std::string(what) + ": grid values must be finite");
    }
}

void check_prbs(int prbs, const RadioConfig& cfg) {
    if (prbs < 0 || prbs > cfg.prb_total) {
        throw DomainError("prbs must lie in [0, " + std::to_string(cfg.prb_total) + "], got " + std::to_string(prbs));
    }
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

// ---------------------------------------------------------------- McsProfile

McsProfile::McsProfile(std::vector<double> prx_grid, std::vector<McsDistribution> dist)
    : grid_(std::move(prx_grid)), dist_(std::move(dist)) {
    if (grid_.size() != dist_.size()) throw ConfigError("MCS profile: grid and distribution sizes differ");
    require_increasing(grid_, "MCS profile");
    for (std::size_t i = 0; i < dist_.size(); ++i) {
        double sum = 0.0;
        for (double p : dist_[i]) {
            if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError("MCS profile: negative or non-finite probability");
            sum += p;
        }
        if (std::abs(sum - 1.0) > kSimplexTol) {
            throw ConfigError("MCS profile: probabilities at prx " + std::to_string(grid_[i]) + " sum to " +
                              std::to_string(sum));
        }
    }
}

McsProfile McsProfile::parse_csv(std::istream& in) {
    auto csv = detail::read_csv(in, {"prx_db", "mcs", "probability"}, "MCS profile");
    std::vector<double> grid;
    std::vector<McsDistribution> dist;
    std::vector<bool> seen;
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
        const auto& f = csv.rows[i];
        const int line = csv.line_numbers[i];
        const double prx = detail::parse_number<double>(f[0], "MCS profile", line);
        const int mcs = detail::parse_number<int>(f[1], "MCS profile", line);
        const double p = detail::parse_number<double>(f[2], "MCS profile", line);
        if (mcs < kMinMcs || mcs > kMaxMcs) {
            throw ConfigError("MCS profile: mcs " + std::to_string(mcs) + " outside 6-28 at line " +
                              std::to_string(line));
        }
        if (grid.empty() || prx != grid.back()) {
            if (!grid.empty() && prx < grid.back()) {
                throw ConfigError("MCS profile: rows must be grouped by increasing prx (line " + std::to_string(line) +
                                  ")");
            }
            grid.push_back(prx);
            dist.push_back(McsDistribution{});
            seen.assign(kNumMcs, false);
        }
        const auto slot = static_cast<std::size_t>(mcs - kMinMcs);
        if (seen[slot]) throw ConfigError("MCS profile: duplicate mcs at line " + std::to_string(line));
        seen[slot] = true;
        dist.back()[slot] = p;
    }
    return McsProfile(std::move(grid), std::move(dist));
}

McsProfile McsProfile::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open MCS profile " + path.string());
    return parse_csv(in);
}

void McsProfile::write_csv(std::ostream& out) const {
    detail::write_schema(out, "mcs_profile");
    out << "prx_db,mcs,probability\n";
    out.precision(17);
    for (std::size_t i = 0; i < grid_.size(); ++i) {
        for (int m = kMinMcs; m <= kMaxMcs; ++m) {
            const double p = dist_[i][static_cast<std::size_t>(m - kMinMcs)];
            if (p > 0.0) out << grid_[i] << ',' << m << ',' << p << '\n';
        }
    }
}

const McsDistribution& McsProfile::nearest(double prx_db) const {
    if (grid_.empty()) throw ConfigError("MCS profile is empty");
    auto it = std::lower_bound(grid_.begin(), grid_.end(), prx_db);
    if (it == grid_.begin()) return dist_.front();
    if (it == grid_.end()) return dist_.back();
    const auto hi = static_cast<std::size_t>(it - grid_.begin());
    const auto lo = hi - 1;
    return (prx_db - grid_[lo]) <= (grid_[hi] - prx_db) ? dist_[lo] : dist_[hi];
}

// ----------------------------------------------------------- ThroughputTrace

ThroughputTrace::ThroughputTrace(std::vector<double> prx_grid, std::vector<double> mbps_at_full)
    : grid_(std::move(prx_grid)), mbps_(std::move(mbps_at_full)) {
    if (grid_.size() != mbps_.size()) throw ConfigError("throughput trace: grid and value sizes differ");
    require_increasing(grid_, "throughput trace");
    for (double v : mbps_) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("throughput trace: values must be finite and >= 0");
    }
    for (std::size_t i = 1; i < mbps_.size(); ++i) {
        if (mbps_[i] < mbps_[i - 1]) {
            monotone_ = false;
            spdlog::warn("throughput trace decreases between {} dB and {} dB ({} -> {} Mbps); using raw values",
                         grid_[i - 1], grid_[i], mbps_[i - 1], mbps_[i]);
        }
    }
}

ThroughputTrace ThroughputTrace::parse_csv(std::istream& in) {
    auto csv = detail::read_csv(in, {"prx_db", "mbps_full_allocation"}, "throughput trace");
    std::vector<double> grid;
    std::vector<double> mbps;
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
        grid.push_back(detail::parse_number<double>(csv.rows[i][0], "throughput trace", csv.line_numbers[i]));
        mbps.push_back(detail::parse_number<double>(csv.rows[i][1], "throughput trace", csv.line_numbers[i]));
    }
    return ThroughputTrace(std::move(grid), std::move(mbps));
}

ThroughputTrace ThroughputTrace::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open throughput trace " + path.string());
    return parse_csv(in);
}

void ThroughputTrace::write_csv(std::ostream& out) const {
    detail::write_schema(out, "throughput_trace");
    out << "prx_db,mbps_full_allocation\n";
    out.precision(17);
    for (std::size_t i = 0; i < grid_.size(); ++i) out << grid_[i] << ',' << mbps_[i] << '\n';
}

double ThroughputTrace::at(double prx_db) const {
    if (grid_.empty()) throw ConfigError("throughput trace is empty");
    if (prx_db <= grid_.front()) return mbps_.front();
    if (prx_db >= grid_.back()) return mbps_.back();
    auto it = std::upper_bound(grid_.begin(), grid_.end(), prx_db);
    const auto hi = static_cast<std::size_t>(it - grid_.begin());
    const auto lo = hi - 1;
    if (prx_db == grid_[lo]) return mbps_[lo];
    const double t = (prx_db - grid_[lo]) / (grid_[hi] - grid_[lo]);
    return mbps_[lo] + t * (mbps_[hi] - mbps_[lo]);
}

// ----------------------------------------------------------------- BlerTable

BlerTable::BlerTable(double uniform) {
    if (!(uniform >= 0.0 && uniform <= 1.0)) throw DomainError("BLER must lie in [0,1]");
    bler_.fill(uniform);
}

BlerTable BlerTable::parse_csv(std::istream& in, double fallback) {
    auto csv = detail::read_csv(in, {"mcs", "bler"}, "BLER table");
    BlerTable table(fallback);
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
        const int mcs = detail::parse_number<int>(csv.rows[i][0], "BLER table", csv.line_numbers[i]);
        const double b = detail::parse_number<double>(csv.rows[i][1], "BLER table", csv.line_numbers[i]);
        if (mcs < kMinMcs || mcs > kMaxMcs || !(b >= 0.0 && b <= 1.0)) {
            throw ConfigError("BLER table: invalid row at line " + std::to_string(csv.line_numbers[i]));
        }
        table.set(mcs, b);
    }
    return table;
}

BlerTable BlerTable::load(const std::filesystem::path& path, double fallback) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open BLER table " + path.string());
    return parse_csv(in, fallback);
}

void BlerTable::write_csv(std::ostream& out) const {
    detail::write_schema(out, "bler_table");
    out << "mcs,bler\n";
    out.precision(17);
    for (int m = kMinMcs; m <= kMaxMcs; ++m) out << m << ',' << at(m) << '\n';
}

double BlerTable::at(int mcs) const {
    if (mcs < kMinMcs || mcs > kMaxMcs) throw DomainError("BLER lookup: MCS outside 6-28");
    return bler_[static_cast<std::size_t>(mcs - kMinMcs)];
}

void BlerTable::set(int mcs, double bler) {
    if (mcs < kMinMcs || mcs > kMaxMcs) throw DomainError("BLER table: MCS outside 6-28");
    if (!(bler >= 0.0 && bler <= 1.0)) throw DomainError("BLER must lie in [0,1]");
    bler_[static_cast<std::size_t>(mcs - kMinMcs)] = bler;
}

HybridWeight::HybridWeight(double lambda) : lambda_(lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("hybrid weight lambda must lie in [0,1]");
}

ScalingMode parse_scaling_mode(std::string_view name) {
    if (name == "literal") return ScalingMode::Literal;
    if (name == "grid_scaled") return ScalingMode::GridScaled;
    throw ConfigError("unknown scaling mode '" + std::string(name) + "' (literal|grid_scaled)");
}

std::string_view to_string(ScalingMode mode) { return mode == ScalingMode::Literal ? "literal" : "grid_scaled"; }

// ---------------------------------------------------------------- estimators

double t_mcs(int prbs, int mcs, double bler, const RadioConfig& cfg, ScalingMode mode, const McsTable& table) {
    check_prbs(prbs, cfg);
    if (!(bler >= 0.0 && bler <= 1.0)) throw DomainError("BLER must lie in [0,1]");
    const McsEntry e = mcs_params(mcs, table);
    double bps = (static_cast<double>(prbs) / cfg.prb_total) * cfg.sc_per_prb * cfg.symbols_per_slot *
                 cfg.slots_per_sec * e.qm * e.code_rate() * cfg.n_layers * duty_cycle(cfg) * (1.0 - cfg.overhead) *
                 (1.0 - bler);
    if (mode == ScalingMode::GridScaled) bps *= cfg.prb_total;
    return bps / 1e6;
}

double theoretical_throughput(double prx_db, int prbs, const McsProfile& profile, const BlerTable& bler,
                              const RadioConfig& cfg, ScalingMode mode) {
    if (profile.empty()) throw ConfigError("theoretical throughput: MCS profile is empty");
    check_prbs(prbs, cfg);
    const auto& row = profile.nearest(prx_db);
    double sum = 0.0;
    for (int m = kMinMcs; m <= kMaxMcs; ++m) {
        const double p = row[static_cast<std::size_t>(m - kMinMcs)];
        if (p > 0.0) sum += p * t_mcs(prbs, m, bler.at(m), cfg, mode);
    }
    return sum;
}

double practical_throughput(double prx_db, int prbs, const ThroughputTrace& trace, const RadioConfig& cfg) {
    if (trace.empty()) throw ConfigError("practical throughput: trace is empty");
    check_prbs(prbs, cfg);
    return trace.at(prx_db) * (static_cast<double>(prbs) / cfg.prb_total);
}

double hybrid_throughput(double prx_db, int prbs, const ThroughputTrace& trace, const McsProfile& profile,
                         const BlerTable& bler, HybridWeight w, const RadioConfig& cfg, ScalingMode mode) {
    const double practical = practical_throughput(prx_db, prbs, trace, cfg);
    const double theoretical = theoretical_throughput(prx_db, prbs, profile, bler, cfg, mode);
    return w.lambda() * practical + (1.0 - w.lambda()) * theoretical;
}

McsProfile synthesize_profile(const ProfileParams& params, const RadioConfig& cfg) {
    if (!(params.spread > 0.0)) throw DomainError("profile spread must be positive");
    if (!(params.grid_step_db > 0.0)) throw DomainError("profile grid step must be positive");
    const double anchor = params.anchor_db.value_or(cfg.prx_min_db);
    const auto points =
        static_cast<std::size_t>(std::floor((cfg.prx_max_db - cfg.prx_min_db) / params.grid_step_db + 1e-9)) + 1;

    std::vector<double> grid;
    std::vector<McsDistribution> dist;
    grid.reserve(points);
    dist.reserve(points);
    constexpr double inf = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points; ++i) {
        const double prx = cfg.prx_min_db + static_cast<double>(i) * params.grid_step_db;
        const double mean = std::clamp(kMinMcs + params.slope * (prx - anchor), double(kMinMcs), double(kMaxMcs));
        McsDistribution row{};
        double total = 0.0;
        for (int m = kMinMcs; m <= kMaxMcs; ++m) {
            const double lo = m == kMinMcs ? -inf : (m - 0.5 - mean) / params.spread;
            const double hi = m == kMaxMcs ? inf : (m + 0.5 - mean) / params.spread;
            const double p = normal_cdf(hi) - normal_cdf(lo);
            row[static_cast<std::size_t>(m - kMinMcs)] = p;
            total += p;
        }
        for (double& p : row) p /= total;
        grid.push_back(prx);
        dist.push_back(row);
    }
    return McsProfile(std::move(grid), std::move(dist));
}

ThroughputTrace synthesize_trace(const McsProfile& profile, const BlerTable& bler, const RadioConfig& cfg,
                                 double efficiency, ScalingMode mode) {
    if (!(efficiency >= 0.0)) throw DomainError("trace efficiency must be >= 0");
    std::vector<double> grid(profile.grid().begin(), profile.grid().end());
    std::vector<double> mbps;
    mbps.reserve(grid.size());
    for (double prx : grid) {
        mbps.push_back(efficiency * theoretical_throughput(prx, cfg.prb_total, profile, bler, cfg, mode));
    }
    return ThroughputTrace(std::move(grid), std::move(mbps));
}

OracleKind parse_oracle_kind(std::string_view name) {
    if (name == "practical") return OracleKind::Practical;
    if (name == "theoretical" || name == "simulated") return OracleKind::Theoretical;
    if (name == "hybrid") return OracleKind::Hybrid;
    throw ConfigError("unknown oracle '" + std::string(name) + "' (practical|theoretical|hybrid)");
}

std::string_view to_string(OracleKind kind) {
    switch (kind) {
        case OracleKind::Practical:
            return "practical";
        case OracleKind::Theoretical:
            return "theoretical";
        case OracleKind::Hybrid:
            return "hybrid";
    }
    return "?";
}

OracleSources OracleSources::defaults() {
    OracleSources s;
    s.profile = synthesize_profile(ProfileParams{}, s.radio);
    s.trace = synthesize_trace(s.profile, s.bler, s.radio);
    return s;
}

ThroughputOracle::ThroughputOracle(OracleKind kind, std::shared_ptr<const OracleSources> sources, HybridWeight w)
    : kind_(kind), sources_(std::move(sources)), weight_(w) {
    if (!sources_) throw ConfigError("throughput oracle needs sources");
}

double ThroughputOracle::operator()(double prx_db, int prbs) const {
    const auto& s = *sources_;
    switch (kind_) {
        case OracleKind::Practical:
            return practical_throughput(prx_db, prbs, s.trace, s.radio);
        case OracleKind::Theoretical:
            return theoretical_throughput(prx_db, prbs, s.profile, s.bler, s.radio, s.scaling);
        case OracleKind::Hybrid:
            return hybrid_throughput(prx_db, prbs, s.trace, s.profile, s.bler, weight_, s.radio, s.scaling);
    }
    return 0.0;
}

}  // namespace prbslice
