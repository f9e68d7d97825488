#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "prbslice/phy.hpp"

namespace prbslice {

/// Probability vector over MCS kMinMcs..kMaxMcs.
using McsDistribution = std::array<double, kNumMcs>;

/// Empirical or synthetic P(mcs | P_rx) on a strictly increasing P_rx grid.
class McsProfile {
public:
    McsProfile() = default;
    McsProfile(std::vector<double> prx_grid, std::vector<McsDistribution> dist);

    /// CSV with header `prx_db,mcs,probability`, rows grouped by prx.
    /// MCS indices absent from a group have probability 0.
    static McsProfile parse_csv(std::istream& in);
    static McsProfile load(const std::filesystem::path& path);
    void write_csv(std::ostream& out) const;

    bool empty() const { return grid_.empty(); }
    std::size_t size() const { return grid_.size(); }
    std::span<const double> grid() const { return grid_; }
    const McsDistribution& row(std::size_t i) const { return dist_.at(i); }

    /// Row at the grid point nearest to prx_db (ties go to the lower point).
    const McsDistribution& nearest(double prx_db) const;

private:
    std::vector<double> grid_;
    std::vector<McsDistribution> dist_;
};

/// Full-allocation application throughput T(P_rx) at 106 PRBs.
class ThroughputTrace {
public:
    ThroughputTrace() = default;
    /// Non-monotone traces are accepted with a logged warning.
    ThroughputTrace(std::vector<double> prx_grid, std::vector<double> mbps_at_full);

    /// CSV with header `prx_db,mbps_full_allocation`.
    static ThroughputTrace parse_csv(std::istream& in);
    static ThroughputTrace load(const std::filesystem::path& path);
    void write_csv(std::ostream& out) const;

    bool empty() const { return grid_.empty(); }
    bool monotone() const { return monotone_; }
    std::span<const double> grid() const { return grid_; }
    std::span<const double> mbps() const { return mbps_; }

    /// Linear interpolation clamped to the grid edges.
    double at(double prx_db) const;

private:
    std::vector<double> grid_;
    std::vector<double> mbps_;
    bool monotone_ = true;
};

/// Per-MCS block error rate used by the theoretical estimator.
class BlerTable {
public:
    explicit BlerTable(double uniform = 0.1);

    /// CSV with header `mcs,bler`; unlisted MCS keep `fallback`.
    static BlerTable parse_csv(std::istream& in, double fallback = 0.1);
    static BlerTable load(const std::filesystem::path& path, double fallback = 0.1);
    void write_csv(std::ostream& out) const;

    double at(int mcs) const;
    void set(int mcs, double bler);

private:
    std::array<double, kNumMcs> bler_{};
};

class HybridWeight {
public:
    explicit HybridWeight(double lambda = 0.5);
    double lambda() const { return lambda_; }

private:
    double lambda_;
};

/// Literal: (prbs/106) times the per-PRB resource count, as written.
/// GridScaled: additionally multiplied by prb_total (sensitivity studies only).
enum class ScalingMode { Literal, GridScaled };

ScalingMode parse_scaling_mode(std::string_view name);
std::string_view to_string(ScalingMode mode);

/// Throughput in Mbps for one MCS:
/// (prbs/106) N_sc N_symb N_slots Q_m R_m N_layers eta_DL (1-eta_OH) (1-BLER).
double t_mcs(int prbs, int mcs, double bler, const RadioConfig& cfg, ScalingMode mode = ScalingMode::Literal,
             const McsTable& table = McsTable::bundled());

/// Sum over MCS of P(mcs | prx) t_mcs(prbs, mcs, bler(mcs)), nearest-grid lookup.
double theoretical_throughput(double prx_db, int prbs, const McsProfile& profile, const BlerTable& bler,
                              const RadioConfig& cfg, ScalingMode mode = ScalingMode::Literal);

/// Interpolated full-allocation throughput scaled by prbs/106.
double practical_throughput(double prx_db, int prbs, const ThroughputTrace& trace, const RadioConfig& cfg);

/// lambda * practical + (1 - lambda) * theoretical.
double hybrid_throughput(double prx_db, int prbs, const ThroughputTrace& trace, const McsProfile& profile,
                         const BlerTable& bler, HybridWeight w, const RadioConfig& cfg,
                         ScalingMode mode = ScalingMode::Literal);

struct ProfileParams {
    double slope = 22.0 / 16.0;        // MCS steps per dB
    std::optional<double> anchor_db;   // P_rx where the mean MCS is 6; prx_min when empty
    double spread = 1.5;               // std of the discretized Gaussian, in MCS steps
    double grid_step_db = 1.0;
};

/// Mean MCS clamp(6 + slope (prx - anchor), 6, 28), Gaussian spread over the
/// MCS indices, one row per grid point from prx_min to prx_max.
McsProfile synthesize_profile(const ProfileParams& params, const RadioConfig& cfg);

/// Trace built as efficiency * theoretical_throughput(prx, 106) on the profile grid.
ThroughputTrace synthesize_trace(const McsProfile& profile, const BlerTable& bler, const RadioConfig& cfg,
                                 double efficiency = 0.85, ScalingMode mode = ScalingMode::Literal);

enum class OracleKind { Practical, Theoretical, Hybrid };

OracleKind parse_oracle_kind(std::string_view name);
std::string_view to_string(OracleKind kind);

/// Immutable estimator inputs shared by every oracle instance.
struct OracleSources {
    RadioConfig radio{};
    McsProfile profile;
    ThroughputTrace trace;
    BlerTable bler{};
    ScalingMode scaling = ScalingMode::Literal;

    /// Synthetic profile, 0.1 BLER and the 0.85-efficiency trace.
    static OracleSources defaults();
};

/// One selected estimator bound to its sources; cheap to copy.
class ThroughputOracle {
public:
    ThroughputOracle(OracleKind kind, std::shared_ptr<const OracleSources> sources, HybridWeight w = HybridWeight{});

    double operator()(double prx_db, int prbs) const;

    OracleKind kind() const { return kind_; }
    HybridWeight weight() const { return weight_; }
    const OracleSources& sources() const { return *sources_; }
    std::shared_ptr<const OracleSources> shared_sources() const { return sources_; }

private:
    OracleKind kind_;
    std::shared_ptr<const OracleSources> sources_;
    HybridWeight weight_;
};

}  // namespace prbslice
