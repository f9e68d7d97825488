#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace prbslice {

enum class Modulation { QPSK, QAM16, QAM64 };

std::string_view to_string(Modulation m);
Modulation parse_modulation(std::string_view name);
int bits_per_symbol(Modulation m);

inline constexpr int kMinMcs = 6;
inline constexpr int kMaxMcs = 28;
inline constexpr int kNumMcs = kMaxMcs - kMinMcs + 1;

/// One row of the NR PDSCH MCS table (64-QAM table). Code rate is kept as
/// the standard's integer numerator over 1024.
struct McsEntry {
    int index = 0;
    Modulation modulation = Modulation::QPSK;
    int qm = 2;
    int code_rate_x1024 = 0;

    double code_rate() const { return code_rate_x1024 / 1024.0; }
    double spectral_efficiency() const { return qm * code_rate(); }
};

/// MCS table indexed 0..28. Only rows kMinMcs..kMaxMcs are reachable through
/// mcs_params(); the full table is kept so the file round-trips.
class McsTable {
public:
    static McsTable parse_csv(std::istream& in);
    static McsTable load(const std::filesystem::path& path);

    /// Table compiled into the library from core/data/mcs_table_64qam.csv.
    static const McsTable& bundled();

    const McsEntry& row(int index) const;
    std::span<const McsEntry> rows() const { return rows_; }

private:
    explicit McsTable(std::vector<McsEntry> rows);
    std::vector<McsEntry> rows_;
};

/// Throws DomainError unless kMinMcs <= index <= kMaxMcs.
McsEntry mcs_params(int index);
McsEntry mcs_params(int index, const McsTable& table);

/// TDD slot pattern over one period. Symbols not counted as DL in the mixed
/// slot are UL or guard.
struct TddPattern {
    int dl_slots = 7;
    int ul_slots = 2;
    int mixed_slots = 1;
    int mixed_dl_symbols = 6;

    int period_slots() const { return dl_slots + ul_slots + mixed_slots; }
};

struct RadioConfig {
    int prb_total = 106;
    int sc_per_prb = 12;
    int symbols_per_slot = 14;
    int slots_per_sec = 2000;
    TddPattern tdd{};
    double overhead = 0.14;
    int n_layers = 1;
    double noise_floor_db = -80.0;
    double carrier_mhz = 3600.0;
    double gain_term_db = 83.84;
    double prx_min_db = -23.0;
    double prx_max_db = -7.0;

    /// Throws ConfigError when an invariant does not hold.
    void validate() const;
};

/// Fraction of symbols in one TDD period carrying downlink.
double duty_cycle(const TddPattern& tdd, int symbols_per_slot);
double duty_cycle(const RadioConfig& cfg);

struct LinkBudgetQuery {
    double distance_km = 1.0;
    double ptx_gains_db = 83.84;  // P_tx + G_tx + G_rx
};

LinkBudgetQuery query_at(double distance_km, const RadioConfig& cfg);

struct ReceivedPower {
    double raw_db = 0.0;
    double clipped_db = 0.0;

    bool was_clipped() const { return raw_db != clipped_db; }
};

/// Free-space loss in dB for a distance in km and a carrier in MHz.
double free_space_loss_db(double distance_km, double carrier_mhz);

/// Link budget minus free-space loss, clamped into [prx_min_db, prx_max_db].
ReceivedPower received_power(const LinkBudgetQuery& q, const RadioConfig& cfg);

/// Distance (km) at which the unclipped received power equals prx_db.
double distance_for_power_km(double prx_db, double ptx_gains_db, double carrier_mhz);

}  // namespace prbslice
