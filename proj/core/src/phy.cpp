#include "prbslice/phy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "csv_util.hpp"
#include "prbslice/error.hpp"

namespace prbslice {

namespace detail {
extern const std::string_view kBundledMcsTableCsv;
}

std::string_view to_string(Modulation m) {
    switch (m) {
        case Modulation::QPSK:
            return "QPSK";
        case Modulation::QAM16:
            return "16QAM";
        case Modulation::QAM64:
            return "64QAM";
    }
    return "?";
}

Modulation parse_modulation(std::string_view name) {
    if (name == "QPSK") return Modulation::QPSK;
    if (name == "16QAM") return Modulation::QAM16;
    if (name == "64QAM") return Modulation::QAM64;
    throw ConfigError("unknown modulation '" + std::string(name) + "'");
}

int bits_per_symbol(Modulation m) {
    switch (m) {
        case Modulation::QPSK:
            return 2;
        case Modulation::QAM16:
            return 4;
        case Modulation::QAM64:
            return 6;
    }
    return 0;
}

McsTable::McsTable(std::vector<McsEntry> rows) : rows_(std::move(rows)) {
    if (rows_.size() != 29) {
        throw ConfigError("MCS table: expected 29 rows (indices 0-28), got " + std::to_string(rows_.size()));
    }
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const auto& r = rows_[i];
        if (r.index != static_cast<int>(i)) throw ConfigError("MCS table: indices must be 0..28 in order");
        if (r.qm != bits_per_symbol(r.modulation)) {
            throw ConfigError("MCS table: qm inconsistent with modulation at index " + std::to_string(r.index));
        }
        if (r.code_rate_x1024 <= 0 || r.code_rate_x1024 >= 1024) {
            throw ConfigError("MCS table: code rate outside (0,1) at index " + std::to_string(r.index));
        }
        if (i > 0 && rows_[i - 1].modulation == r.modulation && rows_[i - 1].code_rate_x1024 >= r.code_rate_x1024) {
            throw ConfigError("MCS table: code rate not increasing within modulation at index " +
                              std::to_string(r.index));
        }
    }
    // Table 5.1.3.1-1 modulation boundaries.
    for (const auto& r : rows_) {
        Modulation expected = r.index <= 9 ? Modulation::QPSK : r.index <= 16 ? Modulation::QAM16 : Modulation::QAM64;
        if (r.modulation != expected) {
            throw ConfigError("MCS table: unexpected modulation at index " + std::to_string(r.index));
        }
    }
}

McsTable McsTable::parse_csv(std::istream& in) {
    auto csv = detail::read_csv(in, {"index", "modulation", "qm", "code_rate_x1024"}, "MCS table");
    std::vector<McsEntry> rows;
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
        const auto& f = csv.rows[i];
        int line = csv.line_numbers[i];
        McsEntry e;
        e.index = detail::parse_number<int>(f[0], "MCS table", line);
        e.modulation = parse_modulation(f[1]);
        e.qm = detail::parse_number<int>(f[2], "MCS table", line);
        e.code_rate_x1024 = detail::parse_number<int>(f[3], "MCS table", line);
        rows.push_back(e);
    }
    return McsTable(std::move(rows));
}

McsTable McsTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open MCS table " + path.string());
    return parse_csv(in);
}

const McsTable& McsTable::bundled() {
    static const McsTable table = [] {
        std::istringstream in{std::string(detail::kBundledMcsTableCsv)};
        return parse_csv(in);
    }();
    return table;
}

const McsEntry& McsTable::row(int index) const {
    if (index < 0 || index >= static_cast<int>(rows_.size())) {
        throw DomainError("MCS index " + std::to_string(index) + " outside table range 0-28");
    }
    return rows_[static_cast<std::size_t>(index)];
}

McsEntry mcs_params(int index, const McsTable& table) {
    if (index < kMinMcs || index > kMaxMcs) {
        throw DomainError("MCS index " + std::to_string(index) + " outside supported range " +
                          std::to_string(kMinMcs) + "-" + std::to_string(kMaxMcs));
    }
    return table.row(index);
}

McsEntry mcs_params(int index) { return mcs_params(index, McsTable::bundled()); }

void RadioConfig::validate() const {
    if (prb_total != 106) throw ConfigError("prb_total must be 106");
    if (sc_per_prb <= 0 || symbols_per_slot <= 0 || slots_per_sec <= 0 || n_layers <= 0) {
        throw ConfigError("radio counts must be positive");
    }
    const auto& t = tdd;
    if (t.dl_slots < 0 || t.ul_slots < 0 || t.mixed_slots < 0 || t.period_slots() <= 0) {
        throw ConfigError("TDD pattern slot counts must be non-negative with a positive period");
    }
    if (t.mixed_dl_symbols < 0 || t.mixed_dl_symbols > symbols_per_slot) {
        throw ConfigError("TDD mixed-slot DL symbols must lie in [0, symbols_per_slot]");
    }
    double duty = duty_cycle(*this);
    if (!(duty > 0.0 && duty <= 1.0)) throw ConfigError("DL duty cycle must lie in (0,1]");
    if (!(overhead >= 0.0 && overhead < 1.0)) throw ConfigError("overhead must lie in [0,1)");
    if (!(prx_min_db < prx_max_db)) throw ConfigError("prx bounds must satisfy lower < upper");
    if (!(carrier_mhz > 0.0)) throw ConfigError("carrier frequency must be positive");
}

double duty_cycle(const TddPattern& tdd, int symbols_per_slot) {
    const int total = tdd.period_slots() * symbols_per_slot;
    const int dl = tdd.dl_slots * symbols_per_slot + tdd.mixed_slots * tdd.mixed_dl_symbols;
    return static_cast<double>(dl) / static_cast<double>(total);
}

double duty_cycle(const RadioConfig& cfg) { return duty_cycle(cfg.tdd, cfg.symbols_per_slot); }

LinkBudgetQuery query_at(double distance_km, const RadioConfig& cfg) {
    return LinkBudgetQuery{distance_km, cfg.gain_term_db};
}

double free_space_loss_db(double distance_km, double carrier_mhz) {
    if (!(distance_km > 0.0)) throw DomainError("distance must be positive, got " + std::to_string(distance_km));
    if (!(carrier_mhz > 0.0)) throw DomainError("carrier frequency must be positive");
    return 20.0 * std::log10(distance_km) + 20.0 * std::log10(carrier_mhz) + 32.44;
}

ReceivedPower received_power(const LinkBudgetQuery& q, const RadioConfig& cfg) {
    ReceivedPower p;
    p.raw_db = q.ptx_gains_db - free_space_loss_db(q.distance_km, cfg.carrier_mhz);
    p.clipped_db = std::clamp(p.raw_db, cfg.prx_min_db, cfg.prx_max_db);
    return p;
}

double distance_for_power_km(double prx_db, double ptx_gains_db, double carrier_mhz) {
    const double path_db = ptx_gains_db - prx_db - 20.0 * std::log10(carrier_mhz) - 32.44;
    return std::pow(10.0, path_db / 20.0);
}

}  // namespace prbslice
