#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "prbslice/phy.hpp"

namespace prbslice {

struct LinkRunSpec {
    int prbs = 106;
    int mcs = 28;
    double prx_db = -7.0;
    double noise_db = -80.0;  // -inf gives a noiseless channel
    int n_ofdm_symbols = 14;
    int fft_size = 2048;
    int cp_len = 144;
    std::uint64_t seed = 1;
};

struct LinkRunResult {
    std::uint64_t tx_bits = 0;
    std::uint64_t correct_bits = 0;
    double bit_error_rate = 0.0;
    double information_bits = 0.0;
    double throughput_bps = 0.0;
};

/// Maps raw bit-level outcomes to delivered information bits. The default
/// scales correct channel bits by the MCS code rate; a real decoder can be
/// dropped in here.
class FecModel {
public:
    virtual ~FecModel() = default;
    virtual double information_bits(std::uint64_t correct_bits, std::uint64_t tx_bits,
                                    const McsEntry& mcs) const = 0;
};

class RateScalingFec final : public FecModel {
public:
    double information_bits(std::uint64_t correct_bits, std::uint64_t tx_bits, const McsEntry& mcs) const override;
};

struct LinkSimOptions {
    RadioConfig radio{};
    const McsTable* table = nullptr;    // bundled table when null
    const FecModel* fec = nullptr;      // RateScalingFec when null
    std::ostream* grid_dump = nullptr;  // received grid of the first slot as CSV
};

void validate(const LinkRunSpec& spec, const RadioConfig& radio);

/// Monte-Carlo OFDM downlink over a flat unit-gain channel with AWGN.
/// Deterministic for a fixed seed.
LinkRunResult simulate_link(const LinkRunSpec& spec, const LinkSimOptions& options = {});

/// Gray mapping per TS 38.211 5.1, unit average symbol energy.
std::vector<std::complex<double>> modulate(std::span<const std::uint8_t> bits, Modulation m);
std::vector<std::uint8_t> demodulate(std::span<const std::complex<double>> symbols, Modulation m);

double q_function(double x);

/// Gray-coded square-QAM BER approximation on AWGN,
/// (4/k)(1 - 1/sqrt(M)) Q(sqrt(3k/(M-1) Eb/N0)); exact for QPSK.
double ber_analytic(Modulation m, double ebno_db);

/// Per-subcarrier SNR in dB that yields the requested uncoded Eb/N0.
double snr_db_for_ebno(Modulation m, double ebno_db);

}  // namespace prbslice
