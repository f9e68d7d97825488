#include "prbslice/link_sim.hpp"

#include <fftw3.h>

#include <bit>
#include <cmath>
#include <limits>
#include <mutex>
#include <ostream>
#include <random>
#include <string>

#include "csv_util.hpp"
#include "prbslice/error.hpp"

namespace prbslice {

namespace {

using cd = std::complex<double>;

// FFTW planner calls are not thread-safe; execution on distinct plans is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

class FftPlan {
public:
    FftPlan(int n, int sign) : n_(n) {
        in_ = fftw_alloc_complex(static_cast<std::size_t>(n));
        out_ = fftw_alloc_complex(static_cast<std::size_t>(n));
        std::lock_guard lock(planner_mutex());
        plan_ = fftw_plan_dft_1d(n, in_, out_, sign, FFTW_ESTIMATE);
    }
    ~FftPlan() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan_);
        fftw_free(in_);
        fftw_free(out_);
    }
    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;

    cd* input() { return reinterpret_cast<cd*>(in_); }
    const cd* output() const { return reinterpret_cast<const cd*>(out_); }

    // Unitary transform: output scaled by 1/sqrt(n).
    void execute() {
        fftw_execute(plan_);
        const double s = 1.0 / std::sqrt(static_cast<double>(n_));
        auto* o = reinterpret_cast<cd*>(out_);
        for (int i = 0; i < n_; ++i) o[i] *= s;
    }

private:
    int n_;
    fftw_complex* in_;
    fftw_complex* out_;
    fftw_plan plan_;
};

// Per-axis amplitude levels for one real dimension of the constellation.
// Bits are listed MSB first as they appear in the TS 38.211 formulas.
double axis_level(const std::uint8_t* b, int axis_bits) {
    const double s0 = 1.0 - 2.0 * b[0];
    switch (axis_bits) {
        case 1:
            return s0;
        case 2:
            return s0 * (2.0 - (1.0 - 2.0 * b[1]));
        default:
            return s0 * (4.0 - (1.0 - 2.0 * b[1]) * (2.0 - (1.0 - 2.0 * b[2])));
    }
}

void axis_decide(double v, int axis_bits, std::uint8_t* b) {
    b[0] = v < 0.0 ? 1 : 0;
    const double a = std::abs(v);
    if (axis_bits >= 2) b[1] = a > (axis_bits == 2 ? 2.0 : 4.0) ? 1 : 0;
    if (axis_bits >= 3) b[2] = std::abs(a - 4.0) > 2.0 ? 1 : 0;
}

double axis_norm(Modulation m) {
    switch (m) {
        case Modulation::QPSK:
            return 1.0 / std::sqrt(2.0);
        case Modulation::QAM16:
            return 1.0 / std::sqrt(10.0);
        case Modulation::QAM64:
            return 1.0 / std::sqrt(42.0);
    }
    return 1.0;
}

bool is_power_of_two(int n) { return n > 0 && std::has_single_bit(static_cast<unsigned>(n)); }

// Active subcarriers occupy the lowest positive and highest negative bins,
// leaving DC empty.
int bin_for_subcarrier(int k, int n_active, int fft_size) {
    const int half = (n_active + 1) / 2;
    return k < half ? k + 1 : fft_size - (n_active - k);
}

}  // namespace

double RateScalingFec::information_bits(std::uint64_t correct_bits, std::uint64_t, const McsEntry& mcs) const {
    return static_cast<double>(correct_bits) * mcs.code_rate();
}

std::vector<cd> modulate(std::span<const std::uint8_t> bits, Modulation m) {
    const int qm = bits_per_symbol(m);
    if (bits.size() % static_cast<std::size_t>(qm) != 0) {
        throw ContractError("bit count must be a multiple of bits per symbol");
    }
    const int axis_bits = qm / 2;
    const double norm = axis_norm(m);
    std::vector<cd> out(bits.size() / static_cast<std::size_t>(qm));
    std::uint8_t ib[3];
    std::uint8_t qb[3];
    for (std::size_t s = 0; s < out.size(); ++s) {
        const std::uint8_t* b = bits.data() + s * static_cast<std::size_t>(qm);
        // Even-position bits drive I, odd-position bits drive Q.
        for (int j = 0; j < axis_bits; ++j) {
            ib[j] = b[2 * j];
            qb[j] = b[2 * j + 1];
        }
        out[s] = cd(axis_level(ib, axis_bits) * norm, axis_level(qb, axis_bits) * norm);
    }
    return out;
}

std::vector<std::uint8_t> demodulate(std::span<const cd> symbols, Modulation m) {
    const int qm = bits_per_symbol(m);
    const int axis_bits = qm / 2;
    const double inv = 1.0 / axis_norm(m);
    std::vector<std::uint8_t> out(symbols.size() * static_cast<std::size_t>(qm));
    std::uint8_t ib[3];
    std::uint8_t qb[3];
    for (std::size_t s = 0; s < symbols.size(); ++s) {
        axis_decide(symbols[s].real() * inv, axis_bits, ib);
        axis_decide(symbols[s].imag() * inv, axis_bits, qb);
        std::uint8_t* b = out.data() + s * static_cast<std::size_t>(qm);
        for (int j = 0; j < axis_bits; ++j) {
            b[2 * j] = ib[j];
            b[2 * j + 1] = qb[j];
        }
    }
    return out;
}

double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

double ber_analytic(Modulation m, double ebno_db) {
    if (ebno_db == std::numeric_limits<double>::infinity()) return 0.0;
    const double k = bits_per_symbol(m);
    const double order = std::pow(2.0, k);
    const double ebno = std::pow(10.0, ebno_db / 10.0);
    const double coeff = (4.0 / k) * (1.0 - 1.0 / std::sqrt(order));
    return coeff * q_function(std::sqrt(3.0 * k / (order - 1.0) * ebno));
}

double snr_db_for_ebno(Modulation m, double ebno_db) {
    return ebno_db + 10.0 * std::log10(static_cast<double>(bits_per_symbol(m)));
}

void validate(const LinkRunSpec& spec, const RadioConfig& radio) {
    if (spec.prbs < 0 || spec.prbs > radio.prb_total) {
        throw DomainError("prbs must lie in [0, " + std::to_string(radio.prb_total) + "]");
    }
    if (spec.n_ofdm_symbols < 1) throw DomainError("n_ofdm_symbols must be >= 1");
    if (!is_power_of_two(spec.fft_size)) throw DomainError("fft_size must be a power of two");
    if (spec.fft_size < spec.prbs * radio.sc_per_prb + 1) {
        throw DomainError("fft_size must exceed the number of active subcarriers");
    }
    if (spec.cp_len < 0 || spec.cp_len >= spec.fft_size) throw DomainError("cp_len must lie in [0, fft_size)");
}

LinkRunResult simulate_link(const LinkRunSpec& spec, const LinkSimOptions& options) {
    const McsTable& table = options.table ? *options.table : McsTable::bundled();
    const McsEntry mcs = mcs_params(spec.mcs, table);
    validate(spec, options.radio);

    LinkRunResult result;
    if (spec.prbs == 0) return result;

    static const RateScalingFec default_fec;
    const FecModel& fec = options.fec ? *options.fec : default_fec;

    const int n_active = spec.prbs * options.radio.sc_per_prb;
    const int n = spec.fft_size;
    const int qm = mcs.qm;
    const std::size_t bits_per_ofdm = static_cast<std::size_t>(n_active) * static_cast<std::size_t>(qm);

    const double amplitude = std::pow(10.0, spec.prx_db / 20.0);
    const double noise_power = std::pow(10.0, spec.noise_db / 10.0);
    const double noise_std = std::sqrt(noise_power / 2.0);

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    FftPlan ifft(n, FFTW_BACKWARD);
    FftPlan fft(n, FFTW_FORWARD);
    std::vector<std::uint8_t> bits(bits_per_ofdm);
    std::vector<cd> tx_time(static_cast<std::size_t>(n + spec.cp_len));
    std::vector<cd> rx_symbols(static_cast<std::size_t>(n_active));

    const int dump_symbols = options.grid_dump ? std::min(spec.n_ofdm_symbols, options.radio.symbols_per_slot) : 0;
    std::vector<cd> dump_grid(static_cast<std::size_t>(n_active) * static_cast<std::size_t>(dump_symbols));

    std::uint64_t correct = 0;
    for (int sym = 0; sym < spec.n_ofdm_symbols; ++sym) {
        for (std::size_t i = 0; i < bits.size(); i += 64) {
            std::uint64_t word = rng();
            for (std::size_t j = i; j < std::min(bits.size(), i + 64); ++j) {
                bits[j] = static_cast<std::uint8_t>(word & 1u);
                word >>= 1;
            }
        }
        const auto qam = modulate(bits, mcs.modulation);

        cd* freq = ifft.input();
        std::fill(freq, freq + n, cd{});
        for (int k = 0; k < n_active; ++k) freq[bin_for_subcarrier(k, n_active, n)] = qam[static_cast<std::size_t>(k)];
        ifft.execute();

        const cd* body = ifft.output();
        for (int i = 0; i < spec.cp_len; ++i) tx_time[static_cast<std::size_t>(i)] = body[n - spec.cp_len + i];
        for (int i = 0; i < n; ++i) tx_time[static_cast<std::size_t>(spec.cp_len + i)] = body[i];

        // Flat channel with received amplitude, then AWGN.
        for (auto& s : tx_time) {
            s *= amplitude;
            if (noise_std > 0.0) {
                const double re = gauss(rng);
                const double im = gauss(rng);
                s += cd(re * noise_std, im * noise_std);
            }
        }

        cd* rx_in = fft.input();
        for (int i = 0; i < n; ++i) rx_in[i] = tx_time[static_cast<std::size_t>(spec.cp_len + i)];
        fft.execute();
        const cd* rx_freq = fft.output();
        for (int k = 0; k < n_active; ++k) {
            rx_symbols[static_cast<std::size_t>(k)] = rx_freq[bin_for_subcarrier(k, n_active, n)] / amplitude;
        }
        if (sym < dump_symbols) {
            for (int k = 0; k < n_active; ++k) {
                dump_grid[static_cast<std::size_t>(k) * static_cast<std::size_t>(dump_symbols) +
                          static_cast<std::size_t>(sym)] = rx_symbols[static_cast<std::size_t>(k)];
            }
        }

        const auto decided = demodulate(rx_symbols, mcs.modulation);
        for (std::size_t j = 0; j < bits.size(); ++j) correct += decided[j] == bits[j] ? 1u : 0u;
    }

    if (options.grid_dump) {
        auto& out = *options.grid_dump;
        detail::write_schema(out, "rx_grid");
        out << "subcarrier";
        for (int s = 0; s < dump_symbols; ++s) out << ",sym" << s << "_re,sym" << s << "_im";
        out << '\n';
        out.precision(17);
        for (int k = 0; k < n_active; ++k) {
            out << k;
            for (int s = 0; s < dump_symbols; ++s) {
                const cd v = dump_grid[static_cast<std::size_t>(k) * static_cast<std::size_t>(dump_symbols) +
                                       static_cast<std::size_t>(s)];
                out << ',' << v.real() << ',' << v.imag();
            }
            out << '\n';
        }
    }

    result.tx_bits = static_cast<std::uint64_t>(spec.n_ofdm_symbols) * bits_per_ofdm;
    result.correct_bits = correct;
    result.bit_error_rate = 1.0 - static_cast<double>(correct) / static_cast<double>(result.tx_bits);
    result.information_bits = fec.information_bits(correct, result.tx_bits, mcs);
    const double symbol_duration =
        1.0 / (static_cast<double>(options.radio.slots_per_sec) * options.radio.symbols_per_slot);
    result.throughput_bps = result.information_bits / (spec.n_ofdm_symbols * symbol_duration);
    return result;
}

}  // namespace prbslice
