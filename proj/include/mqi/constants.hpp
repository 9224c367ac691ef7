#pragma once

#include <cmath>
#include <string>

#include "mqi/errors.hpp"

namespace mqi {

/// Physical constants (CODATA 2018 / exact SI values).
struct PhysConstants {
    double hbar = 1.054571817e-34; // J s
    double k_b  = 1.380649e-23;    // J/K (exact since 2019 SI)
};

inline constexpr PhysConstants kPhys{};

constexpr double kPi = 3.14159265358979323846;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

/// Measurement band and digitizer settings shared by every stage of the signal path.
///
/// The analysis bandwidth is set by the record length: one record of
/// `record_len` samples at `sample_rate_hz` gives one DFT bin of width
/// sample_rate/record_len, and the IF tone must fall exactly on a bin.
struct BandParams {
    double omega_s = 2.0 * kPi * 10.09e9; // signal angular frequency, rad/s
    double omega_i = 2.0 * kPi * 6.8e9;   // idler angular frequency, rad/s
    double bandwidth_hz = 200e3;          // analysis bandwidth B
    double impedance_ohm = 50.0;          // line impedance R
    double sample_rate_hz = 100e6;        // ADC rate
    double if_freq_hz = 20e6;             // intermediate frequency after down-conversion
    int record_len = 500;                 // samples per record

    /// DFT bin index carrying the IF tone.
    double if_bin() const { return if_freq_hz * record_len / sample_rate_hz; }

    void validate() const {
        auto bad = [](const std::string& what) { throw ConfigError("BandParams: " + what); };
        if (omega_s <= 0 || omega_i <= 0) bad("angular frequencies must be positive");
        if (bandwidth_hz <= 0 || impedance_ohm <= 0 || sample_rate_hz <= 0 || if_freq_hz <= 0)
            bad("bandwidth, impedance, sample rate and IF must be positive");
        if (record_len <= 0) bad("record_len must be positive");
        if (if_freq_hz >= sample_rate_hz / 2) bad("IF must sit below Nyquist");
        const double b = sample_rate_hz / record_len;
        if (std::abs(b - bandwidth_hz) > 1e-9 * bandwidth_hz)
            bad("bandwidth_hz must equal sample_rate_hz / record_len");
        const double bin = if_bin();
        if (std::abs(bin - std::round(bin)) > 1e-9)
            bad("IF frequency must fall on an integer DFT bin");
        const double nyq_bin = record_len / 2.0;
        if (bin <= 0 || bin >= nyq_bin) bad("IF bin must be strictly inside (0, record_len/2)");
    }
};

/// Band settings of the reference experiment.
inline BandParams reference_band() { return BandParams{}; }

} // namespace mqi
