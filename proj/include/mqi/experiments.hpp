#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mqi/chain.hpp"
#include "mqi/constants.hpp"
#include "mqi/moments.hpp"
#include "mqi/receivers.hpp"

namespace mqi {

enum class SourceKind { tmsv = 0, classical = 1, coherent = 2 };
enum class SweepVariable { n_s, eta, distance, temperature };

std::string source_name(SourceKind s);
std::string sweep_variable_name(SweepVariable v);

/// Source degradation recipe: multiplicative factor on the ideal cross
/// correlation as a function of the signal photon number.
struct PurityModel {
    enum class Kind { constant, rational, table };
    Kind kind = Kind::constant;
    double value = 1.0;          // constant
    double p0 = 1.0, beta = 0.0; // rational: p0 / (1 + beta n_s)
    std::vector<std::pair<double, double>> table; // (n_s, purity), linear interp

    double at(double n_s) const;
};

/// Object distance to round-trip transmissivity.
struct DistanceModel {
    enum class Kind { power_law, table };
    Kind kind = Kind::power_law;
    double eta_ref = 1.0; // transmissivity at d_ref
    double d_ref = 0.1;   // m
    double exponent = 2.0;
    std::vector<std::pair<double, double>> table_db; // (d m, eta dB), dB-linear interp

    void validate() const;
};

double distance_to_eta(const DistanceModel& model, double d);

struct SweepConfig {
    SweepVariable variable = SweepVariable::n_s;
    std::vector<double> grid;
    std::vector<SourceKind> sources{SourceKind::tmsv, SourceKind::classical, SourceKind::coherent};
    std::vector<Receiver> receivers{Receiver::pc_raw, Receiver::pc_calibrated, Receiver::homodyne,
                                    Receiver::heterodyne, Receiver::passive};
    std::size_t m_per_point = 380000;
    std::size_t m_coherent = 192000;
    int repetitions = 3;
    std::uint64_t master_seed = 20200517;
    ChainParams chain;
    BandParams band;
    PurityModel purity;
    DistanceModel distance;
    double fixed_eta = 1.0;   // used unless sweeping eta/distance
    double fixed_n_s = 0.5;   // used unless sweeping n_s
    double classical_n_i = -1.0; // idler occupation of the classical source; <0 tracks n_s
    bool with_mc = true;      // false: closed-form columns only (entanglement figures)
    std::string figure;       // recipe tag (fig2a/fig2b/fig3a/fig3b), optional
    int workers = 1;

    void validate() const;
    bool wants(Receiver r) const;
};

struct SweepRow {
    double sweep_value = 0;
    SourceKind source = SourceKind::tmsv;
    bool source_free = false; // passive rows do not belong to a source
    Receiver receiver = Receiver::pc_raw;
    double n_s = 0;
    double eta = 1;
    std::size_t m = 0;
    int repetitions = 0;
    double snr_mc = NAN;       // mean across repetitions, linear
    double snr_mc_db = NAN;
    double stderr_db = NAN;    // standard error of the mean across repetitions
    double snr_analytic = NAN;
    double snr_analytic_db = NAN;
    double analytic_band_db = NAN; // half-width from the chain calibration uncertainties
    double delta = NAN;        // non-separability witness of the source
    double error_prob = NAN;   // at the configured M, from the analytic SNR
};

struct SweepResult {
    SweepConfig config;
    std::vector<SweepRow> rows;
    // A failing point aborts the sweep; rows for the points before it are kept.
    bool aborted = false;
    std::string error;
};

/// All rows for a single sweep point; MC repetitions run with seeds derived
/// from (master seed, point index, source, repetition, hypothesis).
std::vector<SweepRow> run_point(const SweepConfig& cfg, double value, std::size_t point_index = 0);

SweepResult run_sweep(const SweepConfig& cfg);

/// Fixed-format CSV of the sweep rows; identical bytes for identical config
/// and seed regardless of the worker count.
std::string sweep_csv(const SweepResult& result);

/// Wide per-figure table (one column per source/receiver series).
std::string figure_csv(const SweepResult& result);

/// Crossings and peak advantages, JSON-formatted.
std::string summary_json(const SweepResult& result);

/// Thermal occupation of the environment at temperature T and frequency omega.
double thermal_occupation(double omega, double temperature_k);

} // namespace mqi
