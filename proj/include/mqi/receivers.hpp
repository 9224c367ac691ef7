#pragma once

#include <string>
#include <vector>

#include "mqi/chain.hpp"
#include "mqi/dsp.hpp"
#include "mqi/moments.hpp"

namespace mqi {

enum class Receiver { pc_raw, pc_calibrated, homodyne, heterodyne, passive };

std::string receiver_name(Receiver r);

/// Conditional means and variances of the per-shot decision variable.
struct DecisionStats {
    double mean0 = 0, mean1 = 0;
    double var0 = 0, var1 = 0;
    std::size_t count = 0; // samples per hypothesis
};

struct SnrReport {
    double snr = 0.0;
    double snr_db = 0.0;   // 10 log10(snr)
    double stderr_ = 0.0;  // statistical uncertainty of snr (linear scale)
    Receiver receiver = Receiver::pc_raw;
    DecisionStats stats;

    double stderr_db() const; // stderr mapped to dB via d(dB)/d(snr)
};

/// SNR of a balanced binary decision from conditional statistics:
/// snr = (mean1 - mean0)^2 / (2 (sqrt(var1) + sqrt(var0))^2).
SnrReport snr_from_stats(const DecisionStats& s, Receiver r = Receiver::pc_raw);

/// Per-shot phase-conjugate decision values N_k = |a_+|^2 - |a_-|^2
/// = 2 Re(a_S,k a_I,k), with a_{+-} built from conj(a_S) and a_I.
/// Caller must have rotated the batch so the cross correlation is
/// real-positive. Throws UsageError on mismatched size or hypothesis.
std::vector<double> pc_decision_values(const RecordBatch& sig, const RecordBatch& idl);
std::vector<double> pc_decision_values(const RecordBatch& batch);

DecisionStats decision_stats(const std::vector<double>& h1, const std::vector<double>& h0);

/// Record-convention second moments entering the phase-conjugate receiver:
/// a_i = signal-record moment under hypothesis i, b_i = idler moment (source
/// operator value when calibrated), c_i = cross correlation.
struct PcMoments {
    double a1 = 0, a0 = 0;
    double b1 = 0, b0 = 0;
    double c1 = 0, c0 = 0;
};

PcMoments pc_record_moments(const SecondMoments& source, const ChainParams& chain, double eta,
                            bool calibrated);

/// Photon-difference variance of the balanced measurement,
/// (ΔN)² = N₊(N₊+1) + N₋(N₋+1) − (a − b)²/2 with N± = (a + b ± 2c)/2.
double pc_variance(double a, double b, double c);

double pc_snr_from_moments(const PcMoments& m);

/// Closed-form phase-conjugate receiver SNR. `calibrated` replaces the
/// detected idler occupation by the calibrated noiseless source value in all
/// four ⟨N±⟩ terms and refers the cross correlation to the source idler plane.
/// The cross correlation is rotated real-positive internally.
SnrReport pc_snr_analytic(const SecondMoments& source, const ChainParams& chain, double eta,
                          bool calibrated);

/// Closed-form coherent-state receivers. The X quadrature is aligned with the
/// coherent mean (phase known); heterodyne needs no phase reference and pays
/// the two-quadrature noise penalty.
SnrReport homodyne_snr_analytic(const SecondMoments& source, const ChainParams& chain, double eta);
SnrReport heterodyne_snr_analytic(const SecondMoments& source, const ChainParams& chain, double eta);

/// Monte Carlo receivers over deterministic block sums (H1 and H0 must share
/// the block structure). stderr comes from a delete-one-block jackknife.
SnrReport pc_raw_mc(const std::vector<PairSums>& h1, const std::vector<PairSums>& h0);
SnrReport pc_calibrated_mc(const std::vector<PairSums>& h1, const std::vector<PairSums>& h0,
                           const ChainParams& chain);
SnrReport homodyne_mc(const std::vector<PairSums>& h1, const std::vector<PairSums>& h0);
SnrReport heterodyne_mc(const std::vector<PairSums>& h1, const std::vector<PairSums>& h0);

SnrReport passive_report(const ChainParams& chain, double eta);

/// Error probability of symmetric binary hypothesis testing after M
/// single-mode measurements: E = 1/2 erfc(sqrt(snr * M)).
double error_probability(double snr, double m_measurements);

} // namespace mqi
