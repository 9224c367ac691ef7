#pragma once

#include <cmath>

#include "mqi/constants.hpp"
#include "mqi/moments.hpp"

namespace mqi {

enum class Hypothesis { absent = 0, present = 1 };

/// Gains and added-noise quanta of the signal and idler measurement chains.
///
/// Conventions follow the chain bookkeeping used throughout:
///   - n_amp_s is the operator occupation ⟨a†a⟩ of the signal pre-target
///     amplifier noise mode. The noise it injects enters as
///     (G_amp − 1)(n_amp_s + 1). Configuring a value below 0 describes a
///     sub-quantum-limited amplifier; the formulas still evaluate and the
///     condition is reported through flags().
///   - n_det_s is the receiver noise after down-conversion and already
///     includes the +1 of the conjugate coupling (it multiplies G_det − 1
///     directly).
///   - n_add_i is the total idler added noise referred to the source output.
struct ChainParams {
    double g_s_amp = db_to_linear(77.16);  // pre-target signal gain
    double g_s_det = db_to_linear(16.82);  // post-target signal gain
    double g_i_total = db_to_linear(94.25);// total idler chain gain
    double n_amp_s = 5e8 / (db_to_linear(77.16) - 1.0) - 1.0; // quanta, see above
    double n_det_s = 3e5;                  // receiver noise quanta (conjugate convention)
    double n_add_i = 14.91;                // total idler added noise, source-referred
    double n_env = 672.0;                  // environmental thermal quanta at the target

    // Calibration uncertainties (1-sigma-ish, dB for gains). Only the sweep
    // module consumes these, to draw analytic error bands; every closed-form
    // result uses the central values above.
    double g_s_db_err = 0.01;
    double g_i_db_err = 0.02;
    double n_add_i_err = 0.1;

    double g_s_total() const { return g_s_amp * g_s_det; }

    /// Total signal-chain added noise referred to the source output.
    double n_add_s() const {
        return (g_s_amp - 1.0) / g_s_amp * (n_amp_s + 1.0) +
               (g_s_det - 1.0) / g_s_total() * n_det_s;
    }

    struct Flags {
        bool sub_quantum_signal = false;
        bool sub_quantum_idler = false;
    };

    /// A phase-insensitive amplifier must add at least the conjugated vacuum:
    /// (G−1)·1 on the signal pre-amp, and ~1 quantum source-referred on the
    /// idler chain. Configurations below that are allowed but flagged.
    Flags flags() const {
        Flags f;
        f.sub_quantum_signal = n_amp_s < 0.0;
        f.sub_quantum_idler = n_add_i < (g_i_total - 1.0) / g_i_total;
        return f;
    }

    void validate() const {
        if (g_s_amp < 1.0 || g_s_det < 1.0 || g_i_total < 1.0)
            throw std::domain_error("ChainParams: gains must be >= 1");
        if (n_det_s < 0 || n_add_i < 0 || n_env < 0)
            throw std::domain_error("ChainParams: noise quanta must be >= 0");
    }
};

inline ChainParams reference_chain() { return ChainParams{}; }

struct TargetScenario {
    double eta = 1.0; // total round-trip signal transmissivity
    Hypothesis hypothesis = Hypothesis::present;

    void validate() const {
        if (eta < 0.0 || eta > 1.0) throw std::domain_error("TargetScenario: eta must lie in [0, 1]");
    }
};

/// Detected noise quanta with the target absent (n0) and present (n1).
struct NoiseTotals {
    double n0 = 0.0;
    double n1 = 0.0;
};

/// Full-η noise bookkeeping (no η<<1 approximation):
///   n0 = G_det n_env + (G_det − 1) n_det,S
///   n1 = η G_det (G_amp − 1)(n_amp_s + 1) + (1−η) G_det n_env + (G_det − 1) n_det,S
inline NoiseTotals noise_totals(const ChainParams& p, double eta) {
    if (eta < 0.0 || eta > 1.0) throw std::domain_error("noise_totals: eta must lie in [0, 1]");
    NoiseTotals t;
    t.n0 = p.g_s_det * p.n_env + (p.g_s_det - 1.0) * p.n_det_s;
    t.n1 = eta * p.g_s_det * (p.g_s_amp - 1.0) * (p.n_amp_s + 1.0) +
           (1.0 - eta) * p.g_s_det * p.n_env + (p.g_s_det - 1.0) * p.n_det_s;
    return t;
}

/// Push the signal mode through amplifier, target region, and detection stage.
///
/// Present: occupation -> η G_S n_s + n1, c -> √(η G_S) c, mean -> √(η G_S) mean.
/// Absent:  occupation -> n0, correlation and mean vanish.
/// The record vacuum scale becomes the transmission seen by the vacuum that
/// entered at the source plane (η G_S) plus the environment plane ((1−η) G_det).
/// The idler fields are untouched.
inline SecondMoments detect_signal(const SecondMoments& m, const ChainParams& p,
                                   const TargetScenario& t) {
    require_physical(m, "detect_signal");
    p.validate();
    t.validate();
    SecondMoments out = m;
    const NoiseTotals tot = noise_totals(p, t.eta);
    if (t.hypothesis == Hypothesis::present) {
        const double amp = t.eta * p.g_s_total();
        out.n_s = amp * m.n_s + tot.n1;
        out.c = std::sqrt(amp) * m.c;
        out.mean_s = std::sqrt(amp) * m.mean_s;
        out.vac_s = amp * m.vac_s + (1.0 - t.eta) * p.g_s_det;
    } else {
        out.n_s = tot.n0;
        out.c = cdouble(0.0, 0.0);
        out.mean_s = cdouble(0.0, 0.0);
        out.vac_s = p.g_s_det;
    }
    return out;
}

/// Push the idler mode through its measurement chain:
/// occupation -> G_I (n_i + n_add,I), c -> √(G_I) c, mean -> √(G_I) mean.
inline SecondMoments detect_idler(const SecondMoments& m, const ChainParams& p) {
    require_physical(m, "detect_idler");
    p.validate();
    SecondMoments out = m;
    out.n_i = p.g_i_total * (m.n_i + p.n_add_i);
    out.c = std::sqrt(p.g_i_total) * m.c;
    out.mean_i = std::sqrt(p.g_i_total) * m.mean_i;
    out.vac_i = p.g_i_total * m.vac_i;
    return out;
}

/// Both channels of the detected two-mode state for one hypothesis.
inline SecondMoments detect_pair(const SecondMoments& m, const ChainParams& p,
                                 const TargetScenario& t) {
    return detect_idler(detect_signal(m, p, t), p);
}

struct PassiveSnr {
    double snr = 0.0;
    double snr_db = -INFINITY;
};

/// SNR of the "amplifier noise radiometer": detect the target purely from the
/// amplified transmitter noise, SNR = (n1 − n0)/(n0 + 1).
inline PassiveSnr passive_snr(const ChainParams& p, double eta) {
    p.validate();
    const NoiseTotals t = noise_totals(p, eta);
    PassiveSnr out;
    out.snr = (t.n1 - t.n0) / (t.n0 + 1.0);
    out.snr_db = out.snr > 0 ? linear_to_db(out.snr) : -INFINITY;
    return out;
}

} // namespace mqi
