#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "mqi/errors.hpp"

namespace mqi {

using cdouble = std::complex<double>;

/// Second moments of a two-mode Gaussian state in the quadrature convention
/// x = (a + a†)/√2, p = (a − a†)/(i√2), vacuum quadrature variance 1/2.
///
/// `n_s`, `n_i` are the *excess* (central) occupations ⟨a†a⟩ − |⟨a⟩|² and `c`
/// is the central phase-sensitive cross-correlation ⟨a_S a_I⟩ − ⟨a_S⟩⟨a_I⟩.
/// Single-mode squeezing terms ⟨a²⟩ are identically zero for every source
/// handled here (phase-insensitive thermal marginals) and are not represented.
///
/// `vac_s`/`vac_i` track the heterodyne vacuum variance a sampled record of the
/// mode carries, in the mode's own units: 1 at a unit-gain plane, and scaled by
/// the chain transmission once the mode has passed through an amplifier chain.
/// A joint I/Q record of the mode then has second moment n + |mean|² + vac.
struct SecondMoments {
    double n_s = 0.0;
    double n_i = 0.0;
    cdouble c{0.0, 0.0};
    cdouble mean_s{0.0, 0.0};
    cdouble mean_i{0.0, 0.0};
    double vac_s = 1.0;
    double vac_i = 1.0;
};

/// Symplectic eigenvalues of the 4x4 quadrature covariance reconstructed from
/// the central moments. Physical states have nu_minus >= 1/2, with equality on
/// both eigenvalues iff the state is pure.
struct SymplecticPair {
    double nu_minus = 0.0;
    double nu_plus = 0.0;
};

inline SymplecticPair symplectic_eigenvalues(const SecondMoments& m) {
    const double a = m.n_s + 0.5;
    const double b = m.n_i + 0.5;
    const double k2 = std::norm(m.c);
    // Standard-form two-mode covariance: diag blocks a*I, b*I, off-diagonal
    // diag(|c|, -|c|) after a phase rotation that leaves the spectrum invariant.
    const double delta = a * a + b * b - 2.0 * k2;
    const double det = (a * b - k2) * (a * b - k2);
    const double disc = std::max(delta * delta - 4.0 * det, 0.0);
    // nu_minus via the eigenvalue product: delta - sqrt(disc) cancels badly
    // for strongly amplified states.
    const double hi = (delta + std::sqrt(disc)) / 2.0;
    const double lo = hi > 0.0 ? std::max(det / hi, 0.0) : 0.0;
    return {std::sqrt(lo), std::sqrt(hi)};
}

/// Physicality: both symplectic eigenvalues at or above the vacuum value.
inline bool is_physical(const SecondMoments& m, double rel_tol = 1e-9) {
    if (m.n_s < 0 || m.n_i < 0) return false;
    return symplectic_eigenvalues(m).nu_minus >= 0.5 * (1.0 - rel_tol);
}

/// Classical (separable-by-construction) bound |c|^2 <= n_s n_i.
inline bool satisfies_classical_bound(const SecondMoments& m, double rel_tol = 1e-9) {
    return std::norm(m.c) <= m.n_s * m.n_i * (1.0 + rel_tol) + rel_tol;
}

/// Two-mode squeezed vacuum with mean photon number n_s per mode.
///
/// `purity` is a multiplicative degradation factor on the ideal cross
/// correlation √(n(n+1)); 1 gives the pure TMSV, smaller values model the
/// pump-power dependent heating of the source as a mixed but physical state.
inline SecondMoments tmsv_moments(double n_s, double purity = 1.0) {
    if (n_s < 0) throw std::domain_error("tmsv_moments: n_s must be >= 0");
    if (purity < 0 || purity > 1) throw std::domain_error("tmsv_moments: purity must lie in [0, 1]");
    SecondMoments m;
    m.n_s = n_s;
    m.n_i = n_s;
    m.c = cdouble(purity * std::sqrt(n_s * (n_s + 1.0)), 0.0);
    return m;
}

/// Maximally correlated classical noise source, c = √(n_s n_i).
inline SecondMoments classical_moments(double n_s, double n_i) {
    if (n_s < 0 || n_i < 0) throw std::domain_error("classical_moments: occupations must be >= 0");
    SecondMoments m;
    m.n_s = n_s;
    m.n_i = n_i;
    m.c = cdouble(std::sqrt(n_s * n_i), 0.0);
    return m;
}

/// Coherent tone of mean photon number n_s on the signal mode, idler in vacuum.
inline SecondMoments coherent_moments(double n_s) {
    if (n_s < 0) throw std::domain_error("coherent_moments: n_s must be >= 0");
    SecondMoments m;
    m.mean_s = cdouble(std::sqrt(n_s), 0.0);
    return m;
}

/// Non-separability witness Δ = ⟨X̂²₋⟩ + ⟨P̂²₊⟩ for the joint quadratures
/// X₋ = (a_S + a_S† − a_I − a_I†)/2, P₊ = (a_S − a_S† + a_I − a_I†)/(2i).
/// Δ < 1 certifies entanglement; the vacuum sits exactly at 1.
inline double duan_delta(const SecondMoments& m) {
    return m.n_s + m.n_i + 1.0 - 2.0 * m.c.real();
}

/// Rotate the idler phase: c -> c e^{iθ}, mean_i -> mean_i e^{iθ}.
inline SecondMoments apply_phase_rotation(const SecondMoments& m, double theta) {
    SecondMoments out = m;
    const cdouble ph = std::polar(1.0, theta);
    out.c = m.c * ph;
    out.mean_i = m.mean_i * ph;
    return out;
}

struct RotationResult {
    double theta = 0.0;
    bool degenerate = false; // c == 0, any angle works
};

/// Angle that makes the cross correlation real and positive.
inline RotationResult optimal_rotation(const SecondMoments& m) {
    if (m.c == cdouble(0.0, 0.0)) return {0.0, true};
    return {-std::arg(m.c), false};
}

/// Rotate so that c is real-positive (no-op for degenerate c).
inline SecondMoments rotated_to_real(const SecondMoments& m) {
    return apply_phase_rotation(m, optimal_rotation(m).theta);
}

/// Second moment ⟨|a|²⟩ of a joint I/Q record of the signal mode.
inline double record_moment_s(const SecondMoments& m) {
    return m.n_s + std::norm(m.mean_s) + m.vac_s;
}

/// Second moment ⟨|a|²⟩ of a joint I/Q record of the idler mode.
inline double record_moment_i(const SecondMoments& m) {
    return m.n_i + std::norm(m.mean_i) + m.vac_i;
}

inline void require_physical(const SecondMoments& m, const std::string& who) {
    if (!is_physical(m)) throw std::domain_error(who + ": moments are not physical");
}

} // namespace mqi
