#pragma once

#include <string>
#include <vector>

#include "mqi/constants.hpp"

namespace mqi {

/// One radiometric calibration measurement: a matched load at temperature T
/// and the measured noise density at the digitizer.
struct CalibrationPoint {
    double temperature_k = 0.0;
    double noise_density = 0.0; // V^2/Hz
    double stderr_ = 0.0;       // V^2/Hz, optional (0 = unknown)
};

enum class FitWeighting { uniform, stderr_weights };

struct CalibrationFit {
    double gain_linear = 0.0;
    double gain_db = 0.0;
    double n_add = 0.0;
    double se_gain = 0.0;    // 1-sigma standard errors
    double se_n_add = 0.0;
    double ci95_gain = 0.0;  // Student-t 95% half-widths
    double ci95_n_add = 0.0;
    double residual_norm = 0.0;
    int dof = 0;
    bool negative_n_add = false; // reported as-is, flagged instead of clamped
};

/// Expected noise density of a matched load at temperature T seen through a
/// chain with gain G and added noise n_add:
///   N = hbar omega B R G [ (1/2) coth(hbar omega / (2 k_B T)) + n_add ].
/// T -> 0 leaves the bracket at 1/2 + n_add; for k_B T >> hbar omega the
/// slope dN/dT approaches k_B B R G.
double noise_density_model(double temperature_k, double gain_linear, double n_add,
                           const BandParams& band, double omega);

/// Weighted linear least squares for (G, G*n_add); the model is linear in both
/// products, so the solve is exact (no iteration, no initial guess).
/// Throws NumericalError for rank-deficient designs or a non-positive fitted
/// gain. Two distinct temperatures give the exact determined solution with
/// zero residual and zero error bars.
CalibrationFit fit_gain_noise(const std::vector<CalibrationPoint>& points, const BandParams& band,
                              double omega, FitWeighting weighting = FitWeighting::uniform);

struct CalibratedNumber {
    double value = 0.0;
    bool negative = false;
};

/// Invert the idler chain on a measured record second moment:
///   n_I = <|a_det|^2>/G_I − (n_add,I + 1).
/// Statistical noise can push the result below zero; it is returned as-is
/// with a flag (receiver variance terms clamp it, reports do not).
CalibratedNumber calibrate_idler_number(double detected_record_moment, double g_i, double n_add_i);

/// Read calibration points from CSV (columns: T_K, noise_density_V2Hz, stderr;
/// a header line is skipped if present).
std::vector<CalibrationPoint> read_calibration_csv(const std::string& path);

/// Key-value JSON report of a fit.
std::string fit_report_json(const CalibrationFit& fit);

} // namespace mqi
