#include "mqi/calibration.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mqi/errors.hpp"

namespace mqi {

namespace {

double coth(double x) { return 1.0 / std::tanh(x); }

double bracket_term(double temperature_k, double omega) {
    return 0.5 * coth(kPhys.hbar * omega / (2.0 * kPhys.k_b * temperature_k));
}

} // namespace

double noise_density_model(double temperature_k, double gain_linear, double n_add,
                           const BandParams& band, double omega) {
    if (temperature_k <= 0) throw std::domain_error("noise_density_model: T must be > 0");
    const double scale = kPhys.hbar * omega * band.bandwidth_hz * band.impedance_ohm * gain_linear;
    return scale * (bracket_term(temperature_k, omega) + n_add);
}

CalibrationFit fit_gain_noise(const std::vector<CalibrationPoint>& points, const BandParams& band,
                              double omega, FitWeighting weighting) {
    const std::size_t n = points.size();
    if (n < 2) throw NumericalError("fit_gain_noise: need at least two calibration points");

    // Model: N_i = s * [G * h(T_i) + K], h = (1/2)coth(...), K = G * n_add,
    // s = hbar omega B R. Linear in (G, K): exact weighted least squares.
    const double s = kPhys.hbar * omega * band.bandwidth_hz * band.impedance_ohm;
    double sww = 0, swh = 0, swh2 = 0, swy = 0, swhy = 0;
    for (const auto& p : points) {
        if (p.temperature_k <= 0)
            throw NumericalError("fit_gain_noise: temperatures must be positive");
        double w = 1.0;
        if (weighting == FitWeighting::stderr_weights) {
            if (p.stderr_ <= 0)
                throw NumericalError("fit_gain_noise: stderr weighting requires positive stderr");
            w = 1.0 / (p.stderr_ * p.stderr_);
        }
        const double h = bracket_term(p.temperature_k, omega);
        const double y = p.noise_density / s;
        // stderr scales with the same s as the density
        if (weighting == FitWeighting::stderr_weights) w *= s * s;
        sww += w;
        swh += w * h;
        swh2 += w * h * h;
        swy += w * y;
        swhy += w * h * y;
    }
    const double det = swh2 * sww - swh * swh;
    const double scale2 = swh2 * sww;
    if (!(det > 1e-12 * std::max(scale2, 1e-300)))
        throw NumericalError("fit_gain_noise: rank-deficient design (temperatures too similar)");

    const double g = (sww * swhy - swh * swy) / det;
    const double k = (swh2 * swy - swh * swhy) / det;
    if (!(g > 0)) throw NumericalError("fit_gain_noise: fitted gain is not positive");

    CalibrationFit fit;
    fit.gain_linear = g;
    fit.gain_db = linear_to_db(g);
    fit.n_add = k / g;
    fit.negative_n_add = fit.n_add < 0.0;
    fit.dof = static_cast<int>(n) - 2;

    // Weighted residual sum of squares; the reported norm is relative to the
    // weighted data norm so it is scale-free.
    double rss = 0, ynorm = 0;
    for (const auto& p : points) {
        double w = 1.0;
        if (weighting == FitWeighting::stderr_weights) w = (s / p.stderr_) * (s / p.stderr_);
        const double y = p.noise_density / s;
        const double r = y - (g * bracket_term(p.temperature_k, omega) + k);
        rss += w * r * r;
        ynorm += w * y * y;
    }
    fit.residual_norm = ynorm > 0 ? std::sqrt(rss / ynorm) : std::sqrt(rss);

    if (fit.dof > 0) {
        // Parameter covariance of (G, K): sigma2 * (X^T W X)^{-1}.
        // With true inverse-variance weights sigma2 = 1; with uniform weights
        // the noise scale is estimated from the residuals.
        const double sigma2 =
            (weighting == FitWeighting::uniform) ? rss / fit.dof : 1.0;
        const double var_g = sigma2 * sww / det;
        const double var_k = sigma2 * swh2 / det;
        const double cov_gk = -sigma2 * swh / det;
        fit.se_gain = std::sqrt(std::max(var_g, 0.0));
        // n_add = K/G: first-order error propagation with the full covariance.
        const double dk = 1.0 / g;
        const double dg = -k / (g * g);
        const double var_n =
            dk * dk * var_k + dg * dg * var_g + 2.0 * dk * dg * cov_gk;
        fit.se_n_add = std::sqrt(std::max(var_n, 0.0));
        const boost::math::students_t_distribution<double> t_dist(fit.dof);
        const double t = boost::math::quantile(t_dist, 0.975);
        fit.ci95_gain = t * fit.se_gain;
        fit.ci95_n_add = t * fit.se_n_add;
    }
    return fit;
}

CalibratedNumber calibrate_idler_number(double detected_record_moment, double g_i,
                                        double n_add_i) {
    if (g_i <= 0) throw std::domain_error("calibrate_idler_number: gain must be positive");
    CalibratedNumber out;
    out.value = detected_record_moment / g_i - (n_add_i + 1.0);
    out.negative = out.value < 0.0;
    return out;
}

std::vector<CalibrationPoint> read_calibration_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("read_calibration_csv: cannot open " + path);
    std::vector<CalibrationPoint> points;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        CalibrationPoint p;
        if (!(row >> p.temperature_k >> p.noise_density)) {
            if (lineno == 1) continue; // header
            throw ConfigError("read_calibration_csv: bad row " + std::to_string(lineno) +
                              " in " + path);
        }
        row >> p.stderr_;
        points.push_back(p);
    }
    return points;
}

std::string fit_report_json(const CalibrationFit& fit) {
    nlohmann::json j;
    j["gain_linear"] = fit.gain_linear;
    j["gain_db"] = fit.gain_db;
    j["n_add"] = fit.n_add;
    j["se_gain"] = fit.se_gain;
    j["se_n_add"] = fit.se_n_add;
    j["ci95_gain"] = fit.ci95_gain;
    j["ci95_n_add"] = fit.ci95_n_add;
    j["residual_norm"] = fit.residual_norm;
    j["dof"] = fit.dof;
    j["negative_n_add"] = fit.negative_n_add;
    return j.dump(2);
}

} // namespace mqi
