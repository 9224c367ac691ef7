#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mqi/calibration.hpp"
#include "mqi/chain.hpp"
#include "mqi/dsp.hpp"
#include "mqi/rng.hpp"

using namespace mqi;

namespace {

std::vector<CalibrationPoint> synthetic_points(double gain, double n_add, const BandParams& band,
                                               double omega, const std::vector<double>& temps) {
    std::vector<CalibrationPoint> pts;
    for (double t : temps) pts.push_back({t, noise_density_model(t, gain, n_add, band, omega), 0.0});
    return pts;
}

} // namespace

TEST_CASE("noise density model limits") {
    const BandParams band = reference_band();
    const double g = db_to_linear(94.25);
    const double n_add = 14.91;
    const double scale = kPhys.hbar * band.omega_i * band.bandwidth_hz * band.impedance_ohm * g;

    // T -> 0: the bracket collapses to 1/2 + n_add
    const double cold = noise_density_model(1e-3, g, n_add, band, band.omega_i);
    CHECK(cold / scale == doctest::Approx(0.5 + n_add).epsilon(1e-6));

    // slope at 5 K approaches k_B B R G (finite-difference oracle)
    const double h = 1e-3;
    const double slope = (noise_density_model(5.0 + h, g, n_add, band, band.omega_i) -
                          noise_density_model(5.0 - h, g, n_add, band, band.omega_i)) /
                         (2.0 * h);
    const double rj = kPhys.k_b * band.bandwidth_hz * band.impedance_ohm * g;
    CHECK(std::abs(slope - rj) / rj < 0.005);

    // high temperature: linear in T (second difference negligible)
    const double n20 = noise_density_model(20.0, g, n_add, band, band.omega_i);
    const double n30 = noise_density_model(30.0, g, n_add, band, band.omega_i);
    const double n40 = noise_density_model(40.0, g, n_add, band, band.omega_i);
    CHECK(std::abs((n40 - n30) - (n30 - n20)) / (n30 - n20) < 1e-3);

    CHECK_THROWS_AS(noise_density_model(0.0, g, n_add, band, band.omega_i), std::domain_error);
}

TEST_CASE("generate-then-fit recovers the reference chain exactly on noiseless data") {
    const BandParams band = reference_band();
    const double g = db_to_linear(94.25);
    const double n_add = 14.91;
    const auto pts = synthetic_points(g, n_add, band, band.omega_i,
                                      {0.045, 0.07, 0.11, 0.18, 0.28, 0.45, 0.7, 1.0});
    const CalibrationFit fit = fit_gain_noise(pts, band, band.omega_i);
    CHECK(std::abs(fit.gain_linear - g) / g < 1e-9);
    CHECK(std::abs(fit.n_add - n_add) / n_add < 1e-9);
    CHECK(fit.gain_db == doctest::Approx(94.25).epsilon(1e-9));
    CHECK_FALSE(fit.negative_n_add);
}

TEST_CASE("two distinct temperatures give the determined solution") {
    const BandParams band = reference_band();
    const auto pts = synthetic_points(1e9, 12.0, band, band.omega_i, {0.1, 0.4});
    const CalibrationFit fit = fit_gain_noise(pts, band, band.omega_i);
    CHECK(fit.gain_linear == doctest::Approx(1e9).epsilon(1e-9));
    CHECK(fit.n_add == doctest::Approx(12.0).epsilon(1e-9));
    CHECK(fit.residual_norm < 1e-12); // relative; pure roundoff for a determined system
    CHECK(fit.dof == 0);
}

TEST_CASE("degenerate designs are rejected") {
    const BandParams band = reference_band();
    auto pts = synthetic_points(1e9, 12.0, band, band.omega_i, {0.2, 0.2, 0.2});
    CHECK_THROWS_AS(fit_gain_noise(pts, band, band.omega_i), NumericalError);
    CHECK_THROWS_AS(fit_gain_noise({pts[0]}, band, band.omega_i), NumericalError);

    // data implying a negative gain
    std::vector<CalibrationPoint> bad = {{0.05, 5e-12, 0.0}, {0.5, 1e-12, 0.0}};
    CHECK_THROWS_AS(fit_gain_noise(bad, band, band.omega_i), NumericalError);
}

TEST_CASE("coverage of the 95% intervals under 1% noise") {
    const BandParams band = reference_band();
    const double g = db_to_linear(94.25);
    const double n_add = 14.91;
    const std::vector<double> temps = {0.05, 0.077, 0.12, 0.18, 0.28, 0.43, 0.66, 1.0};
    int cover_gain = 0, cover_n = 0;
    const int trials = 200;
    for (int trial = 0; trial < trials; ++trial) {
        RecordRng rng(derive_key(4242, trial), 0);
        std::vector<CalibrationPoint> pts;
        for (double t : temps) {
            const double truth = noise_density_model(t, g, n_add, band, band.omega_i);
            double z0, z1;
            rng.next_normal_pair(z0, z1);
            pts.push_back({t, truth * (1.0 + 0.01 * z0), 0.01 * truth});
        }
        const CalibrationFit fit =
            fit_gain_noise(pts, band, band.omega_i, FitWeighting::stderr_weights);
        if (std::abs(fit.gain_linear - g) <= fit.ci95_gain) ++cover_gain;
        if (std::abs(fit.n_add - n_add) <= fit.ci95_n_add) ++cover_n;
    }
    CHECK(cover_gain >= 186); // 93% of 200
    CHECK(cover_n >= 186);
}

TEST_CASE("error bars shrink with replication") {
    const BandParams band = reference_band();
    const double g = db_to_linear(94.25);
    std::vector<CalibrationPoint> noisy;
    RecordRng rng(derive_key(7, 0), 0);
    for (double t : {0.05, 0.1, 0.2, 0.4, 0.8}) {
        const double truth = noise_density_model(t, g, 14.91, band, band.omega_i);
        double z0, z1;
        rng.next_normal_pair(z0, z1);
        noisy.push_back({t, truth * (1.0 + 0.01 * z0), 0.01 * truth});
    }
    std::vector<CalibrationPoint> repeated;
    for (int r = 0; r < 4; ++r) repeated.insert(repeated.end(), noisy.begin(), noisy.end());
    const auto one = fit_gain_noise(noisy, band, band.omega_i, FitWeighting::stderr_weights);
    const auto four = fit_gain_noise(repeated, band, band.omega_i, FitWeighting::stderr_weights);
    CHECK(four.se_gain == doctest::Approx(one.se_gain / 2.0).epsilon(0.05));
}

TEST_CASE("idler calibration inverts the chain") {
    const ChainParams chain = reference_chain();
    const double g_i = chain.g_i_total;
    const double n_add_i = chain.n_add_i;

    CHECK(calibrate_idler_number(g_i * (n_add_i + 1.0), g_i, n_add_i).value ==
          doctest::Approx(0.0).epsilon(1e-12));
    CHECK(calibrate_idler_number(g_i * (0.5 + n_add_i + 1.0), g_i, n_add_i).value ==
          doctest::Approx(0.5).epsilon(1e-12));
    CHECK(calibrate_idler_number(g_i * (n_add_i + 0.5), g_i, n_add_i).negative);
    CHECK_THROWS_AS(calibrate_idler_number(1.0, 0.0, 1.0), std::domain_error);

    // exact inverse on detected moments
    for (double n : {0.0, 0.5, 2.0}) {
        const auto det = detect_idler(tmsv_moments(n), chain);
        const double record_moment = det.n_i + det.vac_i; // <|a|^2> of the detected record
        CHECK(calibrate_idler_number(record_moment, g_i, n_add_i).value ==
              doctest::Approx(n).epsilon(1e-9));
    }

    // statistical inverse on sampled records
    const auto det = detect_idler(tmsv_moments(1.0, 1.0), chain);
    const auto est = estimate_moments(sample_records(det, 380000, 51));
    const auto cal = calibrate_idler_number(est.record_moment_i, g_i, n_add_i);
    CHECK(std::abs(cal.value - 1.0) < 5.0 * est.stderr_.n_i / g_i);
}

TEST_CASE("calibration CSV reader") {
    const auto path = std::filesystem::temp_directory_path() / "mqi_cal_points.csv";
    {
        std::ofstream out(path);
        out << "T_K,noise_density_V2Hz,stderr\n";
        out << "0.05,1.25e-12,1e-14\n";
        out << "0.5,4.5e-12,2e-14\n";
    }
    const auto pts = read_calibration_csv(path.string());
    REQUIRE(pts.size() == 2);
    CHECK(pts[0].temperature_k == doctest::Approx(0.05));
    CHECK(pts[1].noise_density == doctest::Approx(4.5e-12));
    CHECK(pts[1].stderr_ == doctest::Approx(2e-14));
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_calibration_csv("/nonexistent.csv"), ConfigError);
}

TEST_CASE("fit report JSON carries the headline numbers") {
    const BandParams band = reference_band();
    const auto pts = synthetic_points(db_to_linear(94.25), 14.91, band, band.omega_i,
                                      {0.05, 0.1, 0.2, 0.4, 0.8});
    const auto fit = fit_gain_noise(pts, band, band.omega_i);
    const auto json_text = fit_report_json(fit);
    CHECK(json_text.find("\"gain_db\"") != std::string::npos);
    CHECK(json_text.find("\"n_add\"") != std::string::npos);
    CHECK(json_text.find("\"ci95_gain\"") != std::string::npos);
}
