#include <cmath>

#include "doctest.h"
#include "mqi/experiments.hpp"

using namespace mqi;

namespace {

SweepConfig small_config() {
    SweepConfig cfg;
    cfg.variable = SweepVariable::n_s;
    cfg.grid = {0.2, 1.0};
    cfg.m_per_point = 10000;
    cfg.m_coherent = 10000;
    cfg.repetitions = 2;
    cfg.master_seed = 31;
    return cfg;
}

const SweepRow& find_row(const std::vector<SweepRow>& rows, double value, SourceKind s,
                         Receiver r) {
    for (const auto& row : rows) {
        if (!row.source_free && row.sweep_value == value && row.source == s && row.receiver == r)
            return row;
    }
    throw std::runtime_error("row not found");
}

} // namespace

TEST_CASE("distance to transmissivity: power law") {
    DistanceModel m;
    m.kind = DistanceModel::Kind::power_law;
    m.eta_ref = 0.3;
    m.d_ref = 1.0;
    m.exponent = 2.0;
    CHECK(distance_to_eta(m, 1.0) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(distance_to_eta(m, 2.0) == doctest::Approx(0.075).epsilon(1e-12));
    CHECK(distance_to_eta(m, 0.01) == doctest::Approx(1.0)); // clamped
    CHECK_THROWS_AS(distance_to_eta(m, 0.0), std::domain_error);
}

TEST_CASE("distance to transmissivity: dB-linear table") {
    DistanceModel m;
    m.kind = DistanceModel::Kind::table;
    m.table_db = {{0.5, -10.0}, {1.0, -20.0}};
    CHECK(distance_to_eta(m, 0.75) == doctest::Approx(db_to_linear(-15.0)).epsilon(1e-12));
    CHECK(distance_to_eta(m, 0.5) == doctest::Approx(db_to_linear(-10.0)).epsilon(1e-12));
    CHECK(distance_to_eta(m, 1.0) == doctest::Approx(db_to_linear(-20.0)).epsilon(1e-12));
    CHECK_THROWS_AS(distance_to_eta(m, 1.2), std::out_of_range);
    CHECK_THROWS_AS(distance_to_eta(m, 0.4), std::out_of_range);

    DistanceModel bad = m;
    bad.table_db = {{1.0, -20.0}, {0.5, -10.0}};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("purity models") {
    PurityModel c;
    c.kind = PurityModel::Kind::constant;
    c.value = 0.8;
    CHECK(c.at(3.0) == doctest::Approx(0.8));

    PurityModel r;
    r.kind = PurityModel::Kind::rational;
    r.p0 = 0.9;
    r.beta = 0.1;
    CHECK(r.at(0.0) == doctest::Approx(0.9));
    CHECK(r.at(1.0) == doctest::Approx(0.9 / 1.1).epsilon(1e-12));

    PurityModel t;
    t.kind = PurityModel::Kind::table;
    t.table = {{0.1, 0.9}, {1.0, 0.8}};
    CHECK(t.at(0.55) == doctest::Approx(0.85).epsilon(1e-12));
    CHECK(t.at(0.01) == doctest::Approx(0.9)); // clamped ends
    CHECK(t.at(5.0) == doctest::Approx(0.8));
}

TEST_CASE("thermal occupation") {
    CHECK(thermal_occupation(2.0 * kPi * 10e9, 0.0) == 0.0);
    // k_B T / (hbar omega) >> 1: n ~ k_B T/(hbar omega) - 1/2
    const double omega = 2.0 * kPi * 10.09e9;
    const double ratio = kPhys.k_b * 293.0 / (kPhys.hbar * omega);
    CHECK(thermal_occupation(omega, 293.0) == doctest::Approx(ratio - 0.5).epsilon(1e-3));
}

TEST_CASE("zero transmissivity point reports zero snr everywhere") {
    SweepConfig cfg = small_config();
    cfg.variable = SweepVariable::eta;
    cfg.grid = {0.0};
    cfg.fixed_n_s = 0.5;
    cfg.repetitions = 1;
    const auto rows = run_point(cfg, 0.0);
    REQUIRE(!rows.empty());
    for (const auto& row : rows) {
        CHECK(row.snr_analytic == doctest::Approx(0.0));
        if (!std::isnan(row.snr_mc)) CHECK(row.snr_mc < 1e-3);
        CHECK(row.error_prob == doctest::Approx(0.5));
    }
}

TEST_CASE("worker count does not change the output bytes") {
    SweepConfig cfg = small_config();
    cfg.workers = 1;
    SweepResult a = run_sweep(cfg);
    cfg.workers = 4;
    SweepResult b = run_sweep(cfg);
    CHECK(sweep_csv(a) == sweep_csv(b));
    CHECK(summary_json(a) == summary_json(b));
}

TEST_CASE("single-point sweep equals run_point") {
    SweepConfig cfg = small_config();
    cfg.grid = {0.7};
    const SweepResult swept = run_sweep(cfg);
    SweepResult pointwise;
    pointwise.config = cfg;
    pointwise.rows = run_point(cfg, 0.7);
    CHECK(sweep_csv(swept) == sweep_csv(pointwise));
}

TEST_CASE("sweep rows carry witnesses, analytic values, and error probabilities") {
    SweepConfig cfg = small_config();
    const auto result = run_sweep(cfg);
    const auto& qi = find_row(result.rows, 0.2, SourceKind::tmsv, Receiver::pc_calibrated);
    CHECK(!std::isnan(qi.delta));
    CHECK(qi.delta < 1.0); // entangled at n_s = 0.2 with default purity 1
    CHECK(qi.snr_analytic > 0.0);
    CHECK(qi.error_prob ==
          doctest::Approx(error_probability(qi.snr_analytic, qi.m)).epsilon(1e-12));
    // MC within 3 jackknife/repetition errors of the closed form (in dB)
    CHECK(std::abs(qi.snr_mc_db - qi.snr_analytic_db) < std::max(3.0 * qi.stderr_db, 0.2));

    const auto& hom = find_row(result.rows, 0.2, SourceKind::coherent, Receiver::homodyne);
    CHECK(std::isnan(hom.delta));
    CHECK(hom.m == cfg.m_coherent);

    bool has_passive = false;
    for (const auto& row : result.rows)
        if (row.source_free && row.receiver == Receiver::passive) has_passive = true;
    CHECK(has_passive);
}

TEST_CASE("analytic monotonicity in eta and n_s") {
    SweepConfig cfg = small_config();
    cfg.variable = SweepVariable::eta;
    cfg.with_mc = false;
    cfg.grid = {0.001, 0.01, 0.1, 0.3, 1.0};
    cfg.fixed_n_s = 0.5;
    const auto result = run_sweep(cfg);
    for (SourceKind s : {SourceKind::tmsv, SourceKind::coherent}) {
        for (Receiver r : {Receiver::pc_raw, Receiver::pc_calibrated, Receiver::homodyne,
                           Receiver::heterodyne}) {
            double prev = -1;
            bool any = false;
            for (double eta : cfg.grid) {
                try {
                    const auto& row = find_row(result.rows, eta, s, r);
                    CHECK(row.snr_analytic >= prev);
                    prev = row.snr_analytic;
                    any = true;
                } catch (const std::runtime_error&) {
                    break; // receiver does not apply to this source
                }
            }
            (void)any;
        }
    }

    SweepConfig cn = small_config();
    cn.with_mc = false;
    cn.grid = {0.05, 0.2, 0.8, 3.0};
    const auto rn = run_sweep(cn);
    for (Receiver r : {Receiver::homodyne, Receiver::heterodyne}) {
        double prev = -1;
        for (double n : cn.grid) {
            const auto& row = find_row(rn.rows, n, SourceKind::coherent, r);
            CHECK(row.snr_analytic >= prev);
            prev = row.snr_analytic;
        }
    }
}

TEST_CASE("distance sweep resolves eta through the model") {
    SweepConfig cfg = small_config();
    cfg.variable = SweepVariable::distance;
    cfg.with_mc = false;
    cfg.distance.kind = DistanceModel::Kind::table;
    cfg.distance.table_db = {{0.1, -8.0}, {1.0, -23.0}};
    cfg.grid = {0.1, 0.55, 1.0};
    const auto result = run_sweep(cfg);
    const auto& row = find_row(result.rows, 0.55, SourceKind::tmsv, Receiver::pc_calibrated);
    CHECK(row.eta == doctest::Approx(distance_to_eta(cfg.distance, 0.55)).epsilon(1e-12));
}

TEST_CASE("temperature sweep rescales the environment") {
    SweepConfig cfg = small_config();
    cfg.variable = SweepVariable::temperature;
    cfg.with_mc = false;
    cfg.grid = {4.0, 77.0, 293.0};
    const auto result = run_sweep(cfg);
    // passive snr grows with environment temperature? n0 grows with n_env, so
    // the passive ratio falls; just check rows resolved with distinct etas/chains
    double prev = INFINITY;
    for (double t : cfg.grid) {
        for (const auto& row : result.rows) {
            if (row.source_free && row.sweep_value == t) {
                CHECK(row.snr_analytic < prev);
                prev = row.snr_analytic;
            }
        }
    }
}

TEST_CASE("failing point aborts the sweep but keeps earlier rows") {
    SweepConfig cfg = small_config();
    cfg.variable = SweepVariable::distance;
    cfg.with_mc = false;
    cfg.distance.kind = DistanceModel::Kind::table;
    cfg.distance.table_db = {{0.1, -8.0}, {1.0, -23.0}};
    cfg.grid = {0.2, 0.6, 2.0}; // the last distance is outside the table
    const SweepResult result = run_sweep(cfg);
    CHECK(result.aborted);
    CHECK(result.error.find("at distance = 2") != std::string::npos);
    CHECK(!result.rows.empty());
    for (const auto& row : result.rows) CHECK(row.sweep_value < 2.0);
    CHECK(sweep_csv(result).find("# aborted:") != std::string::npos);

    CHECK_THROWS_WITH_AS(run_point(cfg, 2.0),
                         doctest::Contains("at distance = 2"), std::domain_error);
}

TEST_CASE("analytic error bands follow the chain calibration uncertainties") {
    SweepConfig cfg = small_config();
    cfg.with_mc = false;
    cfg.grid = {0.5};
    const auto rows = run_point(cfg, 0.5);
    for (const auto& row : rows) {
        if (row.receiver == Receiver::passive) continue;
        CHECK(row.analytic_band_db > 0.0);
        CHECK(row.analytic_band_db < 1.0); // quoted errors are hundredths of a dB
    }

    SweepConfig quiet = cfg;
    quiet.chain.g_s_db_err = 0.0;
    quiet.chain.g_i_db_err = 0.0;
    quiet.chain.n_add_i_err = 0.0;
    const auto rows2 = run_point(quiet, 0.5);
    for (const auto& row : rows2) CHECK(std::isnan(row.analytic_band_db));
}

TEST_CASE("config validation rejects malformed sweeps") {
    SweepConfig cfg = small_config();
    cfg.grid.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.grid = {1.0, 0.5};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.m_per_point = 10;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.variable = SweepVariable::eta;
    cfg.grid = {0.5, 1.5};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("csv and summary formats") {
    SweepConfig cfg = small_config();
    cfg.with_mc = false;
    const auto result = run_sweep(cfg);
    const std::string csv = sweep_csv(result);
    CHECK(csv.rfind("sweep_variable,sweep_value,source,receiver,n_s,eta,m,repetitions,"
                    "snr_db_mc,stderr_db,snr_db_analytic,analytic_band_db,delta,"
                    "error_probability\n",
                    0) == 0);
    const std::string fig = figure_csv(result);
    CHECK(fig.find("tmsv_pc_calibrated_db_analytic") != std::string::npos);

    // a sweep across the entanglement boundary reports the delta crossing
    SweepConfig wide = small_config();
    wide.with_mc = false;
    wide.grid = {0.5, 2.0, 3.5, 5.0, 8.0};
    wide.purity.kind = PurityModel::Kind::rational;
    wide.purity.p0 = 0.904534034 * 1.0045;
    wide.purity.beta = 0.001;
    const auto sum = summary_json(run_sweep(wide));
    CHECK(sum.find("delta_tmsv_reaches_1") != std::string::npos);
}
