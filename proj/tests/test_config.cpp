#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mqi/config.hpp"
#include "mqi/moments.hpp"

using namespace mqi;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& body) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream(path) << body;
    return path;
}

} // namespace

TEST_CASE("chain section accepts dB or linear gains, not both") {
    const ChainParams a = chain_from_json_text(R"({"g_s_amp_db": 77.16})");
    CHECK(a.g_s_amp == doctest::Approx(db_to_linear(77.16)).epsilon(1e-12));
    const ChainParams b = chain_from_json_text(R"({"g_s_amp_linear": 1000.0})");
    CHECK(b.g_s_amp == doctest::Approx(1000.0));
    CHECK_THROWS_AS(chain_from_json_text(R"({"g_s_amp_db": 1.0, "g_s_amp_linear": 2.0})"),
                    ConfigError);
    CHECK_THROWS_AS(chain_from_json_text(R"({"n_amp_s": 1.0, "amp_noise_product": 5e8})"),
                    ConfigError);
}

TEST_CASE("chain JSON round trip") {
    ChainParams chain = reference_chain();
    chain.n_env = 123.0;
    const ChainParams back = chain_from_json_text(chain_to_json_text(chain));
    CHECK(back.g_s_amp == doctest::Approx(chain.g_s_amp).epsilon(1e-12));
    CHECK(back.g_i_total == doctest::Approx(chain.g_i_total).epsilon(1e-12));
    CHECK(back.n_amp_s == doctest::Approx(chain.n_amp_s).epsilon(1e-12));
    CHECK(back.n_env == doctest::Approx(123.0));
}

TEST_CASE("amp noise product derives the amplifier occupation") {
    const ChainParams c =
        chain_from_json_text(R"({"g_s_amp_db": 77.16, "amp_noise_product": 5e8})");
    CHECK((c.g_s_amp - 1.0) * (c.n_amp_s + 1.0) == doctest::Approx(5e8).epsilon(1e-12));
}

TEST_CASE("full config parsing, ranges, and error naming") {
    const auto good = write_temp("mqi_cfg_good.json", R"({
        "figure": "fig3a",
        "band": {"f_signal_ghz": 10.09},
        "chain": {"g_i_total_db": 94.25},
        "source": {"kinds": ["tmsv"], "purity": {"model": "constant", "value": 0.9}},
        "sweep": {"variable": "eta",
                   "grid": {"from": -20.0, "to": 0.0, "points": 5, "spacing": "db"},
                   "m_per_point": 2000, "m_coherent": 2000, "repetitions": 1, "seed": 3,
                   "receivers": ["pc_calibrated"]}
    })");
    const AppConfig app = load_config(good.string());
    CHECK(app.sweep.figure == "fig3a");
    CHECK(app.sweep.grid.size() == 5);
    CHECK(app.sweep.grid.front() == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(app.sweep.grid.back() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(app.sweep.purity.at(3.0) == doctest::Approx(0.9));
    std::filesystem::remove(good);

    const auto missing = write_temp("mqi_cfg_missing.json", R"({"sweep": {"variable": "n_s"}})");
    try {
        load_config(missing.string());
        CHECK(false);
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("sweep.grid") != std::string::npos);
    }
    std::filesystem::remove(missing);

    const auto badspacing = write_temp("mqi_cfg_spacing.json", R"({
        "sweep": {"variable": "n_s",
                   "grid": {"from": 0.0, "to": 1.0, "points": 4, "spacing": "log"},
                   "m_per_point": 2000, "m_coherent": 2000}
    })");
    CHECK_THROWS_AS(load_config(badspacing.string()), ConfigError);
    std::filesystem::remove(badspacing);

    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("log grids are geometric") {
    const auto cfg = write_temp("mqi_cfg_log.json", R"({
        "sweep": {"variable": "n_s",
                   "grid": {"from": 0.01, "to": 10.0, "points": 4, "spacing": "log"},
                   "m_per_point": 2000, "m_coherent": 2000, "receivers": ["pc_raw"]}
    })");
    const AppConfig app = load_config(cfg.string());
    REQUIRE(app.sweep.grid.size() == 4);
    CHECK(app.sweep.grid[1] / app.sweep.grid[0] ==
          doctest::Approx(app.sweep.grid[3] / app.sweep.grid[2]).epsilon(1e-9));
    std::filesystem::remove(cfg);
}

TEST_CASE("every shipped recipe parses and validates") {
    for (const char* name : {"fig2a.json", "fig2b.json", "fig3a.json", "fig3b.json",
                             "ceiling_purity1.json", "determinism.json"}) {
        const AppConfig app = load_config(std::string(MQI_CONFIG_DIR) + "/" + name);
        CHECK(!app.sweep.grid.empty());
        app.sweep.validate();
    }
    // the figure recipes share one purity law, anchored at the witness boundary
    const AppConfig fig2a = load_config(std::string(MQI_CONFIG_DIR) + "/fig2a.json");
    const double p45 = fig2a.sweep.purity.at(4.5);
    CHECK(duan_delta(tmsv_moments(4.5, p45)) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("config key reference names every section") {
    const std::string keys = config_key_reference();
    for (const char* k : {"band.f_signal_ghz", "chain.n_add_i", "source.purity.model",
                          "sweep.variable", "distance_model.kind", "chain.g_s_db_err"}) {
        CHECK(keys.find(k) != std::string::npos);
    }
}
