// Command-line front end: sweep/point/calibrate/demod/selftest subcommands.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "mqi/calibration.hpp"
#include "mqi/config.hpp"
#include "mqi/dsp.hpp"
#include "mqi/errors.hpp"
#include "mqi/experiments.hpp"
#include "mqi/selftest.hpp"

namespace {

namespace fs = std::filesystem;

std::string default_out_dir() {
    if (const char* env = std::getenv("MQI_OUT_DIR")) return env;
    return ".";
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw mqi::ConfigError("cannot write " + path.string());
    out << content;
}

void emit_sweep_artifacts(const mqi::SweepResult& result, const std::string& out_dir,
                          bool verbose) {
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    write_file(dir / "sweep.csv", mqi::sweep_csv(result));
    write_file(dir / "summary.json", mqi::summary_json(result));
    if (!result.config.figure.empty())
        write_file(dir / (result.config.figure + "_data.csv"), mqi::figure_csv(result));
    if (verbose) {
        std::cerr << "wrote " << (dir / "sweep.csv").string() << " (" << result.rows.size()
                  << " rows)\n";
    }
}

struct CommonFlags {
    std::string config_path;
    std::string out_dir = default_out_dir();
    std::int64_t seed = -1;
    int workers = 0;
    bool verbose = false;
};

void apply_overrides(mqi::AppConfig& app, const CommonFlags& flags) {
    if (flags.seed >= 0) app.sweep.master_seed = static_cast<std::uint64_t>(flags.seed);
    if (flags.workers > 0) app.sweep.workers = flags.workers;
    if (flags.out_dir != default_out_dir() || app.out_dir == ".") app.out_dir = flags.out_dir;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"microwave quantum illumination simulator"};
    app.require_subcommand(0, 1);
    app.footer("Config keys are documented with units via: mqi --config-keys");
    bool show_keys = false;
    app.add_flag("--config-keys", show_keys, "print the config key reference and exit");

    CommonFlags sweep_flags;
    auto* sweep_cmd = app.add_subcommand("sweep", "run a parameter sweep from a config file");
    sweep_cmd->add_option("--config", sweep_flags.config_path, "JSON config file")->required();
    sweep_cmd->add_option("--out", sweep_flags.out_dir, "output directory (env MQI_OUT_DIR)");
    sweep_cmd->add_option("--seed", sweep_flags.seed, "master seed override");
    sweep_cmd->add_option("--workers", sweep_flags.workers,
                          "worker threads; output bytes are worker-independent");
    sweep_cmd->add_flag("-v,--verbose", sweep_flags.verbose, "progress notes on stderr");

    CommonFlags point_flags;
    double point_value = NAN;
    std::size_t emit_raw = 0;
    auto* point_cmd = app.add_subcommand("point", "run a single sweep point");
    point_cmd->add_option("--config", point_flags.config_path, "JSON config file")->required();
    point_cmd->add_option("--value", point_value, "sweep-variable value (default: first grid entry)");
    point_cmd->add_option("--out", point_flags.out_dir, "output directory");
    point_cmd->add_option("--seed", point_flags.seed, "master seed override");
    point_cmd->add_option("--workers", point_flags.workers, "worker threads");
    point_cmd->add_option("--emit-raw", emit_raw,
                          "also write N synthesized IF records per hypothesis (point_h0.bin/point_h1.bin)");
    point_cmd->add_flag("-v,--verbose", point_flags.verbose, "progress notes on stderr");

    std::string cal_points, cal_out = default_out_dir();
    double cal_omega_ghz = 6.8;
    double cal_bandwidth = 200e3, cal_impedance = 50.0;
    bool cal_weighted = false;
    auto* cal_cmd = app.add_subcommand("calibrate", "fit gain and added noise from load sweeps");
    cal_cmd->add_option("--points", cal_points, "CSV of T_K,noise_density_V2Hz[,stderr]")->required();
    cal_cmd->add_option("--omega-ghz", cal_omega_ghz, "channel frequency, GHz");
    cal_cmd->add_option("--bandwidth-hz", cal_bandwidth, "analysis bandwidth, Hz");
    cal_cmd->add_option("--impedance-ohm", cal_impedance, "line impedance, ohm");
    cal_cmd->add_flag("--weighted", cal_weighted, "weight points by their stderr column");
    cal_cmd->add_option("--out", cal_out, "output directory");

    std::string demod_raw, demod_out = default_out_dir();
    double demod_gain_db = 0.0, demod_gain_i_db = NAN;
    double demod_omega_ghz = 10.09, demod_omega_i_ghz = NAN;
    auto* demod_cmd = app.add_subcommand("demod", "demodulate a raw IF record stream");
    demod_cmd->add_option("--raw", demod_raw, "record stream file (.bin)")->required();
    demod_cmd->add_option("--gain-db", demod_gain_db, "signal chain gain, dB (0 = detected units)");
    demod_cmd->add_option("--omega-ghz", demod_omega_ghz, "signal frequency, GHz");
    demod_cmd->add_option("--gain-i-db", demod_gain_i_db, "idler chain gain, dB (default: signal value)");
    demod_cmd->add_option("--omega-i-ghz", demod_omega_i_ghz, "idler frequency, GHz (default: signal value)");
    demod_cmd->add_option("--out", demod_out, "output directory");

    std::int64_t selftest_seed = 17;
    std::string inject_fault;
    auto* self_cmd = app.add_subcommand("selftest", "run the fast invariant suite");
    self_cmd->add_option("--seed", selftest_seed, "RNG seed for the suite");
    self_cmd->add_option("--inject-fault", inject_fault,
                         "corrupt one formula on purpose (duan|pc_snr|roundtrip)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (show_keys) {
            std::cout << mqi::config_key_reference();
            return 0;
        }
        if (sweep_cmd->parsed()) {
            mqi::AppConfig cfg = mqi::load_config(sweep_flags.config_path);
            apply_overrides(cfg, sweep_flags);
            const mqi::SweepResult result = mqi::run_sweep(cfg.sweep);
            emit_sweep_artifacts(result, cfg.out_dir, sweep_flags.verbose);
            if (result.aborted) {
                std::cerr << "sweep aborted (partial results written): " << result.error << '\n';
                return 3;
            }
            return 0;
        }
        if (point_cmd->parsed()) {
            mqi::AppConfig cfg = mqi::load_config(point_flags.config_path);
            apply_overrides(cfg, point_flags);
            const double value = std::isnan(point_value) ? cfg.sweep.grid.front() : point_value;
            mqi::SweepResult result;
            result.config = cfg.sweep;
            result.config.grid = {value};
            result.rows = mqi::run_point(cfg.sweep, value);
            fs::create_directories(cfg.out_dir);
            write_file(fs::path(cfg.out_dir) / "point.csv", mqi::sweep_csv(result));
            if (emit_raw > 0) {
                const auto src = mqi::rotated_to_real(
                    mqi::tmsv_moments(result.rows.front().n_s,
                                      cfg.sweep.purity.at(result.rows.front().n_s)));
                for (int hyp = 0; hyp < 2; ++hyp) {
                    const auto det = mqi::detect_pair(
                        src, cfg.sweep.chain,
                        {result.rows.front().eta, static_cast<mqi::Hypothesis>(hyp)});
                    auto batch = mqi::sample_records(det, emit_raw, cfg.sweep.master_seed,
                                                     hyp ? 11 : 10);
                    batch.hypothesis = static_cast<mqi::Hypothesis>(hyp);
                    const auto raw = mqi::synthesize_if(batch, cfg.sweep.band, {});
                    mqi::write_raw(raw, (fs::path(cfg.out_dir) /
                                         ("point_h" + std::to_string(hyp) + ".bin")).string());
                }
            }
            return 0;
        }
        if (cal_cmd->parsed()) {
            const auto points = mqi::read_calibration_csv(cal_points);
            mqi::BandParams band = mqi::reference_band();
            band.bandwidth_hz = cal_bandwidth;
            band.impedance_ohm = cal_impedance;
            band.sample_rate_hz = cal_bandwidth * band.record_len; // keep invariant satisfied
            const double omega = 2.0 * mqi::kPi * cal_omega_ghz * 1e9;
            const auto fit = mqi::fit_gain_noise(points, band, omega,
                                                 cal_weighted ? mqi::FitWeighting::stderr_weights
                                                              : mqi::FitWeighting::uniform);
            const std::string report = mqi::fit_report_json(fit);
            std::cout << report << '\n';
            fs::create_directories(cal_out);
            write_file(fs::path(cal_out) / "calibration_fit.json", report + "\n");
            return 0;
        }
        if (demod_cmd->parsed()) {
            const auto raw = mqi::read_raw(demod_raw);
            mqi::VoltageScale scale;
            scale.gain_s = mqi::db_to_linear(demod_gain_db);
            scale.gain_i = std::isnan(demod_gain_i_db) ? scale.gain_s
                                                       : mqi::db_to_linear(demod_gain_i_db);
            scale.omega_s = 2.0 * mqi::kPi * demod_omega_ghz * 1e9;
            scale.omega_i = std::isnan(demod_omega_i_ghz) ? scale.omega_s
                                                          : 2.0 * mqi::kPi * demod_omega_i_ghz * 1e9;
            const auto batch = mqi::demodulate_records(raw, scale);
            fs::create_directories(demod_out);
            mqi::write_batch_csv(batch, (fs::path(demod_out) / "demod_batch.csv").string());
            const auto est = mqi::estimate_moments(batch);
            nlohmann::json j;
            j["records"] = est.count;
            j["n_s"] = est.moments.n_s;
            j["n_i"] = est.moments.n_i;
            j["re_c"] = est.moments.c.real();
            j["im_c"] = est.moments.c.imag();
            j["record_moment_s"] = est.record_moment_s;
            j["record_moment_i"] = est.record_moment_i;
            j["stderr_n_s"] = est.stderr_.n_s;
            j["stderr_n_i"] = est.stderr_.n_i;
            j["stderr_re_c"] = est.stderr_.re_c;
            std::cout << j.dump(2) << '\n';
            return 0;
        }
        if (self_cmd->parsed()) {
            mqi::SelftestOptions opts;
            opts.seed = static_cast<std::uint64_t>(selftest_seed);
            opts.inject_fault = inject_fault;
            const auto report = mqi::run_selftest(opts);
            std::cout << report.text();
            return report.all_passed() ? 0 : 1;
        }
        std::cout << app.help();
        return 0;
    } catch (const mqi::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const mqi::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    } catch (const std::domain_error& e) {
        std::cerr << "domain error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
