#include "mqi/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mqi/errors.hpp"

namespace mqi {

using nlohmann::json;

namespace {

double get_num(const json& j, const std::string& section, const std::string& key,
               double fallback, bool required = false) {
    if (!j.contains(key)) {
        if (required) throw ConfigError("missing config key: " + section + "." + key);
        return fallback;
    }
    if (!j[key].is_number()) throw ConfigError("config key must be a number: " + section + "." + key);
    return j[key].get<double>();
}

/// Gains come as exactly one of <name>_db / <name>_linear.
double get_gain(const json& j, const std::string& section, const std::string& name,
                double fallback_linear) {
    const std::string kdb = name + "_db";
    const std::string klin = name + "_linear";
    const bool has_db = j.contains(kdb);
    const bool has_lin = j.contains(klin);
    if (has_db && has_lin)
        throw ConfigError("config keys conflict: " + section + "." + kdb + " and " + klin);
    if (has_db) return db_to_linear(j[kdb].get<double>());
    if (has_lin) return j[klin].get<double>();
    return fallback_linear;
}

BandParams band_from_json(const json& j) {
    BandParams band = reference_band();
    if (j.is_null()) return band;
    band.omega_s = 2.0 * kPi * 1e9 * get_num(j, "band", "f_signal_ghz", band.omega_s / (2e9 * kPi));
    band.omega_i = 2.0 * kPi * 1e9 * get_num(j, "band", "f_idler_ghz", band.omega_i / (2e9 * kPi));
    band.bandwidth_hz = get_num(j, "band", "bandwidth_hz", band.bandwidth_hz);
    band.impedance_ohm = get_num(j, "band", "impedance_ohm", band.impedance_ohm);
    band.sample_rate_hz = get_num(j, "band", "sample_rate_hz", band.sample_rate_hz);
    band.if_freq_hz = get_num(j, "band", "if_freq_hz", band.if_freq_hz);
    band.record_len = static_cast<int>(get_num(j, "band", "record_len", band.record_len));
    band.validate();
    return band;
}

ChainParams chain_from_json(const json& j) {
    ChainParams chain = reference_chain();
    if (j.is_null()) return chain;
    chain.g_s_amp = get_gain(j, "chain", "g_s_amp", chain.g_s_amp);
    chain.g_s_det = get_gain(j, "chain", "g_s_det", chain.g_s_det);
    chain.g_i_total = get_gain(j, "chain", "g_i_total", chain.g_i_total);
    const bool has_n = j.contains("n_amp_s");
    const bool has_prod = j.contains("amp_noise_product");
    if (has_n && has_prod)
        throw ConfigError("config keys conflict: chain.n_amp_s and chain.amp_noise_product");
    if (has_prod) {
        // product = (G_amp - 1)(n_amp_s + 1), the form the chain bookkeeping quotes
        chain.n_amp_s = j["amp_noise_product"].get<double>() / (chain.g_s_amp - 1.0) - 1.0;
    } else if (has_n) {
        chain.n_amp_s = j["n_amp_s"].get<double>();
    } else {
        chain.n_amp_s = 5e8 / (chain.g_s_amp - 1.0) - 1.0;
    }
    chain.n_det_s = get_num(j, "chain", "n_det_s", chain.n_det_s);
    chain.n_add_i = get_num(j, "chain", "n_add_i", chain.n_add_i);
    chain.n_env = get_num(j, "chain", "n_env", chain.n_env);
    chain.g_s_db_err = get_num(j, "chain", "g_s_db_err", chain.g_s_db_err);
    chain.g_i_db_err = get_num(j, "chain", "g_i_db_err", chain.g_i_db_err);
    chain.n_add_i_err = get_num(j, "chain", "n_add_i_err", chain.n_add_i_err);
    chain.validate();
    return chain;
}

PurityModel purity_from_json(const json& j) {
    PurityModel p;
    if (j.is_null()) return p;
    const std::string model = j.value("model", "constant");
    if (model == "constant") {
        p.kind = PurityModel::Kind::constant;
        p.value = get_num(j, "source.purity", "value", 1.0);
    } else if (model == "rational") {
        p.kind = PurityModel::Kind::rational;
        p.p0 = get_num(j, "source.purity", "p0", 1.0, true);
        p.beta = get_num(j, "source.purity", "beta", 0.0, true);
    } else if (model == "table") {
        p.kind = PurityModel::Kind::table;
        if (!j.contains("points") || !j["points"].is_array())
            throw ConfigError("missing config key: source.purity.points");
        for (const auto& row : j["points"]) {
            if (!row.is_array() || row.size() != 2)
                throw ConfigError("source.purity.points rows must be [n_s, purity]");
            p.table.emplace_back(row[0].get<double>(), row[1].get<double>());
        }
    } else {
        throw ConfigError("source.purity.model must be constant|rational|table");
    }
    return p;
}

DistanceModel distance_from_json(const json& j) {
    DistanceModel d;
    if (j.is_null()) return d;
    const std::string kind = j.value("kind", "power_law");
    if (kind == "power_law") {
        d.kind = DistanceModel::Kind::power_law;
        d.eta_ref = get_num(j, "distance_model", "eta_ref", d.eta_ref);
        d.d_ref = get_num(j, "distance_model", "d_ref_m", d.d_ref);
        d.exponent = get_num(j, "distance_model", "exponent", d.exponent);
    } else if (kind == "table") {
        d.kind = DistanceModel::Kind::table;
        if (!j.contains("table_eta_db") || !j["table_eta_db"].is_array())
            throw ConfigError("missing config key: distance_model.table_eta_db");
        for (const auto& row : j["table_eta_db"]) {
            if (!row.is_array() || row.size() != 2)
                throw ConfigError("distance_model.table_eta_db rows must be [d_m, eta_db]");
            d.table_db.emplace_back(row[0].get<double>(), row[1].get<double>());
        }
    } else {
        throw ConfigError("distance_model.kind must be power_law|table");
    }
    d.validate();
    return d;
}

std::vector<double> grid_from_json(const json& j) {
    if (j.is_array()) {
        std::vector<double> grid;
        for (const auto& v : j) grid.push_back(v.get<double>());
        return grid;
    }
    if (!j.is_object()) throw ConfigError("sweep.grid must be an array or a range object");
    const double from = get_num(j, "sweep.grid", "from", 0, true);
    const double to = get_num(j, "sweep.grid", "to", 0, true);
    const int points = static_cast<int>(get_num(j, "sweep.grid", "points", 0, true));
    if (points < 1) throw ConfigError("sweep.grid.points must be >= 1");
    const std::string spacing = j.value("spacing", "linear");
    std::vector<double> grid(points);
    for (int i = 0; i < points; ++i) {
        const double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
        if (spacing == "linear") {
            grid[i] = from + t * (to - from);
        } else if (spacing == "log") {
            if (from <= 0 || to <= 0) throw ConfigError("sweep.grid: log spacing needs positive bounds");
            grid[i] = from * std::pow(to / from, t);
        } else if (spacing == "db") {
            // bounds are given in dB, grid values are linear
            grid[i] = db_to_linear(from + t * (to - from));
        } else {
            throw ConfigError("sweep.grid.spacing must be linear|log|db");
        }
    }
    if (grid.size() > 1 && grid.front() > grid.back()) std::reverse(grid.begin(), grid.end());
    return grid;
}

SweepVariable variable_from_string(const std::string& s) {
    if (s == "n_s") return SweepVariable::n_s;
    if (s == "eta") return SweepVariable::eta;
    if (s == "distance") return SweepVariable::distance;
    if (s == "temperature") return SweepVariable::temperature;
    throw ConfigError("sweep.variable must be n_s|eta|distance|temperature");
}

SourceKind source_from_string(const std::string& s) {
    if (s == "tmsv") return SourceKind::tmsv;
    if (s == "classical") return SourceKind::classical;
    if (s == "coherent") return SourceKind::coherent;
    throw ConfigError("source.kinds entries must be tmsv|classical|coherent");
}

Receiver receiver_from_string(const std::string& s) {
    if (s == "pc_raw") return Receiver::pc_raw;
    if (s == "pc_calibrated") return Receiver::pc_calibrated;
    if (s == "homodyne") return Receiver::homodyne;
    if (s == "heterodyne") return Receiver::heterodyne;
    if (s == "passive") return Receiver::passive;
    throw ConfigError("sweep.receivers entries must be pc_raw|pc_calibrated|homodyne|heterodyne|passive");
}

} // namespace

AppConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }

    AppConfig app;
    SweepConfig& cfg = app.sweep;
    cfg.figure = j.value("figure", "");
    app.out_dir = j.value("out_dir", ".");
    cfg.band = band_from_json(j.contains("band") ? j["band"] : json());
    cfg.chain = chain_from_json(j.contains("chain") ? j["chain"] : json());

    if (j.contains("source")) {
        const json& src = j["source"];
        if (src.contains("kinds")) {
            cfg.sources.clear();
            for (const auto& s : src["kinds"]) cfg.sources.push_back(source_from_string(s.get<std::string>()));
        }
        if (src.contains("purity")) cfg.purity = purity_from_json(src["purity"]);
        cfg.classical_n_i = get_num(src, "source", "classical_n_i", cfg.classical_n_i);
    }
    if (j.contains("distance_model")) cfg.distance = distance_from_json(j["distance_model"]);

    if (!j.contains("sweep")) throw ConfigError("missing config key: sweep");
    const json& sw = j["sweep"];
    if (!sw.contains("variable")) throw ConfigError("missing config key: sweep.variable");
    cfg.variable = variable_from_string(sw["variable"].get<std::string>());
    if (!sw.contains("grid")) throw ConfigError("missing config key: sweep.grid");
    cfg.grid = grid_from_json(sw["grid"]);
    cfg.m_per_point = static_cast<std::size_t>(get_num(sw, "sweep", "m_per_point", cfg.m_per_point));
    cfg.m_coherent = static_cast<std::size_t>(get_num(sw, "sweep", "m_coherent", cfg.m_coherent));
    cfg.repetitions = static_cast<int>(get_num(sw, "sweep", "repetitions", cfg.repetitions));
    cfg.master_seed = static_cast<std::uint64_t>(get_num(sw, "sweep", "seed", static_cast<double>(cfg.master_seed)));
    cfg.fixed_eta = get_num(sw, "sweep", "fixed_eta", cfg.fixed_eta);
    cfg.fixed_n_s = get_num(sw, "sweep", "fixed_n_s", cfg.fixed_n_s);
    cfg.workers = static_cast<int>(get_num(sw, "sweep", "workers", cfg.workers));
    if (sw.contains("with_mc")) cfg.with_mc = sw["with_mc"].get<bool>();
    if (sw.contains("receivers")) {
        cfg.receivers.clear();
        for (const auto& r : sw["receivers"]) cfg.receivers.push_back(receiver_from_string(r.get<std::string>()));
    }
    cfg.validate();
    return app;
}

ChainParams chain_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("chain parse error: ") + e.what());
    }
    return chain_from_json(j);
}

std::string chain_to_json_text(const ChainParams& chain) {
    json j;
    j["g_s_amp_db"] = linear_to_db(chain.g_s_amp);
    j["g_s_det_db"] = linear_to_db(chain.g_s_det);
    j["g_i_total_db"] = linear_to_db(chain.g_i_total);
    j["n_amp_s"] = chain.n_amp_s;
    j["n_det_s"] = chain.n_det_s;
    j["n_add_i"] = chain.n_add_i;
    j["n_env"] = chain.n_env;
    return j.dump(2);
}

std::string config_key_reference() {
    return
        "figure                      optional recipe tag written into outputs (fig2a|fig2b|fig3a|fig3b)\n"
        "out_dir                     output directory (flag --out wins; env MQI_OUT_DIR is the fallback)\n"
        "band.f_signal_ghz           signal frequency, GHz\n"
        "band.f_idler_ghz            idler frequency, GHz\n"
        "band.bandwidth_hz           analysis bandwidth B, Hz (must equal sample_rate/record_len)\n"
        "band.impedance_ohm          line impedance R, ohm\n"
        "band.sample_rate_hz         digitizer rate, Hz\n"
        "band.if_freq_hz             intermediate frequency, Hz (must fall on a DFT bin)\n"
        "band.record_len             samples per record\n"
        "chain.g_s_amp_db|_linear    pre-target signal gain (dB or linear; exactly one)\n"
        "chain.g_s_det_db|_linear    post-target signal gain\n"
        "chain.g_i_total_db|_linear  total idler chain gain\n"
        "chain.n_amp_s               signal amplifier noise-mode occupation, quanta\n"
        "chain.amp_noise_product     alternative: (G_amp-1)(n_amp_s+1), quanta\n"
        "chain.n_det_s               receiver noise after down-conversion, quanta (includes +1)\n"
        "chain.n_add_i               total idler added noise, source-referred quanta\n"
        "chain.n_env                 environmental thermal occupation, quanta\n"
        "chain.g_s_db_err            signal gain calibration uncertainty, dB (error bands only)\n"
        "chain.g_i_db_err            idler gain calibration uncertainty, dB (error bands only)\n"
        "chain.n_add_i_err           idler added-noise uncertainty, quanta (error bands only)\n"
        "source.kinds                subset of [tmsv, classical, coherent]\n"
        "source.purity.model         constant|rational|table\n"
        "source.purity.value         constant model value in [0,1]\n"
        "source.purity.p0,beta       rational model p0/(1 + beta n_s)\n"
        "source.purity.points        table rows [n_s, purity]\n"
        "source.classical_n_i        classical-source idler occupation, quanta (<0 tracks n_s)\n"
        "sweep.variable              n_s|eta|distance|temperature\n"
        "sweep.grid                  array of values, or {from,to,points,spacing:linear|log|db}\n"
        "sweep.m_per_point           records per hypothesis for pc receivers (>= 1000)\n"
        "sweep.m_coherent            records per hypothesis for coherent receivers (>= 1000)\n"
        "sweep.repetitions           measurement sets per point\n"
        "sweep.seed                  master RNG seed (flag --seed wins)\n"
        "sweep.fixed_eta             transmissivity when not the sweep variable, in [0,1]\n"
        "sweep.fixed_n_s             signal photon number when not the sweep variable\n"
        "sweep.receivers             subset of [pc_raw, pc_calibrated, homodyne, heterodyne, passive]\n"
        "sweep.with_mc               false = closed-form columns only\n"
        "sweep.workers               worker threads (flag --workers wins); output is worker-independent\n"
        "distance_model.kind         power_law|table\n"
        "distance_model.eta_ref      transmissivity at d_ref, (0,1]\n"
        "distance_model.d_ref_m      reference distance, m\n"
        "distance_model.exponent     power-law exponent\n"
        "distance_model.table_eta_db rows [distance_m, eta_dB], dB-linear interpolation\n";
}

} // namespace mqi
