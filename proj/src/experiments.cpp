#include "mqi/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "mqi/dsp.hpp"
#include "mqi/errors.hpp"

namespace mqi {

std::string source_name(SourceKind s) {
    switch (s) {
        case SourceKind::tmsv: return "tmsv";
        case SourceKind::classical: return "classical";
        case SourceKind::coherent: return "coherent";
    }
    return "unknown";
}

std::string sweep_variable_name(SweepVariable v) {
    switch (v) {
        case SweepVariable::n_s: return "n_s";
        case SweepVariable::eta: return "eta";
        case SweepVariable::distance: return "distance";
        case SweepVariable::temperature: return "temperature";
    }
    return "unknown";
}

double PurityModel::at(double n_s) const {
    double p = 1.0;
    switch (kind) {
        case Kind::constant:
            p = value;
            break;
        case Kind::rational:
            p = p0 / (1.0 + beta * n_s);
            break;
        case Kind::table: {
            if (table.empty()) throw ConfigError("purity table is empty");
            if (n_s <= table.front().first) {
                p = table.front().second;
            } else if (n_s >= table.back().first) {
                p = table.back().second;
            } else {
                for (std::size_t i = 1; i < table.size(); ++i) {
                    if (n_s <= table[i].first) {
                        const auto [x0, y0] = table[i - 1];
                        const auto [x1, y1] = table[i];
                        p = y0 + (y1 - y0) * (n_s - x0) / (x1 - x0);
                        break;
                    }
                }
            }
            break;
        }
    }
    return std::clamp(p, 0.0, 1.0);
}

void DistanceModel::validate() const {
    if (kind == Kind::power_law) {
        if (eta_ref <= 0 || eta_ref > 1) throw ConfigError("distance_model.eta_ref must lie in (0, 1]");
        if (d_ref <= 0) throw ConfigError("distance_model.d_ref must be positive");
    } else {
        if (table_db.size() < 2) throw ConfigError("distance_model.table needs at least two rows");
        for (std::size_t i = 0; i < table_db.size(); ++i) {
            if (table_db[i].second > 0) throw ConfigError("distance_model.table eta must be <= 0 dB");
            if (i > 0 && table_db[i].first <= table_db[i - 1].first)
                throw ConfigError("distance_model.table must be strictly increasing in distance");
        }
        if (table_db.front().first <= 0) throw ConfigError("distance_model.table distances must be positive");
    }
}

double distance_to_eta(const DistanceModel& model, double d) {
    model.validate();
    if (model.kind == DistanceModel::Kind::power_law) {
        if (d <= 0) throw std::domain_error("distance_to_eta: distance must be positive");
        const double eta = model.eta_ref * std::pow(model.d_ref / d, model.exponent);
        return std::min(eta, 1.0);
    }
    if (d < model.table_db.front().first || d > model.table_db.back().first)
        throw std::out_of_range("distance_to_eta: distance outside table range (no extrapolation)");
    double db = model.table_db.back().second;
    for (std::size_t i = 1; i < model.table_db.size(); ++i) {
        if (d <= model.table_db[i].first) {
            const auto [d0, v0] = model.table_db[i - 1];
            const auto [d1, v1] = model.table_db[i];
            db = v0 + (v1 - v0) * (d - d0) / (d1 - d0);
            break;
        }
    }
    return db_to_linear(db);
}

double thermal_occupation(double omega, double temperature_k) {
    if (temperature_k <= 0) return 0.0;
    return 1.0 / std::expm1(kPhys.hbar * omega / (kPhys.k_b * temperature_k));
}

void SweepConfig::validate() const {
    if (grid.empty()) throw ConfigError("sweep.grid must not be empty");
    if (!std::is_sorted(grid.begin(), grid.end())) throw ConfigError("sweep.grid must be sorted");
    if (m_per_point < 1000) throw ConfigError("sweep.m_per_point must be >= 1000");
    if (m_coherent < 1000) throw ConfigError("sweep.m_coherent must be >= 1000");
    if (repetitions < 1) throw ConfigError("sweep.repetitions must be >= 1");
    if (fixed_eta < 0 || fixed_eta > 1) throw ConfigError("sweep.fixed_eta must lie in [0, 1]");
    if (fixed_n_s < 0) throw ConfigError("sweep.fixed_n_s must be >= 0");
    if (workers < 1) throw ConfigError("sweep.workers must be >= 1");
    chain.validate();
    band.validate();
    if (variable == SweepVariable::eta) {
        for (double v : grid)
            if (v < 0 || v > 1) throw ConfigError("sweep.grid: eta values must lie in [0, 1]");
    } else if (variable != SweepVariable::eta) {
        for (double v : grid)
            if (v < 0) throw ConfigError("sweep.grid: values must be >= 0");
    }
    if (variable == SweepVariable::distance) distance.validate();
}

bool SweepConfig::wants(Receiver r) const {
    return std::find(receivers.begin(), receivers.end(), r) != receivers.end();
}

namespace {

struct PointSetup {
    double value = 0;
    double n_s = 0;
    double eta = 1;
    ChainParams chain;
};

PointSetup resolve_point(const SweepConfig& cfg, double value) {
    PointSetup p;
    p.value = value;
    p.chain = cfg.chain;
    p.n_s = cfg.fixed_n_s;
    p.eta = cfg.fixed_eta;
    switch (cfg.variable) {
        case SweepVariable::n_s:
            p.n_s = value;
            break;
        case SweepVariable::eta:
            p.eta = value;
            break;
        case SweepVariable::distance:
            p.eta = distance_to_eta(cfg.distance, value);
            break;
        case SweepVariable::temperature:
            p.chain.n_env = thermal_occupation(cfg.band.omega_s, value);
            break;
    }
    return p;
}

SecondMoments build_source(const SweepConfig& cfg, const PointSetup& p, SourceKind s) {
    switch (s) {
        case SourceKind::tmsv:
            return tmsv_moments(p.n_s, cfg.purity.at(p.n_s));
        case SourceKind::classical: {
            const double n_i = cfg.classical_n_i < 0 ? p.n_s : cfg.classical_n_i;
            return classical_moments(p.n_s, n_i);
        }
        case SourceKind::coherent:
            return coherent_moments(p.n_s);
    }
    throw UsageError("build_source: unknown source kind");
}

// Receiver slots within a repetition result.
constexpr int kSlotPcRaw = 0;
constexpr int kSlotPcCal = 1;
constexpr int kSlotHom = 2;
constexpr int kSlotHet = 3;

struct RepResult {
    double snr[4] = {NAN, NAN, NAN, NAN};
    double se[4] = {NAN, NAN, NAN, NAN};
};

struct Task {
    std::size_t point_index;
    std::size_t source_pos; // position in cfg.sources
    int rep;
};

std::uint64_t task_stream(std::size_t point_index, SourceKind source, int rep, int hypothesis) {
    return ((point_index * 4 + static_cast<std::size_t>(source)) * 1024 +
            static_cast<std::size_t>(rep)) * 2 + static_cast<std::size_t>(hypothesis);
}

void run_parallel(int workers, std::size_t n, const std::function<void(std::size_t)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
    };
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    std::vector<std::thread> pool;
    pool.reserve(count);
    for (std::size_t w = 0; w < count; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

RepResult run_rep(const SweepConfig& cfg, const PointSetup& p, SourceKind source, int rep,
                  std::size_t point_index) {
    const SecondMoments m = rotated_to_real(build_source(cfg, p, source));
    const SecondMoments d1 = detect_pair(m, p.chain, {p.eta, Hypothesis::present});
    const SecondMoments d0 = detect_pair(m, p.chain, {p.eta, Hypothesis::absent});
    const std::size_t count = source == SourceKind::coherent ? cfg.m_coherent : cfg.m_per_point;
    const auto b1 = sample_pair_sums(d1, count, cfg.master_seed,
                                     task_stream(point_index, source, rep, 1));
    const auto b0 = sample_pair_sums(d0, count, cfg.master_seed,
                                     task_stream(point_index, source, rep, 0));
    RepResult out;
    if (source == SourceKind::coherent) {
        if (cfg.wants(Receiver::homodyne)) {
            const SnrReport r = homodyne_mc(b1, b0);
            out.snr[kSlotHom] = r.snr;
            out.se[kSlotHom] = r.stderr_;
        }
        if (cfg.wants(Receiver::heterodyne)) {
            const SnrReport r = heterodyne_mc(b1, b0);
            out.snr[kSlotHet] = r.snr;
            out.se[kSlotHet] = r.stderr_;
        }
    } else {
        if (cfg.wants(Receiver::pc_raw)) {
            const SnrReport r = pc_raw_mc(b1, b0);
            out.snr[kSlotPcRaw] = r.snr;
            out.se[kSlotPcRaw] = r.stderr_;
        }
        if (cfg.wants(Receiver::pc_calibrated)) {
            const SnrReport r = pc_calibrated_mc(b1, b0, p.chain);
            out.snr[kSlotPcCal] = r.snr;
            out.se[kSlotPcCal] = r.stderr_;
        }
    }
    return out;
}

int receiver_slot(Receiver r) {
    switch (r) {
        case Receiver::pc_raw: return kSlotPcRaw;
        case Receiver::pc_calibrated: return kSlotPcCal;
        case Receiver::homodyne: return kSlotHom;
        case Receiver::heterodyne: return kSlotHet;
        case Receiver::passive: return -1;
    }
    return -1;
}

SnrReport analytic_report(const PointSetup& p, const SecondMoments& m, Receiver r) {
    switch (r) {
        case Receiver::pc_raw: return pc_snr_analytic(m, p.chain, p.eta, false);
        case Receiver::pc_calibrated: return pc_snr_analytic(m, p.chain, p.eta, true);
        case Receiver::homodyne: return homodyne_snr_analytic(m, p.chain, p.eta);
        case Receiver::heterodyne: return heterodyne_snr_analytic(m, p.chain, p.eta);
        case Receiver::passive: return passive_report(p.chain, p.eta);
    }
    throw UsageError("analytic_report: unknown receiver");
}

/// Half-width of the closed-form SNR in dB under the chain calibration
/// uncertainties, by central differences through each quoted error.
double analytic_band_db(const PointSetup& p, const SecondMoments& m, Receiver r) {
    auto eval_db = [&](const ChainParams& chain) {
        PointSetup q = p;
        q.chain = chain;
        return analytic_report(q, m, r).snr_db;
    };
    double sumsq = 0;
    bool any = false;
    auto add_term = [&](auto perturb, double err) {
        if (err <= 0) return;
        ChainParams hi = p.chain, lo = p.chain;
        perturb(hi, err);
        perturb(lo, -err);
        const double d = (eval_db(hi) - eval_db(lo)) / 2.0;
        if (std::isfinite(d)) {
            sumsq += d * d;
            any = true;
        }
    };
    add_term([](ChainParams& c, double e) { c.g_s_amp *= db_to_linear(e); }, p.chain.g_s_db_err);
    add_term([](ChainParams& c, double e) { c.g_i_total *= db_to_linear(e); }, p.chain.g_i_db_err);
    add_term([](ChainParams& c, double e) { c.n_add_i += e; }, p.chain.n_add_i_err);
    return any ? std::sqrt(sumsq) : NAN;
}

std::vector<Receiver> receivers_for(const SweepConfig& cfg, SourceKind s) {
    std::vector<Receiver> out;
    if (s == SourceKind::coherent) {
        if (cfg.wants(Receiver::homodyne)) out.push_back(Receiver::homodyne);
        if (cfg.wants(Receiver::heterodyne)) out.push_back(Receiver::heterodyne);
    } else {
        if (cfg.wants(Receiver::pc_raw)) out.push_back(Receiver::pc_raw);
        if (cfg.wants(Receiver::pc_calibrated)) out.push_back(Receiver::pc_calibrated);
    }
    return out;
}

std::vector<SweepRow> assemble_point_rows(const SweepConfig& cfg, const PointSetup& p,
                                          const std::vector<RepResult>* reps_by_source) {
    std::vector<SweepRow> rows;
    for (std::size_t si = 0; si < cfg.sources.size(); ++si) {
        const SourceKind source = cfg.sources[si];
        const auto recvs = receivers_for(cfg, source);
        if (recvs.empty()) continue;
        const SecondMoments m = rotated_to_real(build_source(cfg, p, source));
        const std::size_t count =
            source == SourceKind::coherent ? cfg.m_coherent : cfg.m_per_point;
        for (Receiver r : recvs) {
            SweepRow row;
            row.sweep_value = p.value;
            row.source = source;
            row.receiver = r;
            row.n_s = p.n_s;
            row.eta = p.eta;
            row.m = count;
            row.repetitions = cfg.with_mc ? cfg.repetitions : 0;
            const SnrReport an = analytic_report(p, m, r);
            row.snr_analytic = an.snr;
            row.snr_analytic_db = an.snr_db;
            row.analytic_band_db = analytic_band_db(p, m, r);
            if (source != SourceKind::coherent) row.delta = duan_delta(m);
            row.error_prob = error_probability(std::max(an.snr, 0.0), static_cast<double>(count));
            if (cfg.with_mc && reps_by_source) {
                const int slot = receiver_slot(r);
                const auto& reps = reps_by_source[si];
                std::vector<double> db_vals;
                db_vals.reserve(reps.size());
                double lin_sum = 0;
                for (const auto& rep : reps) {
                    db_vals.push_back(linear_to_db(rep.snr[slot]));
                    lin_sum += rep.snr[slot];
                }
                const double n_reps = static_cast<double>(db_vals.size());
                double mean_db = 0;
                for (double v : db_vals) mean_db += v;
                mean_db /= n_reps;
                row.snr_mc_db = mean_db;
                row.snr_mc = lin_sum / n_reps;
                if (db_vals.size() > 1) {
                    double ss = 0;
                    for (double v : db_vals) ss += (v - mean_db) * (v - mean_db);
                    const double sd = std::sqrt(ss / (n_reps - 1.0));
                    row.stderr_db = sd / std::sqrt(n_reps);
                } else {
                    // single repetition: fall back to the jackknife error bar
                    SnrReport tmp;
                    tmp.snr = reps[0].snr[slot];
                    tmp.stderr_ = reps[0].se[slot];
                    row.stderr_db = tmp.stderr_db();
                }
            }
            rows.push_back(row);
        }
    }
    if (cfg.wants(Receiver::passive)) {
        SweepRow row;
        row.sweep_value = p.value;
        row.source_free = true;
        row.receiver = Receiver::passive;
        row.n_s = p.n_s;
        row.eta = p.eta;
        row.m = cfg.m_per_point;
        row.repetitions = 0;
        const SnrReport an = passive_report(p.chain, p.eta);
        row.snr_analytic = an.snr;
        row.snr_analytic_db = an.snr_db;
        row.analytic_band_db = analytic_band_db(p, SecondMoments{}, Receiver::passive);
        row.error_prob =
            error_probability(std::max(an.snr, 0.0), static_cast<double>(cfg.m_per_point));
        rows.push_back(row);
    }
    return rows;
}

} // namespace

namespace {

std::string point_context(const SweepConfig& cfg, double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", value);
    return "at " + sweep_variable_name(cfg.variable) + " = " + buf + ": ";
}

} // namespace

std::vector<SweepRow> run_point(const SweepConfig& cfg, double value, std::size_t point_index) {
    cfg.validate();
    try {
        const PointSetup p = resolve_point(cfg, value);
        if (!cfg.with_mc) return assemble_point_rows(cfg, p, nullptr);

        std::vector<std::vector<RepResult>> reps(cfg.sources.size());
        std::vector<Task> tasks;
        for (std::size_t si = 0; si < cfg.sources.size(); ++si) {
            if (receivers_for(cfg, cfg.sources[si]).empty()) continue;
            reps[si].resize(cfg.repetitions);
            for (int r = 0; r < cfg.repetitions; ++r) tasks.push_back({point_index, si, r});
        }
        run_parallel(cfg.workers, tasks.size(), [&](std::size_t t) {
            const Task& task = tasks[t];
            reps[task.source_pos][task.rep] =
                run_rep(cfg, p, cfg.sources[task.source_pos], task.rep, task.point_index);
        });
        return assemble_point_rows(cfg, p, reps.data());
    } catch (const std::exception& e) {
        throw std::domain_error(point_context(cfg, value) + e.what());
    }
}

SweepResult run_sweep(const SweepConfig& cfg) {
    cfg.validate();
    SweepResult result;
    result.config = cfg;
    // Points run independently; the first failing point aborts the sweep but
    // the rows of every point before it are preserved.
    for (std::size_t pi = 0; pi < cfg.grid.size(); ++pi) {
        try {
            const auto rows = run_point(cfg, cfg.grid[pi], pi);
            result.rows.insert(result.rows.end(), rows.begin(), rows.end());
        } catch (const std::exception& e) {
            result.aborted = true;
            result.error = e.what();
            break;
        }
    }
    return result;
}

namespace {

std::string fmt(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string series_key(const SweepRow& row) {
    return (row.source_free ? std::string("chain") : source_name(row.source)) + "_" +
           receiver_name(row.receiver);
}

} // namespace

std::string sweep_csv(const SweepResult& result) {
    std::ostringstream out;
    out << "sweep_variable,sweep_value,source,receiver,n_s,eta,m,repetitions,"
           "snr_db_mc,stderr_db,snr_db_analytic,analytic_band_db,delta,error_probability\n";
    for (const auto& row : result.rows) {
        out << sweep_variable_name(result.config.variable) << ',' << fmt(row.sweep_value) << ','
            << (row.source_free ? "-" : source_name(row.source)) << ','
            << receiver_name(row.receiver) << ',' << fmt(row.n_s) << ',' << fmt(row.eta) << ','
            << row.m << ',' << row.repetitions << ',' << fmt(row.snr_mc_db) << ','
            << fmt(row.stderr_db) << ',' << fmt(row.snr_analytic_db) << ','
            << fmt(row.analytic_band_db) << ',' << fmt(row.delta) << ',' << fmt(row.error_prob)
            << '\n';
    }
    if (result.aborted) out << "# aborted: " << result.error << '\n';
    return out.str();
}

std::string figure_csv(const SweepResult& result) {
    // Wide pivot: one row per sweep value, one column group per series.
    std::vector<double> values;
    for (const auto& row : result.rows)
        if (values.empty() || values.back() != row.sweep_value) values.push_back(row.sweep_value);

    std::vector<std::string> series;
    std::map<std::string, std::map<double, const SweepRow*>> by_series;
    for (const auto& row : result.rows) {
        const std::string key = series_key(row);
        if (by_series.find(key) == by_series.end()) series.push_back(key);
        by_series[key][row.sweep_value] = &row;
    }

    std::ostringstream out;
    out << sweep_variable_name(result.config.variable);
    for (const auto& key : series) {
        out << ',' << key << "_db_mc," << key << "_stderr_db," << key << "_db_analytic";
    }
    bool any_delta = false;
    for (const auto& row : result.rows)
        if (!std::isnan(row.delta)) any_delta = true;
    if (any_delta) out << ",delta_tmsv,delta_classical";
    out << '\n';

    for (double v : values) {
        out << fmt(v);
        double delta_tmsv = NAN, delta_classical = NAN;
        for (const auto& key : series) {
            const auto& col = by_series[key];
            const auto it = col.find(v);
            if (it == col.end()) {
                out << ",,,";
                continue;
            }
            const SweepRow& row = *it->second;
            out << ',' << fmt(row.snr_mc_db) << ',' << fmt(row.stderr_db) << ','
                << fmt(row.snr_analytic_db);
            if (!row.source_free && row.source == SourceKind::tmsv) delta_tmsv = row.delta;
            if (!row.source_free && row.source == SourceKind::classical)
                delta_classical = row.delta;
        }
        if (any_delta) out << ',' << fmt(delta_tmsv) << ',' << fmt(delta_classical);
        out << '\n';
    }
    return out.str();
}

namespace {

/// First sign change of f(value) - level, linearly interpolated.
double find_crossing(const std::vector<std::pair<double, double>>& curve, double level) {
    for (std::size_t i = 1; i < curve.size(); ++i) {
        const double f0 = curve[i - 1].second - level;
        const double f1 = curve[i].second - level;
        if (f0 == 0.0) return curve[i - 1].first;
        if ((f0 < 0) != (f1 < 0)) {
            const double t = f0 / (f0 - f1);
            return curve[i - 1].first + t * (curve[i].first - curve[i - 1].first);
        }
    }
    return NAN;
}

} // namespace

std::string summary_json(const SweepResult& result) {
    using nlohmann::json;
    json j;
    j["figure"] = result.config.figure;
    j["sweep_variable"] = sweep_variable_name(result.config.variable);
    j["points"] = result.config.grid.size();
    j["seed"] = result.config.master_seed;

    auto series_curve = [&](SourceKind s, Receiver r, bool analytic) {
        std::vector<std::pair<double, double>> curve;
        for (const auto& row : result.rows) {
            if (row.source_free || row.source != s || row.receiver != r) continue;
            const double y = analytic ? row.snr_analytic_db : row.snr_mc_db;
            if (!std::isnan(y)) curve.emplace_back(row.sweep_value, y);
        }
        return curve;
    };
    auto delta_curve = [&](SourceKind s) {
        std::vector<std::pair<double, double>> curve;
        for (const auto& row : result.rows) {
            if (row.source_free || row.source != s || std::isnan(row.delta)) continue;
            if (!curve.empty() && curve.back().first == row.sweep_value) continue;
            curve.emplace_back(row.sweep_value, row.delta);
        }
        return curve;
    };

    const auto delta_tmsv = delta_curve(SourceKind::tmsv);
    if (!delta_tmsv.empty()) {
        const double x = find_crossing(delta_tmsv, 1.0);
        if (!std::isnan(x)) j["crossings"]["delta_tmsv_reaches_1"] = x;
    }

    auto gap_summary = [&](const char* name, SourceKind sa, Receiver ra, SourceKind sb,
                           Receiver rb) {
        const auto a = series_curve(sa, ra, true);
        const auto b = series_curve(sb, rb, true);
        if (a.empty() || a.size() != b.size()) return;
        std::vector<std::pair<double, double>> gap(a.size());
        double peak = -INFINITY, peak_at = NAN;
        for (std::size_t i = 0; i < a.size(); ++i) {
            gap[i] = {a[i].first, a[i].second - b[i].second};
            if (gap[i].second > peak) {
                peak = gap[i].second;
                peak_at = gap[i].first;
            }
        }
        j["peaks"][std::string(name) + "_db"] = peak;
        j["peaks"][std::string(name) + "_at"] = peak_at;
        const double x = find_crossing(gap, 0.0);
        if (!std::isnan(x)) j["crossings"][std::string(name) + "_zero"] = x;
    };
    gap_summary("qi_cal_minus_heterodyne", SourceKind::tmsv, Receiver::pc_calibrated,
                SourceKind::coherent, Receiver::heterodyne);
    gap_summary("qi_cal_minus_homodyne", SourceKind::tmsv, Receiver::pc_calibrated,
                SourceKind::coherent, Receiver::homodyne);
    gap_summary("qi_cal_minus_ci_cal", SourceKind::tmsv, Receiver::pc_calibrated,
                SourceKind::classical, Receiver::pc_calibrated);
    return j.dump(2);
}

} // namespace mqi
