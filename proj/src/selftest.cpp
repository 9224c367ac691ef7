#include "mqi/selftest.hpp"

#include <cmath>
#include <sstream>

#include "mqi/calibration.hpp"
#include "mqi/chain.hpp"
#include "mqi/dsp.hpp"
#include "mqi/moments.hpp"
#include "mqi/receivers.hpp"

namespace mqi {

bool SelftestReport::all_passed() const {
    for (const auto& c : checks)
        if (!c.passed) return false;
    return true;
}

std::string SelftestReport::text() const {
    std::ostringstream out;
    for (const auto& c : checks) {
        out << (c.passed ? "[PASS] " : "[FAIL] ") << c.name;
        if (!c.detail.empty()) out << "  (" << c.detail << ")";
        out << '\n';
    }
    out << (all_passed() ? "selftest: all properties hold\n" : "selftest: FAILURES present\n");
    return out.str();
}

namespace {

std::string num(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

} // namespace

SelftestReport run_selftest(const SelftestOptions& opts) {
    SelftestReport rep;
    auto add = [&](const std::string& name, bool ok, const std::string& detail = "") {
        rep.checks.push_back({name, ok, detail});
    };
    const double duan_fault = opts.inject_fault == "duan" ? 0.5 : 0.0;
    const double snr_fault = opts.inject_fault == "pc_snr" ? 1.5 : 1.0;
    const double rt_fault = opts.inject_fault == "roundtrip" ? 1.0 + 1e-6 : 1.0;

    // Physicality of every source family over a small grid.
    {
        bool ok = true;
        for (double n : {0.0, 0.3, 1.0, 4.5}) {
            for (double p : {1.0, 0.9, 0.5}) ok = ok && is_physical(tmsv_moments(n, p));
            ok = ok && is_physical(classical_moments(n, n)) && is_physical(coherent_moments(n));
        }
        ok = ok && is_physical(classical_moments(0.5, 2.0));
        add("physicality of source constructions", ok);
    }

    // Witness boundaries: classical sits at or above 1, pure TMSV below.
    {
        bool ok = true;
        double worst = 1.0;
        for (double n : {0.05, 0.5, 2.0, 8.0}) {
            const double dc = duan_delta(classical_moments(n, n)) + duan_fault;
            const double dq = duan_delta(tmsv_moments(n, 1.0)) + duan_fault;
            ok = ok && dc >= 1.0 - 1e-12 && dq < 1.0;
            worst = std::min(worst, dc);
        }
        add("entanglement witness boundaries", ok, "min classical delta " + num(worst));
    }

    // DSP round trip on sampled amplitudes.
    {
        const auto batch = sample_records(tmsv_moments(1.0, 0.95), 1000, opts.seed, 900);
        const auto raw = synthesize_if(batch, reference_band(), {});
        auto back = demodulate_records(raw, {});
        double worst = 0.0;
        for (std::size_t k = 0; k < batch.size(); ++k) {
            back.a_s[k] *= rt_fault;
            const double scale = std::max(1.0, std::abs(batch.a_s[k]));
            worst = std::max(worst, std::abs(back.a_s[k] - batch.a_s[k]) / scale);
            worst = std::max(worst, std::abs(back.a_i[k] - batch.a_i[k]) / scale);
        }
        add("IF synthesis/demodulation round trip", worst < 1e-9, "max rel err " + num(worst));
    }

    // MC receivers against the closed forms at M=10000 (5 jackknife sigma).
    {
        bool ok = true;
        std::string detail;
        const ChainParams chain = reference_chain();
        const std::size_t m_count = 10000;
        int stream = 0;
        for (double n_s : {0.1, 0.5, 2.0}) {
            for (double eta : {1.0, 0.01}) {
                const SecondMoments src = tmsv_moments(n_s, 1.0);
                const auto d1 = detect_pair(src, chain, {eta, Hypothesis::present});
                const auto d0 = detect_pair(src, chain, {eta, Hypothesis::absent});
                const auto b1 = sample_pair_sums(d1, m_count, opts.seed, 1000 + stream);
                const auto b0 = sample_pair_sums(d0, m_count, opts.seed, 2000 + stream);
                ++stream;
                for (bool cal : {false, true}) {
                    const SnrReport mc = cal ? pc_calibrated_mc(b1, b0, chain) : pc_raw_mc(b1, b0);
                    const SnrReport an = pc_snr_analytic(src, chain, eta, cal);
                    const double diff = std::abs(mc.snr * snr_fault - an.snr);
                    if (diff > 5.0 * mc.stderr_ && detail.empty())
                        detail = "n_s " + num(n_s) + " eta " + num(eta) +
                                 (cal ? " calibrated" : " raw") + " off by " +
                                 num(diff / mc.stderr_) + " se";
                    ok = ok && diff <= 5.0 * mc.stderr_;
                }
            }
        }
        add("pc receiver MC matches closed form", ok, detail);
    }

    // Coherent receivers, same drill.
    {
        bool ok = true;
        const ChainParams chain = reference_chain();
        const SecondMoments src = coherent_moments(0.5);
        const auto d1 = detect_pair(src, chain, {1.0, Hypothesis::present});
        const auto d0 = detect_pair(src, chain, {1.0, Hypothesis::absent});
        const auto b1 = sample_pair_sums(d1, 10000, opts.seed, 3000);
        const auto b0 = sample_pair_sums(d0, 10000, opts.seed, 3001);
        const SnrReport hom = homodyne_mc(b1, b0);
        const SnrReport het = heterodyne_mc(b1, b0);
        ok = ok && std::abs(hom.snr - homodyne_snr_analytic(src, chain, 1.0).snr) <= 5 * hom.stderr_;
        ok = ok && std::abs(het.snr - heterodyne_snr_analytic(src, chain, 1.0).snr) <= 5 * het.stderr_;
        add("coherent receivers MC match closed form", ok);
    }

    // Calibration generate-then-fit round trip.
    {
        const BandParams band = reference_band();
        const double g = db_to_linear(94.25);
        const double n_add = 14.91;
        std::vector<CalibrationPoint> pts;
        for (double t : {0.05, 0.1, 0.2, 0.4, 0.8}) {
            pts.push_back({t, noise_density_model(t, g, n_add, band, band.omega_i), 0.0});
        }
        const CalibrationFit fit = fit_gain_noise(pts, band, band.omega_i);
        const bool ok = std::abs(fit.gain_linear - g) < 1e-9 * g &&
                        std::abs(fit.n_add - n_add) < 1e-9 * n_add;
        add("calibration fit inverts the noise model", ok,
            "gain rel err " + num(std::abs(fit.gain_linear - g) / g));
    }

    // Error probability sanity.
    {
        bool ok = std::abs(error_probability(0.0, 1) - 0.5) < 1e-15;
        ok = ok && std::abs(error_probability(1.0, 1) - 0.0786496035) < 1e-6;
        double prev = 1.0;
        for (double mm : {1.0, 2.0, 5.0, 10.0, 100.0}) {
            const double e = error_probability(0.3, mm);
            ok = ok && e < prev;
            prev = e;
        }
        add("error probability: half at zero, strictly decreasing", ok);
    }

    // Determinism: identical seeds give identical sums.
    {
        const auto a = combine_blocks(sample_pair_sums(tmsv_moments(0.5), 5000, opts.seed, 4000));
        const auto b = combine_blocks(sample_pair_sums(tmsv_moments(0.5), 5000, opts.seed, 4000));
        add("record sampling is deterministic", a.as_array() == b.as_array());
    }
    return rep;
}

} // namespace mqi
