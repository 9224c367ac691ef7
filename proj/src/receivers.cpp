#include "mqi/receivers.hpp"

#include <algorithm>
#include <cmath>

#include "mqi/errors.hpp"

namespace mqi {

std::string receiver_name(Receiver r) {
    switch (r) {
        case Receiver::pc_raw: return "pc_raw";
        case Receiver::pc_calibrated: return "pc_calibrated";
        case Receiver::homodyne: return "homodyne";
        case Receiver::heterodyne: return "heterodyne";
        case Receiver::passive: return "passive";
    }
    return "unknown";
}

double SnrReport::stderr_db() const {
    if (snr <= 0) return 0.0;
    return 10.0 / std::log(10.0) * stderr_ / snr;
}

SnrReport snr_from_stats(const DecisionStats& s, Receiver r) {
    if (s.var0 <= 0 || s.var1 <= 0)
        throw NumericalError("snr_from_stats: degenerate (non-positive) conditional variance");
    SnrReport rep;
    rep.receiver = r;
    rep.stats = s;
    const double d = s.mean1 - s.mean0;
    const double den = std::sqrt(s.var1) + std::sqrt(s.var0);
    rep.snr = d * d / (2.0 * den * den);
    rep.snr_db = rep.snr > 0 ? linear_to_db(rep.snr) : -INFINITY;
    return rep;
}

std::vector<double> pc_decision_values(const RecordBatch& sig, const RecordBatch& idl) {
    if (sig.size() != idl.size())
        throw UsageError("pc_decision_values: signal and idler batches differ in size");
    if (sig.hypothesis && idl.hypothesis && *sig.hypothesis != *idl.hypothesis)
        throw UsageError("pc_decision_values: batches carry different hypotheses");
    std::vector<double> out(sig.size());
    for (std::size_t k = 0; k < sig.size(); ++k)
        out[k] = 2.0 * (sig.a_s[k] * idl.a_i[k]).real();
    return out;
}

std::vector<double> pc_decision_values(const RecordBatch& batch) {
    return pc_decision_values(batch, batch);
}

DecisionStats decision_stats(const std::vector<double>& h1, const std::vector<double>& h0) {
    auto mean_var = [](const std::vector<double>& v, double& mean, double& var) {
        Kahan sum;
        for (double x : v) sum.add(x);
        mean = sum.value() / static_cast<double>(v.size());
        Kahan sq;
        for (double x : v) sq.add((x - mean) * (x - mean));
        var = sq.value() / (static_cast<double>(v.size()) - 1.0);
    };
    DecisionStats s;
    s.count = h1.size();
    mean_var(h1, s.mean1, s.var1);
    mean_var(h0, s.mean0, s.var0);
    return s;
}

double pc_variance(double a, double b, double c) {
    const double np = (a + b + 2.0 * c) / 2.0;
    const double nm = (a + b - 2.0 * c) / 2.0;
    return np * (np + 1.0) + nm * (nm + 1.0) - (a - b) * (a - b) / 2.0;
}

PcMoments pc_record_moments(const SecondMoments& source, const ChainParams& chain, double eta,
                            bool calibrated) {
    const SecondMoments m = rotated_to_real(source);
    const SecondMoments d1 = detect_pair(m, chain, {eta, Hypothesis::present});
    const SecondMoments d0 = detect_pair(m, chain, {eta, Hypothesis::absent});
    PcMoments pm;
    pm.a1 = record_moment_s(d1);
    pm.a0 = record_moment_s(d0);
    if (calibrated) {
        pm.b1 = pm.b0 = m.n_i; // perfect idler photon counting at the source plane
        pm.c1 = d1.c.real() / std::sqrt(chain.g_i_total);
    } else {
        pm.b1 = pm.b0 = record_moment_i(d1);
        pm.c1 = d1.c.real();
    }
    pm.c0 = 0.0;
    return pm;
}

double pc_snr_from_moments(const PcMoments& m) {
    // Negative calibrated idler estimates are clamped only inside the
    // variance terms; the means keep the unbiased values.
    const double v1 = pc_variance(m.a1, std::max(m.b1, 0.0), m.c1);
    const double v0 = pc_variance(m.a0, std::max(m.b0, 0.0), m.c0);
    if (v1 <= 0 || v0 <= 0) throw NumericalError("pc receiver: non-positive variance");
    const double d = 2.0 * m.c1 - 2.0 * m.c0;
    const double den = std::sqrt(v1) + std::sqrt(v0);
    return d * d / (2.0 * den * den);
}

SnrReport pc_snr_analytic(const SecondMoments& source, const ChainParams& chain, double eta,
                          bool calibrated) {
    require_physical(source, "pc_snr_analytic");
    const PcMoments pm = pc_record_moments(source, chain, eta, calibrated);
    SnrReport rep;
    rep.receiver = calibrated ? Receiver::pc_calibrated : Receiver::pc_raw;
    rep.snr = pc_snr_from_moments(pm);
    rep.snr_db = rep.snr > 0 ? linear_to_db(rep.snr) : -INFINITY;
    rep.stats.mean1 = 2.0 * pm.c1;
    rep.stats.mean0 = 2.0 * pm.c0;
    rep.stats.var1 = pc_variance(pm.a1, std::max(pm.b1, 0.0), pm.c1);
    rep.stats.var0 = pc_variance(pm.a0, std::max(pm.b0, 0.0), pm.c0);
    return rep;
}

namespace {

/// Central per-record variance of one signal-quadrature record under each
/// hypothesis, in detected units.
void coherent_quadrature_vars(const SecondMoments& source, const ChainParams& chain, double eta,
                              double& var1, double& var0, double& num) {
    require_physical(source, "coherent receiver");
    const SecondMoments d1 = detect_signal(source, chain, {eta, Hypothesis::present});
    const SecondMoments d0 = detect_signal(source, chain, {eta, Hypothesis::absent});
    var1 = d1.n_s + d1.vac_s;
    var0 = d0.n_s + d0.vac_s;
    // X aligned with the mean: <X_1> = sqrt(2) |<a_1>|, <X_0> = 0.
    num = 2.0 * std::norm(d1.mean_s);
}

} // namespace

SnrReport homodyne_snr_analytic(const SecondMoments& source, const ChainParams& chain, double eta) {
    double v1, v0, num;
    coherent_quadrature_vars(source, chain, eta, v1, v0, num);
    SnrReport rep;
    rep.receiver = Receiver::homodyne;
    const double den = std::sqrt(v1) + std::sqrt(v0);
    rep.snr = num / (2.0 * den * den);
    rep.snr_db = rep.snr > 0 ? linear_to_db(rep.snr) : -INFINITY;
    rep.stats.mean1 = std::sqrt(num);
    rep.stats.mean0 = 0.0;
    rep.stats.var1 = v1;
    rep.stats.var0 = v0;
    return rep;
}

SnrReport heterodyne_snr_analytic(const SecondMoments& source, const ChainParams& chain,
                                  double eta) {
    double v1, v0, num;
    coherent_quadrature_vars(source, chain, eta, v1, v0, num);
    SnrReport rep;
    rep.receiver = Receiver::heterodyne;
    const double den = std::sqrt(2.0 * v1) + std::sqrt(2.0 * v0);
    rep.snr = num / (2.0 * den * den);
    rep.snr_db = rep.snr > 0 ? linear_to_db(rep.snr) : -INFINITY;
    rep.stats.mean1 = std::sqrt(num);
    rep.stats.mean0 = 0.0;
    rep.stats.var1 = 2.0 * v1;
    rep.stats.var0 = 2.0 * v0;
    return rep;
}

namespace {

double unbiased_var(double sum_sq, double sum, double n) {
    const double mean = sum / n;
    return std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
}

/// Delete-one-block jackknife over paired (H1, H0) block sums.
template <typename F>
SnrReport jackknifed(const std::vector<PairSums>& h1, const std::vector<PairSums>& h0,
                     Receiver r, F functional) {
    if (h1.size() != h0.size())
        throw UsageError("mc receiver: H1 and H0 block structures differ");
    const PairSums t1 = combine_blocks(h1);
    const PairSums t0 = combine_blocks(h0);
    if (t1.n != t0.n) throw UsageError("mc receiver: H1 and H0 record counts differ");

    SnrReport rep;
    rep.receiver = r;
    rep.snr = functional(t1, t0, &rep.stats);
    rep.snr_db = rep.snr > 0 ? linear_to_db(rep.snr) : -INFINITY;

    const std::size_t k = h1.size();
    if (k >= 8) {
        std::vector<double> loo(k);
        Kahan mean_acc;
        for (std::size_t b = 0; b < k; ++b) {
            PairSums d1 = t1;
            d1 -= h1[b];
            PairSums d0 = t0;
            d0 -= h0[b];
            loo[b] = functional(d1, d0, nullptr);
            mean_acc.add(loo[b]);
        }
        const double mean = mean_acc.value() / static_cast<double>(k);
        Kahan ss;
        for (double v : loo) ss.add((v - mean) * (v - mean));
        rep.stderr_ = std::sqrt((static_cast<double>(k) - 1.0) / static_cast<double>(k) * ss.value());
    }
    return rep;
}

} // namespace

SnrReport pc_raw_mc(const std::vector<PairSums>& h1, const std::vector<PairSums>& h0) {
    auto f = [](const PairSums& t1, const PairSums& t0, DecisionStats* st) {
        DecisionStats s;
        s.count = static_cast<std::size_t>(t1.n);
        // D = 2 Re(a_S a_I): scale the Re(a_S a_I) sums by 2.
        s.mean1 = 2.0 * t1.cross_re / t1.n;
        s.mean0 = 2.0 * t0.cross_re / t0.n;
        s.var1 = 4.0 * unbiased_var(t1.cross_re2, t1.cross_re, t1.n);
        s.var0 = 4.0 * unbiased_var(t0.cross_re2, t0.cross_re, t0.n);
        if (st) *st = s;
        return snr_from_stats(s).snr;
    };
    return jackknifed(h1, h0, Receiver::pc_raw, f);
}

SnrReport pc_calibrated_mc(const std::vector<PairSums>& h1, const std::vector<PairSums>& h0,
                           const ChainParams& chain) {
    const double g_i = chain.g_i_total;
    const double n_add_i = chain.n_add_i;
    auto f = [g_i, n_add_i](const PairSums& t1, const PairSums& t0, DecisionStats* st) {
        PcMoments pm;
        pm.a1 = t1.abs2_s / t1.n;
        pm.a0 = t0.abs2_s / t0.n;
        pm.b1 = t1.abs2_i / t1.n / g_i - (n_add_i + 1.0);
        pm.b0 = t0.abs2_i / t0.n / g_i - (n_add_i + 1.0);
        pm.c1 = t1.cross_re / t1.n / std::sqrt(g_i);
        pm.c0 = t0.cross_re / t0.n / std::sqrt(g_i);
        if (st) {
            st->count = static_cast<std::size_t>(t1.n);
            st->mean1 = 2.0 * pm.c1;
            st->mean0 = 2.0 * pm.c0;
            st->var1 = pc_variance(pm.a1, std::max(pm.b1, 0.0), pm.c1);
            st->var0 = pc_variance(pm.a0, std::max(pm.b0, 0.0), pm.c0);
        }
        return pc_snr_from_moments(pm);
    };
    return jackknifed(h1, h0, Receiver::pc_calibrated, f);
}

SnrReport homodyne_mc(const std::vector<PairSums>& h1, const std::vector<PairSums>& h0) {
    auto f = [](const PairSums& t1, const PairSums& t0, DecisionStats* st) {
        DecisionStats s;
        s.count = static_cast<std::size_t>(t1.n);
        // X = sqrt(2) Re(a_S), phase already aligned with the coherent mean.
        s.mean1 = std::sqrt(2.0) * t1.re_s / t1.n;
        s.mean0 = std::sqrt(2.0) * t0.re_s / t0.n;
        s.var1 = 2.0 * unbiased_var(t1.re_s2, t1.re_s, t1.n);
        s.var0 = 2.0 * unbiased_var(t0.re_s2, t0.re_s, t0.n);
        if (st) *st = s;
        return snr_from_stats(s).snr;
    };
    return jackknifed(h1, h0, Receiver::homodyne, f);
}

SnrReport heterodyne_mc(const std::vector<PairSums>& h1, const std::vector<PairSums>& h0) {
    auto f = [](const PairSums& t1, const PairSums& t0, DecisionStats* st) {
        auto quad = [](const PairSums& t, double& mx, double& mp, double& vsum) {
            mx = std::sqrt(2.0) * t.re_s / t.n;
            mp = std::sqrt(2.0) * t.im_s / t.n;
            vsum = 2.0 * unbiased_var(t.re_s2, t.re_s, t.n) +
                   2.0 * unbiased_var(t.im_s2, t.im_s, t.n);
        };
        double mx1, mp1, v1, mx0, mp0, v0;
        quad(t1, mx1, mp1, v1);
        quad(t0, mx0, mp0, v0);
        if (v1 <= 0 || v0 <= 0) throw NumericalError("heterodyne_mc: degenerate variance");
        const double num = (mx1 - mx0) * (mx1 - mx0) + (mp1 - mp0) * (mp1 - mp0);
        const double den = std::sqrt(v1) + std::sqrt(v0);
        if (st) {
            st->count = static_cast<std::size_t>(t1.n);
            st->mean1 = std::sqrt(num);
            st->mean0 = 0.0;
            st->var1 = v1;
            st->var0 = v0;
        }
        return num / (2.0 * den * den);
    };
    return jackknifed(h1, h0, Receiver::heterodyne, f);
}

SnrReport passive_report(const ChainParams& chain, double eta) {
    const PassiveSnr p = passive_snr(chain, eta);
    SnrReport rep;
    rep.receiver = Receiver::passive;
    rep.snr = p.snr;
    rep.snr_db = p.snr_db;
    const NoiseTotals t = noise_totals(chain, eta);
    rep.stats.mean1 = t.n1;
    rep.stats.mean0 = t.n0;
    rep.stats.var1 = rep.stats.var0 = (t.n0 + 1.0) * (t.n0 + 1.0) / 2.0;
    return rep;
}

double error_probability(double snr, double m_measurements) {
    if (snr < 0) throw std::domain_error("error_probability: snr must be >= 0");
    if (m_measurements < 1) throw std::domain_error("error_probability: M must be >= 1");
    return 0.5 * std::erfc(std::sqrt(snr * m_measurements));
}

} // namespace mqi
