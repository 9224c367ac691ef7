#include "mqi/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "mqi/errors.hpp"

namespace mqi {

void PairSums::add(cdouble as, cdouble ai) {
    n += 1.0;
    re_s += as.real();
    im_s += as.imag();
    re_i += ai.real();
    im_i += ai.imag();
    const double a2s = std::norm(as);
    const double a2i = std::norm(ai);
    abs2_s += a2s;
    abs2_i += a2i;
    abs4_s += a2s * a2s;
    abs4_i += a2i * a2i;
    const cdouble cr = as * ai;
    cross_re += cr.real();
    cross_im += cr.imag();
    cross_re2 += cr.real() * cr.real();
    cross_im2 += cr.imag() * cr.imag();
    re_s2 += as.real() * as.real();
    im_s2 += as.imag() * as.imag();
    re_i2 += ai.real() * ai.real();
    im_i2 += ai.imag() * ai.imag();
}

std::array<double, PairSums::kFields> PairSums::as_array() const {
    return {n,        re_s,     im_s,      re_i,      im_i,  abs2_s, abs2_i, abs4_s, abs4_i,
            cross_re, cross_im, cross_re2, cross_im2, re_s2, im_s2,  re_i2,  im_i2};
}

PairSums PairSums::from_array(const std::array<double, kFields>& a) {
    PairSums s;
    s.n = a[0];
    s.re_s = a[1];
    s.im_s = a[2];
    s.re_i = a[3];
    s.im_i = a[4];
    s.abs2_s = a[5];
    s.abs2_i = a[6];
    s.abs4_s = a[7];
    s.abs4_i = a[8];
    s.cross_re = a[9];
    s.cross_im = a[10];
    s.cross_re2 = a[11];
    s.cross_im2 = a[12];
    s.re_s2 = a[13];
    s.im_s2 = a[14];
    s.re_i2 = a[15];
    s.im_i2 = a[16];
    return s;
}

PairSums& PairSums::operator+=(const PairSums& o) {
    auto a = as_array();
    const auto b = o.as_array();
    for (int i = 0; i < kFields; ++i) a[i] += b[i];
    *this = from_array(a);
    return *this;
}

PairSums& PairSums::operator-=(const PairSums& o) {
    auto a = as_array();
    const auto b = o.as_array();
    for (int i = 0; i < kFields; ++i) a[i] -= b[i];
    *this = from_array(a);
    return *this;
}

std::size_t block_count(std::size_t m) { return std::min<std::size_t>(128, std::max<std::size_t>(m, 1)); }

std::pair<std::size_t, std::size_t> block_range(std::size_t m, std::size_t block) {
    const std::size_t k = block_count(m);
    return {block * m / k, (block + 1) * m / k};
}

PairSums combine_blocks(const std::vector<PairSums>& blocks) {
    std::array<Kahan, PairSums::kFields> acc{};
    for (const auto& b : blocks) {
        const auto a = b.as_array();
        for (int i = 0; i < PairSums::kFields; ++i) acc[i].add(a[i]);
    }
    std::array<double, PairSums::kFields> out{};
    for (int i = 0; i < PairSums::kFields; ++i) out[i] = acc[i].value();
    return PairSums::from_array(out);
}

namespace {

/// Precomputed conditional decomposition of the joint Husimi covariance.
struct PairSampler {
    double sd_q_s = 0;    // per-quadrature sd of the signal record
    double cre = 0, cim = 0;
    double inv_var_s = 0; // 1/var(X_s), 0 when the signal record is deterministic
    double sd_cond_i = 0; // conditional per-quadrature sd of the idler record
    cdouble mean_s{0, 0}, mean_i{0, 0};

    explicit PairSampler(const SecondMoments& m) {
        const double va = m.n_s + m.vac_s;
        const double vb = m.n_i + m.vac_i;
        const double k2 = std::norm(m.c);
        double cond = vb;
        if (va > 0) {
            inv_var_s = 1.0 / va;
            cond = vb - k2 * inv_var_s;
        } else if (k2 > 0) {
            throw std::domain_error("sample_records: zero signal variance with nonzero correlation");
        }
        if (cond < -1e-12 * std::max(1.0, vb))
            throw std::domain_error("sample_records: record covariance not positive semidefinite");
        sd_q_s = std::sqrt(std::max(va, 0.0));
        sd_cond_i = std::sqrt(std::max(cond, 0.0));
        cre = m.c.real();
        cim = m.c.imag();
        mean_s = m.mean_s;
        mean_i = m.mean_i;
    }

    void draw(RecordRng& rng, cdouble& as, cdouble& ai) const {
        double z0, z1, z2, z3;
        rng.next_normal_pair(z0, z1);
        rng.next_normal_pair(z2, z3);
        const double xs = sd_q_s * z0;
        const double ps = sd_q_s * z1;
        const double xi = (cre * xs + cim * ps) * inv_var_s + sd_cond_i * z2;
        const double pi = (cim * xs - cre * ps) * inv_var_s + sd_cond_i * z3;
        as = mean_s + cdouble(xs, ps) * M_SQRT1_2;
        ai = mean_i + cdouble(xi, pi) * M_SQRT1_2;
    }
};

} // namespace

RecordBatch sample_records(const SecondMoments& m, std::size_t count, std::uint64_t seed,
                           std::uint64_t stream) {
    require_physical(m, "sample_records");
    if (count < 1) throw std::domain_error("sample_records: need at least one record");
    const PairSampler sampler(m);
    const std::uint64_t key = derive_key(seed, stream);
    RecordBatch batch;
    batch.a_s.resize(count);
    batch.a_i.resize(count);
    batch.vac_s = m.vac_s;
    batch.vac_i = m.vac_i;
    batch.units = (m.vac_s == 1.0 && m.vac_i == 1.0) ? RecordUnits::source_referred
                                                     : RecordUnits::detected;
    batch.seed = seed;
    for (std::size_t k = 0; k < count; ++k) {
        RecordRng rng(key, k);
        sampler.draw(rng, batch.a_s[k], batch.a_i[k]);
    }
    return batch;
}

std::vector<PairSums> sample_pair_sums(const SecondMoments& m, std::size_t count,
                                       std::uint64_t seed, std::uint64_t stream) {
    require_physical(m, "sample_pair_sums");
    if (count < 1) throw std::domain_error("sample_pair_sums: need at least one record");
    const PairSampler sampler(m);
    const std::uint64_t key = derive_key(seed, stream);
    const std::size_t nb = block_count(count);
    std::vector<PairSums> blocks(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        const auto [lo, hi] = block_range(count, b);
        cdouble as, ai;
        for (std::size_t k = lo; k < hi; ++k) {
            RecordRng rng(key, k);
            sampler.draw(rng, as, ai);
            blocks[b].add(as, ai);
        }
    }
    return blocks;
}

std::vector<PairSums> batch_pair_sums(const RecordBatch& batch) {
    const std::size_t m = batch.size();
    const std::size_t nb = block_count(m);
    std::vector<PairSums> blocks(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        const auto [lo, hi] = block_range(m, b);
        for (std::size_t k = lo; k < hi; ++k) blocks[b].add(batch.a_s[k], batch.a_i[k]);
    }
    return blocks;
}

namespace {

double channel_scale(double gain, double omega, const BandParams& band) {
    return std::sqrt(kPhys.hbar * omega * band.bandwidth_hz * band.impedance_ohm * gain);
}

} // namespace

RawRecordStream synthesize_if(const RecordBatch& batch, const BandParams& band,
                              const VoltageScale& scale) {
    band.validate();
    const int len = band.record_len;
    const int bin = static_cast<int>(std::llround(band.if_bin()));
    const double omega_s = scale.omega_s > 0 ? scale.omega_s : band.omega_s;
    const double omega_i = scale.omega_i > 0 ? scale.omega_i : band.omega_i;
    const double amp_s = channel_scale(scale.gain_s, omega_s, band) * std::sqrt(2.0);
    const double amp_i = channel_scale(scale.gain_i, omega_i, band) * std::sqrt(2.0);

    // One period of the IF phasor; bin/len is rational so the table is exact.
    std::vector<cdouble> phasor(len);
    for (int t = 0; t < len; ++t)
        phasor[t] = std::polar(1.0, 2.0 * kPi * bin * t / static_cast<double>(len));

    RawRecordStream raw;
    raw.band = band;
    raw.hypothesis = batch.hypothesis;
    raw.record_count = batch.size();
    raw.samples_s.resize(batch.size() * len);
    raw.samples_i.resize(batch.size() * len);
    for (std::size_t k = 0; k < batch.size(); ++k) {
        double* rs = raw.samples_s.data() + k * len;
        double* ri = raw.samples_i.data() + k * len;
        const cdouble cs = amp_s * batch.a_s[k];
        const cdouble ci = amp_i * batch.a_i[k];
        for (int t = 0; t < len; ++t) {
            rs[t] = (cs * phasor[t]).real();
            ri[t] = (ci * phasor[t]).real();
        }
    }
    return raw;
}

RecordBatch demodulate_records(const RawRecordStream& raw, const VoltageScale& scale) {
    raw.band.validate();
    const int len = raw.band.record_len;
    const int bin = static_cast<int>(std::llround(raw.band.if_bin()));
    if (raw.samples_s.size() != raw.record_count * static_cast<std::size_t>(len) ||
        raw.samples_i.size() != raw.samples_s.size())
        throw UsageError("demodulate_records: stream sample count does not match header");
    const double omega_s = scale.omega_s > 0 ? scale.omega_s : raw.band.omega_s;
    const double omega_i = scale.omega_i > 0 ? scale.omega_i : raw.band.omega_i;
    // a = (I + iQ)/sqrt(2 hbar omega B R G); the DFT bin gives (I + iQ) * len/2.
    const double norm_s = 2.0 / (len * channel_scale(scale.gain_s, omega_s, raw.band) * std::sqrt(2.0));
    const double norm_i = 2.0 / (len * channel_scale(scale.gain_i, omega_i, raw.band) * std::sqrt(2.0));

    std::vector<cdouble> conj_phasor(len);
    for (int t = 0; t < len; ++t)
        conj_phasor[t] = std::polar(1.0, -2.0 * kPi * bin * t / static_cast<double>(len));

    RecordBatch batch;
    batch.hypothesis = raw.hypothesis;
    batch.units = (scale.gain_s == 1.0 && scale.gain_i == 1.0) ? RecordUnits::detected
                                                               : RecordUnits::source_referred;
    batch.a_s.resize(raw.record_count);
    batch.a_i.resize(raw.record_count);
    for (std::size_t k = 0; k < raw.record_count; ++k) {
        const double* rs = raw.samples_s.data() + k * len;
        const double* ri = raw.samples_i.data() + k * len;
        cdouble xs{0, 0}, xi{0, 0};
        for (int t = 0; t < len; ++t) {
            xs += rs[t] * conj_phasor[t];
            xi += ri[t] * conj_phasor[t];
        }
        batch.a_s[k] = xs * norm_s;
        batch.a_i[k] = xi * norm_i;
    }
    return batch;
}

RawRecordStream quantize_stream(const RawRecordStream& raw, int bits, double full_scale_v) {
    if (bits < 2 || bits > 24) throw ConfigError("quantize_stream: bits must lie in [2, 24]");
    if (full_scale_v <= 0) throw ConfigError("quantize_stream: full scale must be positive");
    const double step = 2.0 * full_scale_v / (1 << bits);
    const double max_code = (1 << (bits - 1)) - 1;
    const double min_code = -(1 << (bits - 1));
    RawRecordStream out = raw;
    auto q = [&](double v) {
        const double code = std::clamp(std::round(v / step), min_code, max_code);
        return code * step;
    };
    for (auto& v : out.samples_s) v = q(v);
    for (auto& v : out.samples_i) v = q(v);
    return out;
}

MomentEstimate estimate_moments(const std::vector<PairSums>& blocks, double vac_s, double vac_i) {
    const PairSums t = combine_blocks(blocks);
    const double m = t.n;
    if (m < 2) throw UsageError("estimate_moments: need at least two records");

    MomentEstimate est;
    est.count = static_cast<std::size_t>(m);
    const cdouble mean_s{t.re_s / m, t.im_s / m};
    const cdouble mean_i{t.re_i / m, t.im_i / m};
    const double husimi_s = t.abs2_s / m;
    const double husimi_i = t.abs2_i / m;
    const cdouble cross{t.cross_re / m, t.cross_im / m};

    est.record_moment_s = husimi_s;
    est.record_moment_i = husimi_i;
    est.moments.vac_s = vac_s;
    est.moments.vac_i = vac_i;
    est.moments.mean_s = mean_s;
    est.moments.mean_i = mean_i;
    est.moments.n_s = husimi_s - std::norm(mean_s) - vac_s;
    est.moments.n_i = husimi_i - std::norm(mean_i) - vac_i;
    est.moments.c = cross - mean_s * mean_i;

    // Unbiased sample variances of the per-record statistics.
    const double inv = 1.0 / (m - 1.0);
    auto var_of = [&](double sum_sq, double mean) {
        return std::max(0.0, (sum_sq - m * mean * mean) * inv);
    };
    const double var_abs2_s = var_of(t.abs4_s, husimi_s);
    const double var_abs2_i = var_of(t.abs4_i, husimi_i);
    const double var_cr = var_of(t.cross_re2, t.cross_re / m);
    const double var_ci = var_of(t.cross_im2, t.cross_im / m);
    const double var_re_s = var_of(t.re_s2, t.re_s / m);
    const double var_im_s = var_of(t.im_s2, t.im_s / m);
    const double var_re_i = var_of(t.re_i2, t.re_i / m);
    const double var_im_i = var_of(t.im_i2, t.im_i / m);

    est.stderr_.n_s = std::sqrt(var_abs2_s / m);
    est.stderr_.n_i = std::sqrt(var_abs2_i / m);
    est.stderr_.re_c = std::sqrt(var_cr / m);
    est.stderr_.im_c = std::sqrt(var_ci / m);
    est.stderr_.mean_s = std::sqrt(0.5 * (var_re_s + var_im_s) / m);
    est.stderr_.mean_i = std::sqrt(0.5 * (var_re_i + var_im_i) / m);
    return est;
}

MomentEstimate estimate_moments(const RecordBatch& batch) {
    return estimate_moments(batch_pair_sums(batch), batch.vac_s, batch.vac_i);
}

namespace {

constexpr char kMagic[4] = {'M', 'Q', 'I', 'R'};

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

} // namespace

void write_raw(const RawRecordStream& raw, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("write_raw: cannot open " + path);
    out.write(kMagic, 4);
    put<std::uint32_t>(out, 1);
    put<std::uint32_t>(out, 2);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(raw.band.record_len));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(raw.record_count));
    const std::uint8_t hyp = raw.hypothesis ? static_cast<std::uint8_t>(*raw.hypothesis) : 2;
    put<std::uint8_t>(out, hyp);
    put<std::uint8_t>(out, 0);
    put<std::uint8_t>(out, 0);
    put<std::uint8_t>(out, 0);
    put<double>(out, raw.band.sample_rate_hz);
    put<double>(out, raw.band.if_freq_hz);
    put<double>(out, raw.band.impedance_ohm);
    const int len = raw.band.record_len;
    std::vector<float> buf(static_cast<std::size_t>(len));
    for (std::size_t k = 0; k < raw.record_count; ++k) {
        for (int ch = 0; ch < 2; ++ch) {
            const double* src = (ch == 0 ? raw.samples_s : raw.samples_i).data() + k * len;
            for (int t = 0; t < len; ++t) buf[t] = static_cast<float>(src[t]);
            out.write(reinterpret_cast<const char*>(buf.data()), len * sizeof(float));
        }
    }
    if (!out) throw ConfigError("write_raw: short write to " + path);
}

RawRecordStream read_raw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("read_raw: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw ConfigError("read_raw: not a record stream file: " + path);
    const auto version = get<std::uint32_t>(in);
    if (version != 1) throw ConfigError("read_raw: unsupported version");
    const auto channels = get<std::uint32_t>(in);
    if (channels != 2) throw ConfigError("read_raw: expected 2 channels");
    const auto record_len = get<std::uint32_t>(in);
    const auto record_count = get<std::uint32_t>(in);
    const auto hyp = get<std::uint8_t>(in);
    (void)get<std::uint8_t>(in);
    (void)get<std::uint8_t>(in);
    (void)get<std::uint8_t>(in);
    RawRecordStream raw;
    raw.band.sample_rate_hz = get<double>(in);
    raw.band.if_freq_hz = get<double>(in);
    raw.band.impedance_ohm = get<double>(in);
    raw.band.record_len = static_cast<int>(record_len);
    raw.band.bandwidth_hz = raw.band.sample_rate_hz / raw.band.record_len;
    raw.record_count = record_count;
    if (hyp == 0 || hyp == 1) raw.hypothesis = static_cast<Hypothesis>(hyp);
    const std::size_t len = record_len;
    raw.samples_s.resize(record_count * len);
    raw.samples_i.resize(record_count * len);
    std::vector<float> buf(len);
    for (std::size_t k = 0; k < record_count; ++k) {
        for (int ch = 0; ch < 2; ++ch) {
            in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(len * sizeof(float)));
            if (!in) throw ConfigError("read_raw: truncated sample data in " + path);
            double* dst = (ch == 0 ? raw.samples_s : raw.samples_i).data() + k * len;
            for (std::size_t t = 0; t < len; ++t) dst[t] = buf[t];
        }
    }
    return raw;
}

void write_batch_csv(const RecordBatch& batch, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("write_batch_csv: cannot open " + path);
    out << "idx,re_aS,im_aS,re_aI,im_aI\n";
    char line[160];
    for (std::size_t k = 0; k < batch.size(); ++k) {
        std::snprintf(line, sizeof(line), "%zu,%.10g,%.10g,%.10g,%.10g\n", k,
                      batch.a_s[k].real(), batch.a_s[k].imag(), batch.a_i[k].real(),
                      batch.a_i[k].imag());
        out << line;
    }
}

} // namespace mqi
