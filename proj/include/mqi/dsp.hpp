#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mqi/chain.hpp"
#include "mqi/constants.hpp"
#include "mqi/moments.hpp"
#include "mqi/rng.hpp"

namespace mqi {

enum class RecordUnits { detected = 0, source_referred = 1 };

/// M per-shot complex amplitude pairs (signal, idler) in photon-normalized
/// units, plus the provenance needed to interpret them: the heterodyne vacuum
/// variance each channel carries, the hypothesis, and the RNG seed.
struct RecordBatch {
    std::vector<cdouble> a_s;
    std::vector<cdouble> a_i;
    double vac_s = 1.0;
    double vac_i = 1.0;
    RecordUnits units = RecordUnits::source_referred;
    std::optional<Hypothesis> hypothesis;
    std::uint64_t seed = 0;

    std::size_t size() const { return a_s.size(); }
};

/// Raw IF voltage records for both channels, record-major.
struct RawRecordStream {
    std::vector<double> samples_s; // M * record_len voltages, V
    std::vector<double> samples_i;
    BandParams band;
    std::optional<Hypothesis> hypothesis;
    std::size_t record_count = 0;
};

/// Per-record sufficient statistics over a contiguous index block. Every
/// reduction in the pipeline is assembled from these, so results do not
/// depend on how records are partitioned across workers.
struct PairSums {
    double n = 0;
    double re_s = 0, im_s = 0, re_i = 0, im_i = 0;
    double abs2_s = 0, abs2_i = 0;
    double abs4_s = 0, abs4_i = 0;
    double cross_re = 0, cross_im = 0;
    double cross_re2 = 0, cross_im2 = 0;
    double re_s2 = 0, im_s2 = 0, re_i2 = 0, im_i2 = 0;

    void add(cdouble as, cdouble ai);
    PairSums& operator+=(const PairSums& o);
    PairSums& operator-=(const PairSums& o);

    static constexpr int kFields = 17;
    std::array<double, kFields> as_array() const;
    static PairSums from_array(const std::array<double, kFields>& a);
};

/// Fixed index-block decomposition used for deterministic reductions and
/// jackknife error bars: depends only on M, never on the worker count.
std::size_t block_count(std::size_t m);
std::pair<std::size_t, std::size_t> block_range(std::size_t m, std::size_t block);

/// Compensated, block-ordered combination of per-block sums.
PairSums combine_blocks(const std::vector<PairSums>& blocks);

/// Draws i.i.d. joint I/Q (Husimi) records of a two-mode Gaussian state:
/// per-channel second moment n + |mean|^2 + vac, cross moment ⟨a_S a_I⟩ = c.
/// Record k depends only on (seed-derived key, k). Throws std::domain_error
/// for unphysical moments.
RecordBatch sample_records(const SecondMoments& m, std::size_t count, std::uint64_t seed,
                           std::uint64_t stream = 0);

/// Same draws as sample_records but reduced on the fly into block sums.
std::vector<PairSums> sample_pair_sums(const SecondMoments& m, std::size_t count,
                                       std::uint64_t seed, std::uint64_t stream = 0);

/// Accumulate an existing batch into the deterministic block structure.
std::vector<PairSums> batch_pair_sums(const RecordBatch& batch);

/// Per-channel voltage scale factors applied when turning photon-normalized
/// amplitudes into IF voltage records and back.
struct VoltageScale {
    double gain_s = 1.0; // linear power gain referenced by the amplitudes
    double gain_i = 1.0;
    double omega_s = 0.0; // rad/s; 0 means "take it from the band"
    double omega_i = 0.0;
};

/// Synthesize IF records r(t) = sqrt(hbar*omega*B*R*G) * sqrt(2) Re(a e^{i 2 pi f_IF t})
/// sampled at band.sample_rate_hz for band.record_len points per record.
/// demodulate_records inverts this exactly (up to floating point rounding).
RawRecordStream synthesize_if(const RecordBatch& batch, const BandParams& band,
                              const VoltageScale& scale = {});

/// Single-bin DFT demodulation: per record, the complex coefficient at the IF
/// bin gives the quadrature voltages (I, Q), converted to photon-normalized
/// amplitude a = (I + iQ)/sqrt(2 hbar omega B R G). gain = 1 yields
/// detected-plane units; gain = chain gain yields source-referred units.
RecordBatch demodulate_records(const RawRecordStream& raw, const VoltageScale& scale);

/// Optional ADC model: mid-tread uniform quantizer with clipping at +-full_scale.
RawRecordStream quantize_stream(const RawRecordStream& raw, int bits, double full_scale_v);

struct MomentStderr {
    double n_s = 0, n_i = 0;
    double re_c = 0, im_c = 0;
    double mean_s = 0, mean_i = 0; // per real component
};

/// Sample-moment estimates with standard errors.
struct MomentEstimate {
    SecondMoments moments;     // operator-ordered occupations (vacuum unit removed)
    double record_moment_s = 0; // raw ⟨|a_S|²⟩ including mean and vacuum unit
    double record_moment_i = 0;
    MomentStderr stderr_;
    std::size_t count = 0;
};

MomentEstimate estimate_moments(const RecordBatch& batch);
MomentEstimate estimate_moments(const std::vector<PairSums>& blocks, double vac_s, double vac_i);

/// Binary record-stream layout (little endian):
///   offset 0  : char[4]  magic "MQIR"
///   offset 4  : u32      version (1)
///   offset 8  : u32      channel count (2)
///   offset 12 : u32      record_len
///   offset 16 : u32      record_count
///   offset 20 : u8       hypothesis (0 absent, 1 present, 2 unspecified)
///   offset 21 : u8[3]    padding (zero)
///   offset 24 : f64      sample_rate_hz
///   offset 32 : f64      if_freq_hz
///   offset 40 : f64      impedance_ohm
///   offset 48 : f32 data record-major: for each record, channel 0 then channel 1.
void write_raw(const RawRecordStream& raw, const std::string& path);
RawRecordStream read_raw(const std::string& path);

/// CSV export, columns: idx,re_aS,im_aS,re_aI,im_aI
void write_batch_csv(const RecordBatch& batch, const std::string& path);

} // namespace mqi
