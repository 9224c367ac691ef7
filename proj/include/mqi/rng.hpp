#pragma once

#include <cmath>
#include <complex>
#include <cstdint>

#include "mqi/constants.hpp"

namespace mqi {

/// splitmix64 output function; a bijective 64-bit mix with good avalanche.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Stable derivation of independent stream keys from a master seed.
inline std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ (stream * 0xd1342543de82ef95ULL + 1ULL));
}

/// Counter-based per-record generator: state depends only on (key, record
/// index), so any partitioning of a batch across workers draws identical
/// records. Within a record it advances as a splitmix64 sequence.
class RecordRng {
public:
    RecordRng(std::uint64_t key, std::uint64_t record_index)
        : state_(splitmix64(key ^ splitmix64(record_index ^ 0xa0761d6478bd642fULL))) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    /// Uniform double in (0, 1]; never returns 0 so log() below is safe.
    double next_unit() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1p-53;
    }

    /// One Box-Muller pair of independent standard normals.
    void next_normal_pair(double& z0, double& z1) {
        const double u = next_unit();
        const double v = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u));
        const double ph = 2.0 * kPi * v;
        z0 = r * std::cos(ph);
        z1 = r * std::sin(ph);
    }

    /// Circular complex normal with ⟨|w|²⟩ = 1.
    std::complex<double> next_complex_normal() {
        double x, y;
        next_normal_pair(x, y);
        return {x * M_SQRT1_2, y * M_SQRT1_2};
    }

private:
    std::uint64_t state_;
};

/// Neumaier compensated accumulator for order-stable reductions.
struct Kahan {
    double sum = 0.0;
    double comp = 0.0;

    void add(double v) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v))
            comp += (sum - t) + v;
        else
            comp += (v - t) + sum;
        sum = t;
    }

    double value() const { return sum + comp; }
};

} // namespace mqi
