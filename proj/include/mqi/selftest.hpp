#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mqi {

struct SelftestOptions {
    std::uint64_t seed = 17;
    std::string inject_fault; // empty, or one of: duan, pc_snr, roundtrip
};

struct SelftestCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct SelftestReport {
    std::vector<SelftestCheck> checks;
    bool all_passed() const;
    std::string text() const; // one pass/fail line per property
};

/// Fast invariant suite: physicality, witness boundaries, DSP round trip,
/// MC-vs-analytic receiver agreement at M=10000, calibration round trip,
/// error-probability sanity and determinism. The fault knob corrupts one
/// formula on purpose so the corresponding property is seen to fail.
SelftestReport run_selftest(const SelftestOptions& opts = {});

} // namespace mqi
