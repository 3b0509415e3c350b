#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace odm {

struct BenchRow {
    std::int64_t size = 0;     // L for scans, H*W for ss2d
    double median_ms = 0.0;
    double iqr_lo_ms = 0.0;    // 25th percentile
    double iqr_hi_ms = 0.0;    // 75th percentile
};

struct BenchReport {
    std::string op;
    std::vector<BenchRow> rows;
    double fit_slope = 0.0;  // log2(time) per log2(size) least-squares slope
};

// ops: scan-recurrent, scan-conv, selective, ss2d.
// For scan ops `sizes` are sequence lengths; for ss2d they are square map
// side lengths. repeats must be >= 1; a fixed warmup runs first.
BenchReport run_bench(const std::string& op, const std::vector<std::int64_t>& sizes, int repeats,
                      std::uint64_t seed);

std::string format_bench_report(const BenchReport& rep);

}  // namespace odm
