#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace odm {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Property suite aggregating every module's invariants. Deterministic given
// the seed. Any red check should fail the caller's exit code.
std::vector<CheckResult> run_selftest(std::uint64_t seed);

}  // namespace odm
