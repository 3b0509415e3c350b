#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odm/layers.hpp"
#include "odm/model.hpp"
#include "odm/ssm_scan.hpp"

namespace odm {

// Parameter / MAC accounting. MACs are the primitive unit (1 MAC ≈ 2 FLOPs);
// activation and norm costs are listed as zero-MAC rows, not totalled.
struct CostReport {
    CostRows rows;
    std::int64_t total_params = 0;
    std::int64_t total_macs = 0;

    static CostReport from_rows(CostRows r);
};

CostReport count_params(const ModelConfig& cfg);
// input_h/input_w must be divisible by 32. backbone-only and backbone+neck
// totals are both derivable: rows are tagged by path prefix.
CostReport count_macs(const ModelConfig& cfg, int input_h, int input_w);

// Central-difference gradient check for the selective scan.
struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_coordinate;
    bool finite = true;

    bool pass(double tol) const { return finite && max_rel_err <= tol; }
};

// Compares the analytic backward against f64 central differences of the
// scalar loss sum(upstream ⊙ y), coordinate by coordinate over x, delta,
// b, c and A. Relative error uses denominator max(|analytic|, |numeric|, 1e-8).
// mutate_sign flips the sign of one analytic gradient entry first (negative
// control for the check itself).
GradCheckReport grad_check_selective_scan(const SequenceBatch<double>& batch,
                                          const std::vector<double>& A, double step,
                                          bool mutate_sign = false);

// Builds a random small instance from a counter-based stream and checks it.
GradCheckReport grad_check_random_instance(std::uint64_t seed, int trial, int D, int N, int L,
                                           double step);

}  // namespace odm
