#pragma once

#include <array>
#include <string>

#include "odm/layers.hpp"
#include "odm/tensor.hpp"

namespace odm {

// Four directional flattenings of an H×W grid. Each direction is a bijection
// between grid coordinates and sequence positions t in [0, H*W).
enum class ScanDirection : int {
    RowMajor = 0,          // rows top-down, left-right
    RowMajorReversed = 1,  // exact reversal of RowMajor
    ColMajor = 2,          // columns left-right, top-down
    ColMajorReversed = 3,  // exact reversal of ColMajor
};

constexpr std::array<ScanDirection, 4> kScanDirections = {
    ScanDirection::RowMajor, ScanDirection::RowMajorReversed, ScanDirection::ColMajor,
    ScanDirection::ColMajorReversed};

// Sequence position of grid cell (h, w) under a direction.
int scan_position(ScanDirection dir, int h, int w, int H, int W);

struct DirectionalSequences {
    int channels = 0, H = 0, W = 0;
    std::array<Tensor, 4> seq;  // each C×(H·W), indexed by ScanDirection
};

DirectionalSequences cross_scan_expand(const Tensor& fm);

// Inverse-permutes each sequence back to the grid and sums, in the fixed
// order RowMajor + RowMajorReversed + ColMajor + ColMajorReversed.
Tensor cross_scan_merge(const DirectionalSequences& seqs);

// The 2-D selective-scan operator: 1×1 in-projection with a gating branch,
// depthwise 3×3 + SiLU, scan expansion, one selective scan per direction
// with per-direction Δ/B/C projections, scan merge, post-merge LayerNorm,
// SiLU-gate, 1×1 out-projection.
struct Ss2dOp {
    std::string path;
    int dim = 0;      // external channel count
    int d_inner = 0;  // scan width
    int state_dim = 0;
    int dt_rank = 0;

    Conv2dLayer in_proj;   // dim -> 2*d_inner
    Conv2dLayer dw;        // depthwise 3×3 on d_inner
    std::array<LinearLayer, 4> x_proj;   // d_inner -> dt_rank + 2*state_dim
    std::array<LinearLayer, 4> dt_proj;  // dt_rank -> d_inner, bias carries the Δ init
    LayerNormLayer out_norm;
    Conv2dLayer out_proj;  // d_inner -> dim

    static Ss2dOp make(const std::string& path, int dim, int d_inner, int state_dim, int dt_rank);
    void plan(Plan& p) const;
    // identity_scan replaces each direction's selective scan with the
    // identity map (used by locality checks and the ×4 merge property).
    Tensor forward(const WeightStore& ws, const Tensor& fm, bool identity_scan = false) const;
    void cost(CostRows& rows, int H, int W) const;
};

}  // namespace odm
