#pragma once

#include <functional>
#include <string>

#include "odm/layers.hpp"
#include "odm/ss2d.hpp"
#include "odm/tensor.hpp"

namespace odm {

struct ForwardOptions {
    // Replaces every per-direction selective scan with the identity map.
    bool ss2d_identity = false;
    // When set, receives named intermediates (post-SS2D residual states etc.).
    std::function<void(const std::string&, const Tensor&)> sink;
};

// Depthwise 3×3 + BN, then a 1×1 bottleneck with GELU, fused back residually:
//   out = Conv1x1(GELU(Conv1x1(BN(DWConv(F))))) ⊕ F
struct LsBlock {
    std::string path;
    int channels = 0, hidden = 0;
    Conv2dLayer dw;
    BatchNormLayer bn;
    Conv2dLayer fc1, fc2;

    static LsBlock make(const std::string& path, int channels, int hidden_ratio);
    void plan(Plan& p) const;
    Tensor forward(const WeightStore& ws, const Tensor& f) const;
    void cost(CostRows& rows, int H, int W) const;
};

// Gated two-branch block with a depthwise positional residual:
//   out = Conv1x1( X1 ⊙ GELU(DWConv(X2) ⊕ X2) ) ⊕ X
struct RgBlock {
    std::string path;
    int channels = 0, hidden = 0;
    Conv2dLayer fc_x1, fc_x2, dw, fc_out;

    static RgBlock make(const std::string& path, int channels, int hidden_ratio);
    void plan(Plan& p) const;
    Tensor forward(const WeightStore& ws, const Tensor& x) const;
    // The gated transform without the outer ⊕X link. Inside the ODSS block
    // the residual is carried once, at the block level.
    Tensor forward_core(const WeightStore& ws, const Tensor& x) const;
    void cost(CostRows& rows, int H, int W) const;
};

// MLP structures used by the gating ablation harness. All variants keep
// the channel count; hidden width = channels * hidden_ratio.
enum class MlpVariant { Original, Convolutional, ResConvolutional, Gated, RGBlock };

const char* mlp_variant_name(MlpVariant v);

struct MlpBlock {
    std::string path;
    MlpVariant variant = MlpVariant::Original;
    int channels = 0, hidden = 0;
    ActivationKind act = ActivationKind::GELU;

    Conv2dLayer fc1, fc2;  // Original / Convolutional / ResConvolutional
    Conv2dLayer dw;        // variants with a depthwise stage
    Conv2dLayer fc_gate;   // Gated second branch
    RgBlock rg;            // RGBlock variant delegates

    static MlpBlock make(const std::string& path, MlpVariant v, int channels, int hidden_ratio);
    void plan(Plan& p) const;
    Tensor forward(const WeightStore& ws, const Tensor& x) const;
    std::int64_t param_count() const;
};

// The composite block: Conv1x1+BN+SiLU input stage, then
//   Z' = SS2D(LN(LS(Z''))) ⊕ Z''  and  out = RG(LN(Z')) ⊕ Z'.
struct OdssBlock {
    std::string path;
    int in_channels = 0, channels = 0;
    Conv2dLayer in_conv;
    BatchNormLayer in_bn;
    LsBlock ls;
    LayerNormLayer ln1;
    Ss2dOp ss2d;
    LayerNormLayer ln2;
    RgBlock rg;

    struct Dims {
        int state_dim = 0;
        int ssm_expand = 2;
        int dt_rank = 0;  // 0 = auto (max(1, d_inner / 16))
        int ls_ratio = 2;
        int rg_ratio = 2;
    };

    static OdssBlock make(const std::string& path, int in_channels, int channels, const Dims& dims);
    void plan(Plan& p) const;
    Tensor forward(const WeightStore& ws, const Tensor& z, const ForwardOptions& opts = {}) const;
    void cost(CostRows& rows, int H, int W) const;
};

}  // namespace odm
