#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "odm/blocks.hpp"
#include "odm/layers.hpp"

namespace odm {

struct StageConfig {
    int channels = 0;
    int depth = 1;
};

// Per-variant model description. File format: line-based `key = value` with
// `[stage.N]` sections, `#` comments.
struct ModelConfig {
    std::string variant = "custom";
    int stem_channels = 0;
    std::array<StageConfig, 4> stages;
    int ssm_state_dim = 16;
    int ssm_expand = 2;
    int dt_rank = 0;  // 0 = auto
    int ls_hidden_ratio = 2;
    int rg_hidden_ratio = 2;
    int neck_depth = 1;
    std::uint64_t seed = 0;

    void validate() const;
    OdssBlock::Dims block_dims() const {
        return {ssm_state_dim, ssm_expand, dt_rank, ls_hidden_ratio, rg_hidden_ratio};
    }
};

ModelConfig parse_config_text(const std::string& text);
ModelConfig load_config(const std::string& path);

struct PyramidFeatures {
    Tensor p3, p4, p5;  // strides 8, 16, 32
};

// Stacks the four stride-2 spatial phases onto channels (no norm), then a
// pointwise 4C -> C_out compression.
struct VisionClueMerge {
    std::string path;
    int in_channels = 0, out_channels = 0;
    Conv2dLayer pw;

    static VisionClueMerge make(const std::string& path, int cin, int cout);
    void plan(Plan& p) const;
    Tensor forward(const WeightStore& ws, const Tensor& f) const;
    void cost(CostRows& rows, int H, int W) const;
};

// Phase stacking alone (the pre-conv step), exposed for tests.
Tensor stack_stride2_phases(const Tensor& f);

// Simple Stem + four ODSS stages with clue merges + PAN-FPN neck whose
// fusion blocks are ODSS blocks. P3/P4/P5 are the terminal outputs.
struct Model {
    ModelConfig cfg;

    ConvBnAct stem1, stem2;
    std::array<std::vector<OdssBlock>, 4> stages;
    std::array<VisionClueMerge, 3> merges;

    std::vector<OdssBlock> neck_td1;  // fuses up(P5) ++ P4 -> c4
    std::vector<OdssBlock> neck_td2;  // fuses up(M4) ++ P3 -> c3
    ConvBnAct neck_down1;             // stride-2 on refined P3
    std::vector<OdssBlock> neck_bu1;  // fuses down(O3) ++ M4 -> c4
    ConvBnAct neck_down2;             // stride-2 on refined P4
    std::vector<OdssBlock> neck_bu2;  // fuses down(O4) ++ P5 -> c5

    static Model make(const ModelConfig& cfg);
    Plan plan() const;
    WeightStore init_weights() const { return odm::init_weights(plan(), cfg.seed); }

    Tensor stem_forward(const WeightStore& ws, const Tensor& img) const;
    PyramidFeatures backbone_forward(const WeightStore& ws, const Tensor& img,
                                     const ForwardOptions& opts = {}) const;
    PyramidFeatures neck_forward(const WeightStore& ws, const PyramidFeatures& pyr,
                                 const ForwardOptions& opts = {}) const;
    PyramidFeatures forward(const WeightStore& ws, const Tensor& img,
                            const ForwardOptions& opts = {}) const;

    CostRows backbone_cost(int H, int W) const;
    CostRows neck_cost(int H, int W) const;
};

}  // namespace odm
