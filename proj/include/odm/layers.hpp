#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "odm/tensor.hpp"

namespace odm {

// Every learnable tensor (and every non-learnable buffer, e.g. BN running
// statistics) is declared by a descriptor before anything is allocated. The
// same plan drives allocation, seeded initialization and the analytic
// parameter counts, so the counts match the allocated scalars by
// construction.
struct ParamDesc {
    enum class Init {
        UniformFanIn,  // uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]
        Zeros,
        Ones,
        SsmA,    // row-wise A[d][n] = -(n+1)
        DtBias,  // softplus^{-1} of a log-uniform draw in [1e-3, 1e-1]
    };
    std::string path;
    std::vector<int> shape;
    Init init = Init::Zeros;
    int fan_in = 0;  // only for UniformFanIn
};

struct Plan {
    std::vector<ParamDesc> params;
    std::vector<ParamDesc> buffers;  // not counted as parameters

    void add_param(ParamDesc d) { params.push_back(std::move(d)); }
    void add_buffer(ParamDesc d) { buffers.push_back(std::move(d)); }
    std::int64_t param_count() const;
};

struct WeightStore {
    std::unordered_map<std::string, Tensor> tensors;

    const Tensor& get(const std::string& path) const;
    Tensor& at(const std::string& path);
    bool has(const std::string& path) const { return tensors.count(path) != 0; }
    std::uint64_t checksum() const;  // FNV-1a over paths and payload bytes
};

// Allocates and fills every tensor in the plan. Each tensor's draws come
// from a counter-based stream keyed by (seed, path); see rng.hpp.
WeightStore init_weights(const Plan& plan, std::uint64_t seed);

struct CostRow {
    std::string path;
    std::int64_t params = 0;
    std::int64_t macs = 0;
};
using CostRows = std::vector<CostRow>;

// ---- primitive layers -----------------------------------------------------

struct Conv2dLayer {
    std::string path;
    ConvSpec spec;

    static Conv2dLayer make(std::string path, int cin, int cout, int k, int stride, int groups,
                            bool bias);
    void plan(Plan& p) const;
    Tensor forward(const WeightStore& ws, const Tensor& x) const;
    std::int64_t param_count() const;
    std::int64_t macs(int out_h, int out_w) const;
    void cost(CostRows& rows, int in_h, int in_w) const;
};

struct BatchNormLayer {
    std::string path;
    int channels = 0;
    float eps = 1e-5f;

    void plan(Plan& p) const;
    Tensor forward(const WeightStore& ws, const Tensor& x) const;
    std::int64_t param_count() const { return 2LL * channels; }
    void cost(CostRows& rows) const { rows.push_back({path, param_count(), 0}); }
};

struct LayerNormLayer {
    std::string path;
    int channels = 0;
    float eps = 1e-5f;

    void plan(Plan& p) const;
    Tensor forward(const WeightStore& ws, const Tensor& x) const;
    std::int64_t param_count() const { return 2LL * channels; }
    void cost(CostRows& rows) const { rows.push_back({path, param_count(), 0}); }
};

// Per-position linear map on a C×L sequence tensor (f64 accumulation).
struct LinearLayer {
    std::string path;
    int in = 0, out = 0;
    bool has_bias = false;

    void plan(Plan& p) const;
    Tensor forward(const WeightStore& ws, const Tensor& x) const;
    std::int64_t param_count() const { return static_cast<std::int64_t>(in) * out + (has_bias ? out : 0); }
    std::int64_t macs(int length) const { return static_cast<std::int64_t>(in) * out * length; }
    void cost(CostRows& rows, int length) const { rows.push_back({path, param_count(), macs(length)}); }
};

// Conv + BN + SiLU, the backbone's standard unit.
struct ConvBnAct {
    Conv2dLayer conv;
    BatchNormLayer bn;
    ActivationKind act = ActivationKind::SiLU;

    static ConvBnAct make(const std::string& path, int cin, int cout, int k, int stride);
    void plan(Plan& p) const;
    Tensor forward(const WeightStore& ws, const Tensor& x) const;
    void cost(CostRows& rows, int in_h, int in_w) const;
};

}  // namespace odm
