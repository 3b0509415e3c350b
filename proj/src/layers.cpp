#include "odm/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "odm/rng.hpp"
#include "odm/ssm_scan.hpp"

namespace odm {

std::int64_t Plan::param_count() const {
    std::int64_t n = 0;
    for (const auto& d : params) n += shape_numel(d.shape);
    return n;
}

const Tensor& WeightStore::get(const std::string& path) const {
    auto it = tensors.find(path);
    if (it == tensors.end()) throw std::runtime_error("weight not found: " + path);
    return it->second;
}

Tensor& WeightStore::at(const std::string& path) {
    auto it = tensors.find(path);
    if (it == tensors.end()) throw std::runtime_error("weight not found: " + path);
    return it->second;
}

std::uint64_t WeightStore::checksum() const {
    // Order-independent: per-tensor FNV over path+payload, combined by sum.
    std::uint64_t total = 0;
    for (const auto& [path, t] : tensors) {
        std::uint64_t h = 0xCBF29CE484222325ULL;
        auto mix = [&h](const unsigned char* p, std::size_t n) {
            for (std::size_t i = 0; i < n; ++i) {
                h ^= p[i];
                h *= 0x100000001B3ULL;
            }
        };
        mix(reinterpret_cast<const unsigned char*>(path.data()), path.size());
        mix(reinterpret_cast<const unsigned char*>(t.data.data()), t.data.size() * sizeof(float));
        total += h;
    }
    return total;
}

static Tensor materialize(const ParamDesc& d, std::uint64_t seed) {
    Tensor t(d.shape);
    CounterRng rng(seed, d.path);
    switch (d.init) {
        case ParamDesc::Init::Zeros:
            break;
        case ParamDesc::Init::Ones:
            std::fill(t.data.begin(), t.data.end(), 1.0f);
            break;
        case ParamDesc::Init::UniformFanIn: {
            if (d.fan_in < 1) throw std::runtime_error("fan_in missing for " + d.path);
            const double bound = 1.0 / std::sqrt(static_cast<double>(d.fan_in));
            for (std::size_t i = 0; i < t.data.size(); ++i)
                t.data[i] = static_cast<float>(rng.uniform(i, -bound, bound));
            break;
        }
        case ParamDesc::Init::SsmA: {
            if (t.rank() != 2) throw std::runtime_error("SsmA init expects D×N for " + d.path);
            const int N = t.dim(1);
            for (int dch = 0; dch < t.dim(0); ++dch)
                for (int n = 0; n < N; ++n) t.at(dch, n) = -static_cast<float>(n + 1);
            break;
        }
        case ParamDesc::Init::DtBias: {
            // softplus(bias) lands log-uniformly in [1e-3, 1e-1].
            const double lo = std::log(1e-3), hi = std::log(1e-1);
            for (std::size_t i = 0; i < t.data.size(); ++i) {
                const double dt = std::exp(rng.uniform(i, lo, hi));
                t.data[i] = static_cast<float>(softplus_inverse(dt));
            }
            break;
        }
    }
    return t;
}

WeightStore init_weights(const Plan& plan, std::uint64_t seed) {
    WeightStore ws;
    for (const auto& d : plan.params) {
        if (!ws.tensors.emplace(d.path, materialize(d, seed)).second)
            throw std::runtime_error("duplicate parameter path: " + d.path);
    }
    for (const auto& d : plan.buffers) {
        if (!ws.tensors.emplace(d.path, materialize(d, seed)).second)
            throw std::runtime_error("duplicate buffer path: " + d.path);
    }
    return ws;
}

// ---- Conv2dLayer ------------------------------------------------------------

Conv2dLayer Conv2dLayer::make(std::string path, int cin, int cout, int k, int stride, int groups,
                              bool bias) {
    Conv2dLayer l;
    l.path = std::move(path);
    l.spec = ConvSpec{cin, cout, k, stride, k / 2, groups, bias};
    l.spec.validate();
    return l;
}

void Conv2dLayer::plan(Plan& p) const {
    const int k = spec.kernel_size;
    const int fan_in = (spec.in_channels / spec.groups) * k * k;
    p.add_param({path + ".w", {spec.out_channels, spec.in_channels / spec.groups, k, k},
                 ParamDesc::Init::UniformFanIn, fan_in});
    if (spec.has_bias) p.add_param({path + ".b", {spec.out_channels}, ParamDesc::Init::Zeros, 0});
}

Tensor Conv2dLayer::forward(const WeightStore& ws, const Tensor& x) const {
    const Tensor* bias = spec.has_bias ? &ws.get(path + ".b") : nullptr;
    return conv2d(x, spec, ws.get(path + ".w"), bias);
}

std::int64_t Conv2dLayer::param_count() const {
    const std::int64_t k2 = static_cast<std::int64_t>(spec.kernel_size) * spec.kernel_size;
    std::int64_t n = static_cast<std::int64_t>(spec.out_channels) * (spec.in_channels / spec.groups) * k2;
    if (spec.has_bias) n += spec.out_channels;
    return n;
}

std::int64_t Conv2dLayer::macs(int out_h, int out_w) const {
    const std::int64_t positions = static_cast<std::int64_t>(out_h) * out_w;
    return positions * spec.out_channels * (spec.in_channels / spec.groups) * spec.kernel_size *
           spec.kernel_size;
}

void Conv2dLayer::cost(CostRows& rows, int in_h, int in_w) const {
    rows.push_back({path, param_count(), macs(spec.out_extent(in_h), spec.out_extent(in_w))});
}

// ---- norms ------------------------------------------------------------------

void BatchNormLayer::plan(Plan& p) const {
    p.add_param({path + ".gamma", {channels}, ParamDesc::Init::Ones, 0});
    p.add_param({path + ".beta", {channels}, ParamDesc::Init::Zeros, 0});
    p.add_buffer({path + ".mean", {channels}, ParamDesc::Init::Zeros, 0});
    p.add_buffer({path + ".var", {channels}, ParamDesc::Init::Ones, 0});
}

Tensor BatchNormLayer::forward(const WeightStore& ws, const Tensor& x) const {
    return batch_norm_infer(x, ws.get(path + ".mean").data, ws.get(path + ".var").data,
                            ws.get(path + ".gamma").data, ws.get(path + ".beta").data, eps);
}

void LayerNormLayer::plan(Plan& p) const {
    p.add_param({path + ".gamma", {channels}, ParamDesc::Init::Ones, 0});
    p.add_param({path + ".beta", {channels}, ParamDesc::Init::Zeros, 0});
}

Tensor LayerNormLayer::forward(const WeightStore& ws, const Tensor& x) const {
    return layer_norm(x, ws.get(path + ".gamma").data, ws.get(path + ".beta").data, eps);
}

// ---- LinearLayer ------------------------------------------------------------

void LinearLayer::plan(Plan& p) const {
    p.add_param({path + ".w", {out, in}, ParamDesc::Init::UniformFanIn, in});
    if (has_bias) p.add_param({path + ".b", {out}, ParamDesc::Init::Zeros, 0});
}

Tensor LinearLayer::forward(const WeightStore& ws, const Tensor& x) const {
    if (x.rank() != 2 || x.dim(0) != in)
        throw std::invalid_argument("linear " + path + ": input must be " + std::to_string(in) +
                                    "×L, got " + x.shape_str());
    const Tensor& w = ws.get(path + ".w");
    const Tensor* b = has_bias ? &ws.get(path + ".b") : nullptr;
    const int L = x.dim(1);
    Tensor y({out, L});
    for (int o = 0; o < out; ++o) {
        const float* wrow = &w.data[static_cast<std::size_t>(o) * in];
        for (int t = 0; t < L; ++t) {
            double acc = b ? static_cast<double>(b->data[static_cast<std::size_t>(o)]) : 0.0;
            for (int i = 0; i < in; ++i)
                acc += static_cast<double>(wrow[i]) * static_cast<double>(x.at(i, t));
            y.at(o, t) = static_cast<float>(acc);
        }
    }
    return y;
}

// ---- ConvBnAct --------------------------------------------------------------

ConvBnAct ConvBnAct::make(const std::string& path, int cin, int cout, int k, int stride) {
    ConvBnAct m;
    m.conv = Conv2dLayer::make(path + ".conv", cin, cout, k, stride, 1, false);
    m.bn = BatchNormLayer{path + ".bn", cout};
    return m;
}

void ConvBnAct::plan(Plan& p) const {
    conv.plan(p);
    bn.plan(p);
}

Tensor ConvBnAct::forward(const WeightStore& ws, const Tensor& x) const {
    return activate(bn.forward(ws, conv.forward(ws, x)), act);
}

void ConvBnAct::cost(CostRows& rows, int in_h, int in_w) const {
    conv.cost(rows, in_h, in_w);
    bn.cost(rows);
}

}  // namespace odm
