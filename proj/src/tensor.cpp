#include "odm/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "odm/threading.hpp"

namespace odm {

std::int64_t shape_numel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

static void check_shape(const std::vector<int>& s) {
    if (s.empty()) throw std::invalid_argument("tensor rank must be >= 1");
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] < 1) {
            throw std::invalid_argument("tensor axis " + std::to_string(i) +
                                        " must be >= 1, got " + std::to_string(s[i]));
        }
    }
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
    check_shape(shape);
    data.assign(static_cast<std::size_t>(shape_numel(shape)), 0.0f);
}

Tensor::Tensor(std::vector<int> s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
    check_shape(shape);
    if (static_cast<std::int64_t>(data.size()) != shape_numel(shape)) {
        throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                    " does not match shape " + shape_str());
    }
}

Tensor Tensor::full(std::vector<int> s, float v) {
    Tensor t(std::move(s));
    for (float& x : t.data) x = v;
    return t;
}

std::int64_t Tensor::numel() const { return shape_numel(shape); }

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
}

void ConvSpec::validate() const {
    if (in_channels < 1 || out_channels < 1) throw std::invalid_argument("conv channels must be >= 1");
    if (kernel_size < 1 || stride < 1 || padding < 0 || groups < 1)
        throw std::invalid_argument("conv kernel/stride/padding/groups out of range");
    if (in_channels % groups != 0)
        throw std::invalid_argument("conv in_channels " + std::to_string(in_channels) +
                                    " not divisible by groups " + std::to_string(groups));
    if (out_channels % groups != 0)
        throw std::invalid_argument("conv out_channels " + std::to_string(out_channels) +
                                    " not divisible by groups " + std::to_string(groups));
}

Tensor conv2d(const Tensor& input, const ConvSpec& spec, const Tensor& weight, const Tensor* bias) {
    spec.validate();
    if (input.rank() != 3)
        throw std::invalid_argument("conv2d input must be C×H×W, got " + input.shape_str());
    const int cin = input.dim(0), H = input.dim(1), W = input.dim(2);
    if (cin != spec.in_channels)
        throw std::invalid_argument("conv2d channel axis mismatch: input has " + std::to_string(cin) +
                                    " channels, spec expects " + std::to_string(spec.in_channels));
    const int k = spec.kernel_size;
    const int cin_g = spec.in_channels / spec.groups;
    const int cout_g = spec.out_channels / spec.groups;
    std::vector<int> wshape = {spec.out_channels, cin_g, k, k};
    if (weight.shape != wshape)
        throw std::invalid_argument("conv2d weight shape " + weight.shape_str() + " mismatch, expected [" +
                                    std::to_string(spec.out_channels) + "x" + std::to_string(cin_g) + "x" +
                                    std::to_string(k) + "x" + std::to_string(k) + "]");
    if (spec.has_bias) {
        if (bias == nullptr || bias->shape != std::vector<int>{spec.out_channels})
            throw std::invalid_argument("conv2d bias must be a length-" +
                                        std::to_string(spec.out_channels) + " vector");
    }
    const int Ho = spec.out_extent(H);
    const int Wo = spec.out_extent(W);
    if (Ho < 1 || Wo < 1)
        throw std::invalid_argument("conv2d output spatial axis would be empty for input " + input.shape_str());

    Tensor out({spec.out_channels, Ho, Wo});
    parallel_for(spec.out_channels, [&](int co) {
        const int g = co / cout_g;
        const float* wbase = &weight.data[static_cast<std::size_t>(co) * cin_g * k * k];
        for (int oh = 0; oh < Ho; ++oh) {
            for (int ow = 0; ow < Wo; ++ow) {
                double acc = 0.0;
                for (int ci = 0; ci < cin_g; ++ci) {
                    const int c = g * cin_g + ci;
                    for (int kh = 0; kh < k; ++kh) {
                        const int ih = oh * spec.stride + kh - spec.padding;
                        if (ih < 0 || ih >= H) continue;
                        for (int kw = 0; kw < k; ++kw) {
                            const int iw = ow * spec.stride + kw - spec.padding;
                            if (iw < 0 || iw >= W) continue;
                            acc += static_cast<double>(input.at(c, ih, iw)) *
                                   static_cast<double>(wbase[(ci * k + kh) * k + kw]);
                        }
                    }
                }
                if (spec.has_bias) acc += static_cast<double>(bias->data[co]);
                out.at(co, oh, ow) = static_cast<float>(acc);
            }
        }
    });
    return out;
}

Tensor batch_norm_infer(const Tensor& input, const std::vector<float>& mean,
                        const std::vector<float>& var, const std::vector<float>& gamma,
                        const std::vector<float>& beta, float eps) {
    if (input.rank() != 3) throw std::invalid_argument("batch_norm_infer input must be C×H×W");
    const std::size_t C = static_cast<std::size_t>(input.dim(0));
    if (mean.size() != C || var.size() != C || gamma.size() != C || beta.size() != C)
        throw std::invalid_argument("batch_norm_infer parameter vectors must have length " +
                                    std::to_string(C));
    if (!(eps > 0.0f)) throw std::invalid_argument("batch_norm_infer eps must be > 0");
    for (std::size_t c = 0; c < C; ++c)
        if (var[c] < 0.0f)
            throw std::invalid_argument("batch_norm_infer var[" + std::to_string(c) + "] is negative");

    Tensor out(input.shape);
    const std::size_t hw = static_cast<std::size_t>(input.dim(1)) * input.dim(2);
    for (std::size_t c = 0; c < C; ++c) {
        const float scale = gamma[c] / std::sqrt(var[c] + eps);
        const float shift = beta[c] - mean[c] * scale;
        const float* in = &input.data[c * hw];
        float* o = &out.data[c * hw];
        for (std::size_t i = 0; i < hw; ++i) o[i] = in[i] * scale + shift;
    }
    return out;
}

Tensor layer_norm(const Tensor& input, const std::vector<float>& gamma,
                  const std::vector<float>& beta, float eps) {
    if (input.rank() != 3) throw std::invalid_argument("layer_norm input must be C×H×W");
    const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    if (gamma.size() != static_cast<std::size_t>(C) || beta.size() != static_cast<std::size_t>(C))
        throw std::invalid_argument("layer_norm gamma/beta must have length " + std::to_string(C));

    Tensor out(input.shape);
    const std::size_t hw = static_cast<std::size_t>(H) * W;
    for (std::size_t p = 0; p < hw; ++p) {
        double sum = 0.0;
        for (int c = 0; c < C; ++c) sum += input.data[c * hw + p];
        const double mu = sum / C;
        double sq = 0.0;
        for (int c = 0; c < C; ++c) {
            const double d = input.data[c * hw + p] - mu;
            sq += d * d;
        }
        const double inv = 1.0 / std::sqrt(sq / C + eps);
        for (int c = 0; c < C; ++c) {
            const double norm = (input.data[c * hw + p] - mu) * inv;
            out.data[c * hw + p] = static_cast<float>(norm * gamma[static_cast<std::size_t>(c)] +
                                                      beta[static_cast<std::size_t>(c)]);
        }
    }
    return out;
}

float activate_scalar(float x, ActivationKind kind) {
    switch (kind) {
        case ActivationKind::SiLU:
            return static_cast<float>(x / (1.0 + std::exp(-static_cast<double>(x))));
        case ActivationKind::GELU: {
            const double xd = x;
            const double c = 0.7978845608028654;  // sqrt(2/pi)
            const double t = std::tanh(c * (xd + 0.044715 * xd * xd * xd));
            return static_cast<float>(0.5 * xd * (1.0 + t));
        }
        case ActivationKind::Identity:
            return x;
    }
    return x;
}

Tensor activate(const Tensor& input, ActivationKind kind) {
    if (kind == ActivationKind::Identity) return input;
    Tensor out(input.shape);
    for (std::size_t i = 0; i < input.data.size(); ++i)
        out.data[i] = activate_scalar(input.data[i], kind);
    return out;
}

Tensor elementwise(const Tensor& a, const Tensor& b, BinaryOp op) {
    if (!a.same_shape(b))
        throw std::invalid_argument("elementwise shape mismatch: " + a.shape_str() + " vs " +
                                    b.shape_str());
    Tensor out(a.shape);
    if (op == BinaryOp::Add) {
        for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] + b.data[i];
    } else {
        for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] * b.data[i];
    }
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.rank() != 3 || b.rank() != 3 || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
        throw std::invalid_argument("concat_channels spatial mismatch: " + a.shape_str() + " vs " +
                                    b.shape_str());
    Tensor out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
    return out;
}

Tensor upsample_nearest_2x(const Tensor& input) {
    if (input.rank() != 3) throw std::invalid_argument("upsample_nearest_2x input must be C×H×W");
    const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    Tensor out({C, 2 * H, 2 * W});
    for (int c = 0; c < C; ++c)
        for (int h = 0; h < 2 * H; ++h)
            for (int w = 0; w < 2 * W; ++w) out.at(c, h, w) = input.at(c, h / 2, w / 2);
    return out;
}

Tensor pad_spatial(const Tensor& input, int pad_h, int pad_w) {
    if (input.rank() != 3) throw std::invalid_argument("pad_spatial input must be C×H×W");
    if (pad_h == 0 && pad_w == 0) return input;
    const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
    Tensor out({C, H + pad_h, W + pad_w});
    for (int c = 0; c < C; ++c)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) out.at(c, h, w) = input.at(c, h, w);
    return out;
}

}  // namespace odm
