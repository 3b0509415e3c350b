#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace odm {

// Dense N-dimensional f32 array, row-major (last axis fastest).
// Tensors are immutable values once built; all ops below are pure functions.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);
    Tensor(std::vector<int> s, std::vector<float> d);

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, float v);

    int rank() const { return static_cast<int>(shape.size()); }
    std::int64_t numel() const;
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    // C×H×W accessors.
    float& at(int c, int h, int w) {
        return data[(static_cast<std::size_t>(c) * shape[1] + h) * shape[2] + w];
    }
    float at(int c, int h, int w) const {
        return data[(static_cast<std::size_t>(c) * shape[1] + h) * shape[2] + w];
    }
    // C×L accessors.
    float& at(int c, int t) { return data[static_cast<std::size_t>(c) * shape[1] + t]; }
    float at(int c, int t) const { return data[static_cast<std::size_t>(c) * shape[1] + t]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    std::string shape_str() const;
};

std::int64_t shape_numel(const std::vector<int>& shape);

struct ConvSpec {
    int in_channels = 0;
    int out_channels = 0;
    int kernel_size = 1;  // square
    int stride = 1;
    int padding = 0;
    int groups = 1;  // 1 = dense, groups == in_channels = depthwise
    bool has_bias = false;

    void validate() const;
    int out_extent(int in_extent) const {
        return (in_extent + 2 * padding - kernel_size) / stride + 1;
    }
};

enum class ActivationKind { SiLU, GELU, Identity };

// Direct cross-correlation (no kernel flip). f64 accumulation per output
// element; summation order is fixed (in-group channel, then kh, then kw)
// so results are bit-identical at any thread count.
Tensor conv2d(const Tensor& input, const ConvSpec& spec, const Tensor& weight,
              const Tensor* bias = nullptr);

// Inference-mode batch norm with stored statistics.
Tensor batch_norm_infer(const Tensor& input, const std::vector<float>& mean,
                        const std::vector<float>& var, const std::vector<float>& gamma,
                        const std::vector<float>& beta, float eps);

// Normalizes over the channel axis at each spatial position.
Tensor layer_norm(const Tensor& input, const std::vector<float>& gamma,
                  const std::vector<float>& beta, float eps);

// SiLU(x) = x * sigmoid(x).
// GELU uses the fixed tanh approximation
//   0.5 * x * (1 + tanh(sqrt(2/pi) * (x + 0.044715 * x^3)))
// so outputs are reproducible across platforms.
Tensor activate(const Tensor& input, ActivationKind kind);
float activate_scalar(float x, ActivationKind kind);

enum class BinaryOp { Add, Mul };
Tensor elementwise(const Tensor& a, const Tensor& b, BinaryOp op);

// Shape plumbing used by the backbone/neck.
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor upsample_nearest_2x(const Tensor& input);
Tensor pad_spatial(const Tensor& input, int pad_h, int pad_w);  // zero pad bottom/right

}  // namespace odm
