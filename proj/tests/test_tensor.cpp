#include "test_main.hpp"

#include <cmath>
#include <vector>

#include "odm/rng.hpp"
#include "odm/tensor.hpp"
#include "odm/tensor_io.hpp"

using namespace odm;

namespace {

Tensor random_tensor(std::vector<int> shape, std::uint64_t seed, const std::string& tag,
                     float lo = -1.0f, float hi = 1.0f) {
    Tensor t(std::move(shape));
    CounterRng rng(seed, tag);
    for (std::size_t i = 0; i < t.data.size(); ++i)
        t.data[i] = static_cast<float>(rng.uniform(i, lo, hi));
    return t;
}

// Independent reference: the plain six-nested-loop cross-correlation,
// written directly from the definition (dense, groups == 1).
Tensor conv2d_naive(const Tensor& in, const Tensor& w, int stride, int padding) {
    const int cin = in.dim(0), H = in.dim(1), W = in.dim(2);
    const int cout = w.dim(0), k = w.dim(2);
    const int Ho = (H + 2 * padding - k) / stride + 1;
    const int Wo = (W + 2 * padding - k) / stride + 1;
    Tensor out({cout, Ho, Wo});
    for (int co = 0; co < cout; ++co)
        for (int oh = 0; oh < Ho; ++oh)
            for (int ow = 0; ow < Wo; ++ow) {
                double acc = 0.0;
                for (int ci = 0; ci < cin; ++ci)
                    for (int kh = 0; kh < k; ++kh)
                        for (int kw = 0; kw < k; ++kw) {
                            const int ih = oh * stride + kh - padding;
                            const int iw = ow * stride + kw - padding;
                            if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                            acc += static_cast<double>(in.at(ci, ih, iw)) *
                                   w.data[((static_cast<std::size_t>(co) * cin + ci) * k + kh) * k + kw];
                        }
                out.at(co, oh, ow) = static_cast<float>(acc);
            }
    return out;
}

}  // namespace

TEST_CASE("conv2d: 1x1 identity-permutation weight permutes channels") {
    const Tensor in = random_tensor({3, 4, 4}, 7, "perm.in");
    // permutation 0->2, 1->0, 2->1
    Tensor w({3, 3, 1, 1});
    w.at(0, 1, 0) = 1.0f;  // out 0 = in 1
    w.at(1, 2, 0) = 1.0f;  // out 1 = in 2
    w.at(2, 0, 0) = 1.0f;  // out 2 = in 0
    const ConvSpec spec{3, 3, 1, 1, 0, 1, false};
    const Tensor out = conv2d(in, spec, w);
    for (int h = 0; h < 4; ++h)
        for (int ww = 0; ww < 4; ++ww) {
            CHECK(out.at(0, h, ww) == in.at(1, h, ww));
            CHECK(out.at(1, h, ww) == in.at(2, h, ww));
            CHECK(out.at(2, h, ww) == in.at(0, h, ww));
        }
}

TEST_CASE("conv2d: depthwise all-ones 3x3 on all-ones 2x2 counts in-bounds neighbors") {
    const int C = 2;
    const Tensor in = Tensor::full({C, 2, 2}, 1.0f);
    const Tensor w = Tensor::full({C, 1, 3, 3}, 1.0f);
    const ConvSpec spec{C, C, 3, 1, 1, C, false};
    const Tensor out = conv2d(in, spec, w);
    // every output position of a 2x2 map is a corner: 4 in-bounds neighbors
    REQUIRE(out.shape == std::vector<int>{C, 2, 2});
    for (float v : out.data) CHECK(v == 4.0f);
}

TEST_CASE("conv2d: stride-2 3x3 on 8x8 with padding 1 gives 4x4") {
    const Tensor in = random_tensor({2, 8, 8}, 3, "s2.in");
    const Tensor w = random_tensor({5, 2, 3, 3}, 3, "s2.w");
    const ConvSpec spec{2, 5, 3, 2, 1, 1, false};
    CHECK(conv2d(in, spec, w).shape == std::vector<int>{5, 4, 4});
}

TEST_CASE("conv2d matches the six-loop reference on random instances") {
    for (int trial = 0; trial < 30; ++trial) {
        CounterRng rng(42, "conv.dims" + std::to_string(trial));
        const int cin = 1 + static_cast<int>(rng.bits(0) % 8);
        const int cout = 1 + static_cast<int>(rng.bits(1) % 8);
        const int H = 1 + static_cast<int>(rng.bits(2) % 8);
        const int W = 1 + static_cast<int>(rng.bits(3) % 8);
        int k = 1 + static_cast<int>(rng.bits(4) % 8);
        if (k > H + 1) k = H + 1 > 8 ? 8 : H + 1;
        const int stride = 1 + static_cast<int>(rng.bits(5) % 2);
        const int padding = k / 2;
        if ((H + 2 * padding - k) < 0 || (W + 2 * padding - k) < 0) continue;
        const auto tag = std::to_string(trial);
        const Tensor in = random_tensor({cin, H, W}, 42, "conv.in" + tag);
        const Tensor w = random_tensor({cout, cin, k, k}, 42, "conv.w" + tag);
        const ConvSpec spec{cin, cout, k, stride, padding, 1, false};
        const Tensor got = conv2d(in, spec, w);
        const Tensor want = conv2d_naive(in, w, stride, padding);
        REQUIRE(got.shape == want.shape);
        for (std::size_t i = 0; i < got.data.size(); ++i)
            CHECK(std::abs(got.data[i] - want.data[i]) <= 1e-5f);
    }
}

TEST_CASE("conv2d rejects mismatched shapes with a diagnostic naming the axis") {
    const Tensor in = random_tensor({3, 4, 4}, 1, "err.in");
    const Tensor w = random_tensor({4, 3, 3, 3}, 1, "err.w");
    const ConvSpec spec{2, 4, 3, 1, 1, 1, false};
    CHECK_THROWS_WITH_AS(conv2d(in, spec, w), doctest::Contains("channel"), std::invalid_argument);
    const ConvSpec bad_w{3, 4, 5, 1, 2, 1, false};
    CHECK_THROWS_WITH_AS(conv2d(in, bad_w, w), doctest::Contains("weight"), std::invalid_argument);
}

TEST_CASE("batch_norm_infer identity and constant cases") {
    const Tensor in = random_tensor({2, 3, 3}, 9, "bn.in");
    const std::vector<float> zeros(2, 0.0f), ones(2, 1.0f);
    SUBCASE("mean 0 var 1 gamma 1 beta 0 tiny eps is near-identity") {
        const Tensor out = batch_norm_infer(in, zeros, ones, ones, zeros, 1e-12f);
        for (std::size_t i = 0; i < in.data.size(); ++i)
            CHECK(out.data[i] == doctest::Approx(in.data[i]).epsilon(1e-6));
    }
    SUBCASE("constant input equal to mean gives beta everywhere") {
        const std::vector<float> mean = {0.5f, -1.5f};
        const std::vector<float> beta = {2.0f, 3.0f};
        Tensor cst({2, 3, 3});
        for (int h = 0; h < 3; ++h)
            for (int w = 0; w < 3; ++w) {
                cst.at(0, h, w) = mean[0];
                cst.at(1, h, w) = mean[1];
            }
        const Tensor out = batch_norm_infer(cst, mean, ones, ones, beta, 1e-5f);
        for (int h = 0; h < 3; ++h)
            for (int w = 0; w < 3; ++w) {
                CHECK(out.at(0, h, w) == beta[0]);
                CHECK(out.at(1, h, w) == beta[1]);
            }
    }
    SUBCASE("random parameters match the scalar formula elementwise") {
        const Tensor x = random_tensor({2, 2, 2}, 9, "bn.x");
        const std::vector<float> mean = {0.3f, -0.2f}, var = {1.5f, 0.7f};
        const std::vector<float> gamma = {1.2f, -0.8f}, beta = {0.1f, 0.4f};
        const float eps = 1e-5f;
        const Tensor out = batch_norm_infer(x, mean, var, gamma, beta, eps);
        for (int c = 0; c < 2; ++c)
            for (int h = 0; h < 2; ++h)
                for (int w = 0; w < 2; ++w) {
                    const float want = gamma[static_cast<std::size_t>(c)] *
                                           (x.at(c, h, w) - mean[static_cast<std::size_t>(c)]) /
                                           std::sqrt(var[static_cast<std::size_t>(c)] + eps) +
                                       beta[static_cast<std::size_t>(c)];
                    CHECK(out.at(c, h, w) == doctest::Approx(want).epsilon(1e-6));
                }
    }
    SUBCASE("negative variance is rejected") {
        const std::vector<float> var = {1.0f, -0.5f};
        CHECK_THROWS_AS(batch_norm_infer(in, zeros, var, ones, zeros, 1e-5f), std::invalid_argument);
    }
}

TEST_CASE("layer_norm properties") {
    const std::vector<float> gamma(4, 1.0f), beta(4, 0.0f);
    SUBCASE("constant-over-channels input maps to zeros") {
        Tensor in({4, 2, 2});
        for (int c = 0; c < 4; ++c)
            for (int h = 0; h < 2; ++h)
                for (int w = 0; w < 2; ++w) in.at(c, h, w) = static_cast<float>(h * 2 + w);
        const Tensor out = layer_norm(in, gamma, beta, 1e-5f);
        for (float v : out.data) CHECK(v == 0.0f);
    }
    SUBCASE("per-position channel mean of output is zero") {
        const Tensor in = random_tensor({4, 3, 5}, 11, "ln.in");
        const Tensor out = layer_norm(in, gamma, beta, 1e-5f);
        for (int h = 0; h < 3; ++h)
            for (int w = 0; w < 5; ++w) {
                double sum = 0.0;
                for (int c = 0; c < 4; ++c) sum += out.at(c, h, w);
                CHECK(std::abs(sum / 4.0) <= 1e-6);
            }
    }
    SUBCASE("matches the direct per-position computation on a random 4x2x2 input") {
        const Tensor in = random_tensor({4, 2, 2}, 11, "ln.direct");
        const std::vector<float> g = {1.5f, -0.5f, 2.0f, 1.0f}, b = {0.1f, 0.2f, -0.3f, 0.0f};
        const float eps = 1e-5f;
        const Tensor out = layer_norm(in, g, b, eps);
        for (int h = 0; h < 2; ++h)
            for (int w = 0; w < 2; ++w) {
                double mu = 0.0;
                for (int c = 0; c < 4; ++c) mu += in.at(c, h, w);
                mu /= 4.0;
                double var = 0.0;
                for (int c = 0; c < 4; ++c) {
                    const double d = in.at(c, h, w) - mu;
                    var += d * d;
                }
                var /= 4.0;
                for (int c = 0; c < 4; ++c) {
                    const double want =
                        (in.at(c, h, w) - mu) / std::sqrt(var + eps) * g[static_cast<std::size_t>(c)] +
                        b[static_cast<std::size_t>(c)];
                    CHECK(out.at(c, h, w) == doctest::Approx(want).epsilon(1e-5));
                }
            }
    }
}

TEST_CASE("activations") {
    CHECK(activate_scalar(0.0f, ActivationKind::SiLU) == 0.0f);
    CHECK(activate_scalar(0.0f, ActivationKind::GELU) == 0.0f);
    CHECK(activate_scalar(1.0f, ActivationKind::SiLU) ==
          doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-7));
    SUBCASE("GELU grid matches a long-double evaluation of the tanh form") {
        for (int i = -30; i <= 30; ++i) {
            const float x = static_cast<float>(i) / 10.0f;
            const long double xl = static_cast<long double>(x);
            const long double c = 0.79788456080286535588L;  // sqrt(2/pi)
            const long double want = 0.5L * xl * (1.0L + std::tanh(c * (xl + 0.044715L * xl * xl * xl)));
            CHECK(activate_scalar(x, ActivationKind::GELU) ==
                  doctest::Approx(static_cast<double>(want)).epsilon(1e-6));
        }
    }
    SUBCASE("identity is bit-exact") {
        const Tensor in = random_tensor({2, 3, 3}, 5, "act.id", -50.0f, 50.0f);
        CHECK(activate(in, ActivationKind::Identity).data == in.data);
    }
}

TEST_CASE("elementwise add/mul") {
    const Tensor a = random_tensor({2, 2, 2}, 13, "ew.a");
    const Tensor zero = Tensor::zeros({2, 2, 2});
    const Tensor one = Tensor::full({2, 2, 2}, 1.0f);
    CHECK(elementwise(a, zero, BinaryOp::Add).data == a.data);
    CHECK(elementwise(a, one, BinaryOp::Mul).data == a.data);
    const Tensor b = random_tensor({2, 2}, 13, "ew.b");
    const Tensor b2 = random_tensor({2, 2}, 13, "ew.b2");
    const Tensor prod = elementwise(b, b2, BinaryOp::Mul);
    for (std::size_t i = 0; i < prod.data.size(); ++i) CHECK(prod.data[i] == b.data[i] * b2.data[i]);
    CHECK_THROWS_AS(elementwise(a, b, BinaryOp::Add), std::invalid_argument);
}

TEST_CASE("tensor invariants") {
    CHECK_THROWS_AS(Tensor({0, 2}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<float>(3)), std::invalid_argument);
    CHECK_THROWS_AS(Tensor(std::vector<int>{}), std::invalid_argument);
}

TEST_CASE("MYT1 round trip preserves shape and payload bit-exactly") {
    const Tensor t = random_tensor({3, 5, 7}, 17, "io.t", -100.0f, 100.0f);
    const std::string path = "/tmp/odm_test_tensor.myt";
    write_myt(path, t);
    const Tensor back = read_myt(path);
    CHECK(back.shape == t.shape);
    CHECK(back.data == t.data);
}
