#include "test_main.hpp"

#include <cmath>
#include <string>

#include "odm/analysis.hpp"
#include "odm/bench.hpp"
#include "odm/rng.hpp"

using namespace odm;

namespace {

ModelConfig test_config() {
    ModelConfig cfg;
    cfg.variant = "test";
    cfg.stem_channels = 8;
    cfg.stages = {StageConfig{8, 1}, StageConfig{16, 1}, StageConfig{24, 1}, StageConfig{32, 1}};
    cfg.ssm_state_dim = 4;
    cfg.seed = 42;
    return cfg;
}

std::int64_t rows_params(const CostRows& rows, const std::string& prefix) {
    std::int64_t s = 0;
    for (const auto& r : rows)
        if (r.path.rfind(prefix, 0) == 0) s += r.params;
    return s;
}

}  // namespace

TEST_CASE("layer-level accounting oracles") {
    SUBCASE("1x1 dense conv 16->32 without bias holds 512 weights") {
        const Conv2dLayer l = Conv2dLayer::make("c", 16, 32, 1, 1, 1, false);
        CHECK(l.param_count() == 512);
        // at 8x8 output: 64 positions * 32 outs * 16 ins = 32768 MACs
        CHECK(l.macs(8, 8) == 32768);
    }
    SUBCASE("depthwise 3x3 on 64 channels with bias holds 640 scalars") {
        const Conv2dLayer l = Conv2dLayer::make("c", 64, 64, 3, 1, 64, true);
        CHECK(l.param_count() == 64 * 9 + 64);
        CHECK(l.macs(4, 4) == 16LL * 64 * 9);
    }
    SUBCASE("dense 3x3 8->16 matches positions*cout*cin*k^2") {
        const Conv2dLayer l = Conv2dLayer::make("c", 8, 16, 3, 1, 1, false);
        CHECK(l.macs(10, 12) == 120LL * 16 * 8 * 9);
    }
    SUBCASE("linear layer") {
        const LinearLayer l{"lin", 12, 7, true};
        CHECK(l.param_count() == 12 * 7 + 7);
        CHECK(l.macs(5) == 12LL * 7 * 5);
    }
    SUBCASE("norm rows carry parameters but zero MACs") {
        CostRows rows;
        BatchNormLayer{"bn", 16}.cost(rows);
        LayerNormLayer{"ln", 16}.cost(rows);
        for (const auto& r : rows) {
            CHECK(r.params == 32);
            CHECK(r.macs == 0);
        }
    }
}

TEST_CASE("analytic parameter count equals the number of allocated scalars") {
    const ModelConfig cfg = test_config();
    const Model m = Model::make(cfg);
    const Plan plan = m.plan();
    const WeightStore ws = init_weights(plan, cfg.seed);
    std::int64_t allocated = 0;
    for (const ParamDesc& d : plan.params) allocated += ws.get(d.path).numel();
    const CostReport rep = count_params(cfg);
    CHECK(rep.total_params == allocated);
    CHECK(rep.total_params == plan.param_count());
    CHECK(rep.total_macs == 0);
    // buffers (BN running stats) exist but are not counted
    std::int64_t buffer_scalars = 0;
    for (const ParamDesc& d : plan.buffers) buffer_scalars += ws.get(d.path).numel();
    CHECK(buffer_scalars > 0);
    CHECK(static_cast<std::int64_t>(ws.tensors.size()) ==
          static_cast<std::int64_t>(plan.params.size() + plan.buffers.size()));
}

TEST_CASE("MAC totals scale quadratically with input size") {
    const ModelConfig cfg = test_config();
    const CostReport a = count_macs(cfg, 64, 64);
    const CostReport b = count_macs(cfg, 128, 128);
    CHECK(a.total_macs > 0);
    CHECK(b.total_macs == 4 * a.total_macs);
    CHECK_THROWS_AS(count_macs(cfg, 100, 64), std::invalid_argument);
    SUBCASE("backbone-only and full totals are separable by path prefix") {
        std::int64_t backbone = 0, neck = 0;
        for (const auto& r : a.rows) {
            if (r.path.rfind("neck.", 0) == 0)
                neck += r.macs;
            else
                backbone += r.macs;
        }
        CHECK(backbone > 0);
        CHECK(neck > 0);
        CHECK(backbone + neck == a.total_macs);
    }
    SUBCASE("parameter split by prefix is consistent with count_params") {
        const CostReport p = count_params(cfg);
        CHECK(rows_params(p.rows, "stem.") + rows_params(p.rows, "backbone.") +
                  rows_params(p.rows, "neck.") ==
              p.total_params);
    }
}

TEST_CASE("gradient check on random instances stays within 1e-5") {
    for (int trial = 0; trial < 10; ++trial) {
        const GradCheckReport rep = grad_check_random_instance(7, trial, 2, 4, 8, 1e-5);
        CHECK(rep.finite);
        INFO("trial ", trial, " worst ", rep.worst_coordinate, " err ", rep.max_rel_err);
        CHECK(rep.max_rel_err <= 1e-5);
    }
}

TEST_CASE("gradient check on a linear-in-x instance is near machine precision for x") {
    // with fixed delta/b/c the loss is exactly linear in x, so central
    // differences are exact up to rounding
    SequenceBatch<double> batch;
    batch.D = 1;
    batch.N = 2;
    batch.L = 4;
    batch.x = {0.3, -0.2, 0.5, 0.1};
    batch.delta.assign(4, 0.2);
    batch.b.assign(8, 0.7);
    batch.c.assign(8, -0.4);
    const std::vector<double> A = {-1.0, -0.5};
    const auto fwd = selective_scan(batch, A, true);
    std::vector<double> upstream(4);
    CounterRng urng(0x5eed, "gradcheck.upstream");
    for (std::size_t i = 0; i < 4; ++i) upstream[i] = urng.uniform(i, -1.0, 1.0);
    const auto grads = selective_scan_backward(batch, A, fwd, upstream);
    const double h = 1e-5;
    for (std::size_t i = 0; i < 4; ++i) {
        auto b2 = batch;
        b2.x[i] += h;
        const auto yp = selective_scan(b2, A);
        b2.x[i] -= 2 * h;
        const auto ym = selective_scan(b2, A);
        double fp = 0.0, fm = 0.0;
        for (std::size_t t = 0; t < 4; ++t) {
            fp += upstream[t] * yp.y[t];
            fm += upstream[t] * ym.y[t];
        }
        const double num = (fp - fm) / (2 * h);
        CHECK(std::abs(grads.x[i] - num) <= 1e-9);
    }
}

TEST_CASE("a sign-flipped gradient is flagged") {
    SequenceBatch<double> batch;
    batch.D = 1;
    batch.N = 2;
    batch.L = 4;
    batch.x = {0.3, -0.2, 0.5, 0.1};
    batch.delta.assign(4, 0.2);
    batch.b.assign(8, 0.7);
    batch.c.assign(8, -0.4);
    const std::vector<double> A = {-1.0, -0.5};
    CHECK(grad_check_selective_scan(batch, A, 1e-5, false).pass(1e-5));
    const GradCheckReport bad = grad_check_selective_scan(batch, A, 1e-5, true);
    CHECK_FALSE(bad.pass(1e-5));
    CHECK(bad.worst_coordinate == "x[0]");
}

TEST_CASE("bench report structure") {
    const BenchReport rep = run_bench("scan-recurrent", {64, 128}, 3, 1);
    REQUIRE(rep.rows.size() == 2);
    CHECK(rep.rows[0].size == 64);
    CHECK(rep.rows[1].size == 128);
    for (const auto& r : rep.rows) {
        CHECK(r.median_ms >= 0.0);
        CHECK(r.iqr_lo_ms <= r.median_ms);
        CHECK(r.median_ms <= r.iqr_hi_ms);
    }
    const std::string text = format_bench_report(rep);
    CHECK(text.find("scan-recurrent") != std::string::npos);
    CHECK(text.find('\t') != std::string::npos);
    CHECK_THROWS_AS(run_bench("bogus-op", {64}, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(run_bench("scan-recurrent", {64}, 0, 1), std::invalid_argument);
}
