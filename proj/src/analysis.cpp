#include "odm/analysis.hpp"

#include <cmath>
#include <stdexcept>

#include "odm/rng.hpp"

namespace odm {

CostReport CostReport::from_rows(CostRows r) {
    CostReport rep;
    rep.rows = std::move(r);
    for (const auto& row : rep.rows) {
        rep.total_params += row.params;
        rep.total_macs += row.macs;
    }
    return rep;
}

CostReport count_params(const ModelConfig& cfg) {
    const Model m = Model::make(cfg);
    CostRows rows = m.backbone_cost(64, 64);  // spatial size irrelevant for params
    CostRows neck = m.neck_cost(64, 64);
    rows.insert(rows.end(), neck.begin(), neck.end());
    for (auto& r : rows) r.macs = 0;
    return CostReport::from_rows(std::move(rows));
}

CostReport count_macs(const ModelConfig& cfg, int input_h, int input_w) {
    if (input_h % 32 != 0 || input_w % 32 != 0)
        throw std::invalid_argument("count_macs: input dims must be divisible by 32");
    const Model m = Model::make(cfg);
    CostRows rows = m.backbone_cost(input_h, input_w);
    CostRows neck = m.neck_cost(input_h, input_w);
    rows.insert(rows.end(), neck.begin(), neck.end());
    return CostReport::from_rows(std::move(rows));
}

namespace {

double loss_of(const SequenceBatch<double>& batch, const std::vector<double>& A,
               const std::vector<double>& upstream) {
    auto res = selective_scan(batch, A, false);
    double loss = 0.0;
    for (std::size_t i = 0; i < res.y.size(); ++i) loss += upstream[i] * res.y[i];
    return loss;
}

struct CoordSet {
    const char* name;
    std::vector<double>* primal;
    const std::vector<double>* analytic;
};

}  // namespace

GradCheckReport grad_check_selective_scan(const SequenceBatch<double>& batch,
                                          const std::vector<double>& A, double step,
                                          bool mutate_sign) {
    SequenceBatch<double> work = batch;
    std::vector<double> Awork = A;

    // Fixed upstream: deterministic non-degenerate weights.
    std::vector<double> upstream(static_cast<std::size_t>(batch.D) * batch.L);
    CounterRng urng(0x5eed, "gradcheck.upstream");
    for (std::size_t i = 0; i < upstream.size(); ++i) upstream[i] = urng.uniform(i, -1.0, 1.0);

    auto fwd = selective_scan(batch, A, true);
    auto grads = selective_scan_backward(batch, A, fwd, upstream);
    if (mutate_sign && !grads.x.empty()) grads.x[0] = -grads.x[0];

    CoordSet sets[] = {
        {"x", &work.x, &grads.x},         {"delta", &work.delta, &grads.delta},
        {"b", &work.b, &grads.b},         {"c", &work.c, &grads.c},
        {"A", &Awork, &grads.A},
    };

    GradCheckReport rep;
    for (const auto& s : sets) {
        for (std::size_t i = 0; i < s.primal->size(); ++i) {
            const double orig = (*s.primal)[i];
            (*s.primal)[i] = orig + step;
            const double fp = loss_of(work, Awork, upstream);
            (*s.primal)[i] = orig - step;
            const double fm = loss_of(work, Awork, upstream);
            (*s.primal)[i] = orig;
            const double numeric = (fp - fm) / (2.0 * step);
            const double analytic = (*s.analytic)[i];
            if (!std::isfinite(numeric) || !std::isfinite(analytic)) {
                rep.finite = false;
                rep.worst_coordinate = std::string(s.name) + "[" + std::to_string(i) + "]";
                return rep;
            }
            const double denom =
                std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            const double rel = std::abs(analytic - numeric) / denom;
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_coordinate = std::string(s.name) + "[" + std::to_string(i) + "]";
            }
        }
    }
    return rep;
}

GradCheckReport grad_check_random_instance(std::uint64_t seed, int trial, int D, int N, int L,
                                           double step) {
    SequenceBatch<double> batch;
    batch.D = D;
    batch.N = N;
    batch.L = L;
    const std::string tag = "gradcheck.trial" + std::to_string(trial);
    CounterRng rng(seed, tag);
    std::uint64_t ctr = 0;
    auto draw = [&](double lo, double hi) { return rng.uniform(ctr++, lo, hi); };
    batch.x.resize(static_cast<std::size_t>(D) * L);
    batch.delta.resize(batch.x.size());
    for (auto& v : batch.x) v = draw(-1.0, 1.0);
    for (auto& v : batch.delta) v = draw(0.05, 0.5);
    batch.b.resize(static_cast<std::size_t>(N) * L);
    batch.c.resize(batch.b.size());
    for (auto& v : batch.b) v = draw(-1.0, 1.0);
    for (auto& v : batch.c) v = draw(-1.0, 1.0);
    std::vector<double> A(static_cast<std::size_t>(D) * N);
    for (auto& v : A) v = draw(-2.0, -0.1);
    return grad_check_selective_scan(batch, A, step);
}

}  // namespace odm
