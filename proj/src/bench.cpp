#include "odm/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "odm/rng.hpp"
#include "odm/ss2d.hpp"
#include "odm/ssm_scan.hpp"

namespace odm {

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn) {
    const auto t0 = Clock::now();
    fn();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

BenchRow measure(std::int64_t size, int repeats, const std::function<void()>& fn) {
    for (int i = 0; i < 2; ++i) fn();  // warmup
    std::vector<double> samples(static_cast<std::size_t>(repeats));
    for (int i = 0; i < repeats; ++i) samples[static_cast<std::size_t>(i)] = time_ms(fn);
    std::sort(samples.begin(), samples.end());
    auto quantile = [&samples](double q) {
        const double pos = q * (static_cast<double>(samples.size()) - 1.0);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, samples.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return samples[lo] * (1.0 - frac) + samples[hi] * frac;
    };
    return {size, quantile(0.5), quantile(0.25), quantile(0.75)};
}

std::vector<float> random_vec(std::uint64_t seed, const std::string& tag, std::size_t n,
                              float lo = -1.0f, float hi = 1.0f) {
    CounterRng rng(seed, tag);
    std::vector<float> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<float>(rng.uniform(i, lo, hi));
    return v;
}

}  // namespace

BenchReport run_bench(const std::string& op, const std::vector<std::int64_t>& sizes, int repeats,
                      std::uint64_t seed) {
    if (repeats < 1) throw std::invalid_argument("bench: repeats must be >= 1");
    if (sizes.empty()) throw std::invalid_argument("bench: no sizes given");
    BenchReport rep;
    rep.op = op;

    volatile float guard = 0.0f;  // keeps results observable

    for (std::int64_t size : sizes) {
        if (op == "scan-recurrent" || op == "scan-conv") {
            const int N = 16;
            const int L = static_cast<int>(size);
            SsmParams<float> p;
            p.a = random_vec(seed, "bench.a", N, -2.0f, -0.1f);
            p.b = random_vec(seed, "bench.b", N);
            p.c = random_vec(seed, "bench.c", N);
            p.delta = 0.1f;
            const auto disc = zoh_discretize(p);
            const auto x = random_vec(seed, "bench.x" + std::to_string(L), static_cast<std::size_t>(L));
            if (op == "scan-recurrent") {
                rep.rows.push_back(measure(size, repeats, [&] {
                    const auto y = scan_recurrent(disc, p.c, x);
                    guard = guard + y.back();
                }));
            } else {
                const auto k = build_kernel(disc, p.c, x.size());
                rep.rows.push_back(measure(size, repeats, [&] {
                    const auto y = scan_convolutional(k, x);
                    guard = guard + y.back();
                }));
            }
        } else if (op == "selective") {
            const int D = 4, N = 16;
            const int L = static_cast<int>(size);
            SequenceBatch<float> batch;
            batch.D = D;
            batch.N = N;
            batch.L = L;
            batch.x = random_vec(seed, "bench.sx" + std::to_string(L), static_cast<std::size_t>(D) * L);
            batch.delta = random_vec(seed, "bench.sd" + std::to_string(L),
                                     static_cast<std::size_t>(D) * L, 0.01f, 0.2f);
            batch.b = random_vec(seed, "bench.sb" + std::to_string(L), static_cast<std::size_t>(N) * L);
            batch.c = random_vec(seed, "bench.sc" + std::to_string(L), static_cast<std::size_t>(N) * L);
            const auto A = random_vec(seed, "bench.sA", static_cast<std::size_t>(D) * N, -2.0f, -0.1f);
            rep.rows.push_back(measure(size, repeats, [&] {
                const auto res = selective_scan(batch, A, false);
                guard = guard + res.y.back();
            }));
        } else if (op == "ss2d") {
            const int side = static_cast<int>(size);
            const int dim = 16;
            const Ss2dOp ss2d = Ss2dOp::make("bench.ss2d", dim, 2 * dim, 8, 2);
            Plan plan;
            ss2d.plan(plan);
            const WeightStore ws = init_weights(plan, seed);
            Tensor fm({dim, side, side},
                      random_vec(seed, "bench.fm" + std::to_string(side),
                                 static_cast<std::size_t>(dim) * side * side));
            rep.rows.push_back(measure(static_cast<std::int64_t>(side) * side, repeats, [&] {
                const Tensor out = ss2d.forward(ws, fm);
                guard = guard + out.data.back();
            }));
        } else {
            throw std::invalid_argument("bench: unknown op '" + op + "'");
        }
    }

    // log-log least-squares slope; 1.0 == linear scaling.
    if (rep.rows.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double n = static_cast<double>(rep.rows.size());
        for (const auto& row : rep.rows) {
            const double lx = std::log2(static_cast<double>(row.size));
            const double ly = std::log2(std::max(row.median_ms, 1e-9));
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
        }
        rep.fit_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    return rep;
}

std::string format_bench_report(const BenchReport& rep) {
    std::ostringstream os;
    os << "op\tsize\tmedian_ms\tq25_ms\tq75_ms\n";
    for (const auto& row : rep.rows) {
        os << rep.op << "\t" << row.size << "\t" << row.median_ms << "\t" << row.iqr_lo_ms << "\t"
           << row.iqr_hi_ms << "\n";
    }
    if (rep.rows.size() >= 2) os << "# log-log slope\t" << rep.fit_slope << "\n";
    return os.str();
}

}  // namespace odm
