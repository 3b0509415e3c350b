#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace odm {

// MAC accounting for one recurrence step of one state entry: discretize
// (exp + two multiplies), advance h, emit c·h.
inline constexpr long long kScanMacsPerStep = 6;

// 1-D diagonal state-space machinery: ZOH discretization, the recurrent and
// convolutional scan forms, and the input-dependent selective scan with its
// analytic backward pass. Everything is templated on the scalar type so the
// f32 model path and the f64 verification path share one implementation.

template <class R>
struct SsmParams {
    std::vector<R> a;  // diagonal of the state matrix, length N
    std::vector<R> b;  // input weights, length N
    std::vector<R> c;  // observation weights, length N
    R delta = R(0);    // positive timestep
};

template <class R>
struct DiscreteSsm {
    std::vector<R> a_bar;
    std::vector<R> b_bar;
};

template <class R>
struct ScanKernel {
    std::vector<R> k_bar;  // k_bar[0] == dot(c, b_bar)
};

namespace detail {

// phi(u) = (e^u - 1) / u with phi(0) = 1, evaluated via expm1 so the
// |u| -> 0 limit is reached without cancellation.
template <class R>
R phi(R u) {
    if (u == R(0)) return R(1);
    return std::expm1(u) / u;
}

// phi'(u) = (u e^u - (e^u - 1)) / u^2, series below 1e-3 where the direct
// form cancels.
template <class R>
R phi_prime(R u) {
    const R au = u < R(0) ? -u : u;
    if (au < R(1e-3)) {
        return R(0.5) + u / R(3) + u * u / R(8) + u * u * u / R(30);
    }
    return (u * std::exp(u) - std::expm1(u)) / (u * u);
}

}  // namespace detail

// ZOH: a_bar = exp(delta*a), b_bar = (delta*a)^{-1} (exp(delta*a) - 1) delta*b,
// which reduces to delta*b in the |delta*a| -> 0 limit.
template <class R>
DiscreteSsm<R> zoh_discretize(const std::vector<R>& a, const std::vector<R>& b, R delta) {
    if (!(delta > R(0))) throw std::invalid_argument("zoh_discretize: delta must be > 0");
    if (a.size() != b.size()) throw std::invalid_argument("zoh_discretize: A and B length mismatch");
    DiscreteSsm<R> d;
    d.a_bar.resize(a.size());
    d.b_bar.resize(a.size());
    for (std::size_t n = 0; n < a.size(); ++n) {
        const R u = delta * a[n];
        d.a_bar[n] = std::exp(u);
        d.b_bar[n] = detail::phi(u) * delta * b[n];
    }
    return d;
}

template <class R>
DiscreteSsm<R> zoh_discretize(const SsmParams<R>& p) {
    return zoh_discretize(p.a, p.b, p.delta);
}

// h_t = a_bar ⊙ h_{t-1} + b_bar x_t ; y_t = c·h_t. O(L·N).
template <class R>
std::vector<R> scan_recurrent(const DiscreteSsm<R>& disc, const std::vector<R>& c,
                              const std::vector<R>& x, const std::vector<R>* h0 = nullptr) {
    const std::size_t N = disc.a_bar.size();
    if (disc.b_bar.size() != N || c.size() != N)
        throw std::invalid_argument("scan_recurrent: parameter length mismatch");
    if (h0 && h0->size() != N) throw std::invalid_argument("scan_recurrent: h0 length mismatch");
    std::vector<R> h = h0 ? *h0 : std::vector<R>(N, R(0));
    std::vector<R> y(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
        R yt = R(0);
        for (std::size_t n = 0; n < N; ++n) {
            h[n] = disc.a_bar[n] * h[n] + disc.b_bar[n] * x[t];
            yt += c[n] * h[n];
        }
        y[t] = yt;
    }
    return y;
}

// k_bar[j] = c · (a_bar^j ⊙ b_bar), j = 0..L-1.
template <class R>
ScanKernel<R> build_kernel(const DiscreteSsm<R>& disc, const std::vector<R>& c, std::size_t L) {
    const std::size_t N = disc.a_bar.size();
    if (disc.b_bar.size() != N || c.size() != N)
        throw std::invalid_argument("build_kernel: parameter length mismatch");
    if (L < 1) throw std::invalid_argument("build_kernel: L must be >= 1");
    ScanKernel<R> k;
    k.k_bar.resize(L);
    std::vector<R> pow_ab = disc.b_bar;  // a_bar^j ⊙ b_bar, starting at j = 0
    for (std::size_t j = 0; j < L; ++j) {
        R v = R(0);
        for (std::size_t n = 0; n < N; ++n) v += c[n] * pow_ab[n];
        k.k_bar[j] = v;
        if (j + 1 < L)
            for (std::size_t n = 0; n < N; ++n) pow_ab[n] *= disc.a_bar[n];
    }
    return k;
}

// Causal convolution y_t = sum_{j<=t} k_bar[j] x_{t-j}; assumes h0 = 0.
template <class R>
std::vector<R> scan_convolutional(const ScanKernel<R>& kernel, const std::vector<R>& x) {
    if (kernel.k_bar.size() != x.size())
        throw std::invalid_argument("scan_convolutional: kernel length " +
                                    std::to_string(kernel.k_bar.size()) +
                                    " != sequence length " + std::to_string(x.size()));
    std::vector<R> y(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
        R acc = R(0);
        for (std::size_t j = 0; j <= t; ++j) acc += kernel.k_bar[j] * x[t - j];
        y[t] = acc;
    }
    return y;
}

// Input-dependent (selective) scan over D independent channels.
// delta must already be positive (post-softplus); b and c are shared across
// channels, per position.
template <class R>
struct SequenceBatch {
    int D = 0, N = 0, L = 0;
    std::vector<R> x;      // D×L
    std::vector<R> delta;  // D×L
    std::vector<R> b;      // N×L
    std::vector<R> c;      // N×L

    void validate() const {
        if (D < 1 || N < 1 || L < 1) throw std::invalid_argument("SequenceBatch: D, N, L must be >= 1");
        if (x.size() != static_cast<std::size_t>(D) * L || delta.size() != x.size())
            throw std::invalid_argument("SequenceBatch: x/delta must be D×L");
        if (b.size() != static_cast<std::size_t>(N) * L || c.size() != b.size())
            throw std::invalid_argument("SequenceBatch: b/c must be N×L");
        for (R d : delta)
            if (!(d > R(0)))
                throw std::invalid_argument("SequenceBatch: delta must be > 0 (softplus bypassed?)");
    }
};

template <class R>
struct SelectiveScanResult {
    std::vector<R> y;  // D×L
    std::vector<R> h;  // D×L×N state checkpoints (kept when requested)
};

template <class R>
SelectiveScanResult<R> selective_scan(const SequenceBatch<R>& in, const std::vector<R>& A,
                                      bool keep_states = false) {
    in.validate();
    const int D = in.D, N = in.N, L = in.L;
    if (A.size() != static_cast<std::size_t>(D) * N)
        throw std::invalid_argument("selective_scan: A must be D×N");
    SelectiveScanResult<R> out;
    out.y.assign(static_cast<std::size_t>(D) * L, R(0));
    if (keep_states) out.h.assign(static_cast<std::size_t>(D) * L * N, R(0));
    std::vector<R> h(static_cast<std::size_t>(N));
    for (int d = 0; d < D; ++d) {
        std::fill(h.begin(), h.end(), R(0));
        const R* Ad = &A[static_cast<std::size_t>(d) * N];
        for (int t = 0; t < L; ++t) {
            const R dt = in.delta[static_cast<std::size_t>(d) * L + t];
            const R xt = in.x[static_cast<std::size_t>(d) * L + t];
            R yt = R(0);
            for (int n = 0; n < N; ++n) {
                const R u = dt * Ad[n];
                const R a_bar = std::exp(u);
                const R b_bar = detail::phi(u) * dt * in.b[static_cast<std::size_t>(n) * L + t];
                h[static_cast<std::size_t>(n)] = a_bar * h[static_cast<std::size_t>(n)] + b_bar * xt;
                yt += in.c[static_cast<std::size_t>(n) * L + t] * h[static_cast<std::size_t>(n)];
            }
            out.y[static_cast<std::size_t>(d) * L + t] = yt;
            if (keep_states)
                for (int n = 0; n < N; ++n)
                    out.h[(static_cast<std::size_t>(d) * L + t) * N + n] = h[static_cast<std::size_t>(n)];
        }
    }
    return out;
}

template <class R>
struct SelectiveScanGrads {
    std::vector<R> x;      // D×L
    std::vector<R> delta;  // D×L
    std::vector<R> b;      // N×L
    std::vector<R> c;      // N×L
    std::vector<R> A;      // D×N
};

// Reverse-time recurrence against the checkpointed forward states.
template <class R>
SelectiveScanGrads<R> selective_scan_backward(const SequenceBatch<R>& in, const std::vector<R>& A,
                                              const SelectiveScanResult<R>& fwd,
                                              const std::vector<R>& upstream) {
    in.validate();
    const int D = in.D, N = in.N, L = in.L;
    if (A.size() != static_cast<std::size_t>(D) * N)
        throw std::invalid_argument("selective_scan_backward: A must be D×N");
    if (upstream.size() != static_cast<std::size_t>(D) * L)
        throw std::invalid_argument("selective_scan_backward: upstream must be D×L");
    if (fwd.h.size() != static_cast<std::size_t>(D) * L * N)
        throw std::invalid_argument("selective_scan_backward: forward state checkpoints missing");

    SelectiveScanGrads<R> g;
    g.x.assign(in.x.size(), R(0));
    g.delta.assign(in.delta.size(), R(0));
    g.b.assign(in.b.size(), R(0));
    g.c.assign(in.c.size(), R(0));
    g.A.assign(A.size(), R(0));

    std::vector<R> gh(static_cast<std::size_t>(N));
    for (int d = 0; d < D; ++d) {
        std::fill(gh.begin(), gh.end(), R(0));
        const R* Ad = &A[static_cast<std::size_t>(d) * N];
        for (int t = L - 1; t >= 0; --t) {
            const std::size_t dt_idx = static_cast<std::size_t>(d) * L + t;
            const R dt = in.delta[dt_idx];
            const R xt = in.x[dt_idx];
            const R gy = upstream[dt_idx];
            const R* ht = &fwd.h[dt_idx * N];
            const R* hprev = t > 0 ? &fwd.h[(dt_idx - 1) * N] : nullptr;
            R gx = R(0), gdt = R(0);
            for (int n = 0; n < N; ++n) {
                const std::size_t nt = static_cast<std::size_t>(n) * L + t;
                // y_t = sum_n c[n,t] h_t[n]
                g.c[nt] += gy * ht[n];
                R ghn = gh[static_cast<std::size_t>(n)] + gy * in.c[nt];
                // h_t[n] = a_bar h_{t-1}[n] + b_bar x_t
                const R u = dt * Ad[n];
                const R a_bar = std::exp(u);
                const R ph = detail::phi(u);
                const R php = detail::phi_prime(u);
                const R bt = in.b[nt];
                const R b_bar = ph * dt * bt;
                const R hp = hprev ? hprev[n] : R(0);
                gx += ghn * b_bar;
                g.b[nt] += ghn * ph * dt * xt;
                // d a_bar/d dt = A a_bar ; d b_bar/d dt = (phi'(u) A dt + phi(u)) b
                gdt += ghn * (hp * Ad[n] * a_bar + xt * bt * (php * Ad[n] * dt + ph));
                // d a_bar/d A = dt a_bar ; d b_bar/d A = phi'(u) dt^2 b
                g.A[static_cast<std::size_t>(d) * N + n] +=
                    ghn * (hp * dt * a_bar + xt * bt * php * dt * dt);
                gh[static_cast<std::size_t>(n)] = ghn * a_bar;
            }
            g.x[dt_idx] = gx;
            g.delta[dt_idx] = gdt;
        }
    }
    return g;
}

template <class R>
R softplus(R x) {
    if (x > R(20)) return x;
    return std::log1p(std::exp(x));
}

// softplus^{-1}: the raw value whose softplus equals y (> 0).
template <class R>
R softplus_inverse(R y) {
    if (y > R(20)) return y;
    return std::log(std::expm1(y));
}

}  // namespace odm
