#include "odm/ss2d.hpp"

#include <stdexcept>

#include "odm/ssm_scan.hpp"
#include "odm/threading.hpp"

namespace odm {

int scan_position(ScanDirection dir, int h, int w, int H, int W) {
    const int hw = H * W;
    switch (dir) {
        case ScanDirection::RowMajor:
            return h * W + w;
        case ScanDirection::RowMajorReversed:
            return hw - 1 - (h * W + w);
        case ScanDirection::ColMajor:
            return w * H + h;
        case ScanDirection::ColMajorReversed:
            return hw - 1 - (w * H + h);
    }
    return 0;
}

DirectionalSequences cross_scan_expand(const Tensor& fm) {
    if (fm.rank() != 3) throw std::invalid_argument("cross_scan_expand input must be C×H×W");
    const int C = fm.dim(0), H = fm.dim(1), W = fm.dim(2);
    const int L = H * W;
    DirectionalSequences out;
    out.channels = C;
    out.H = H;
    out.W = W;
    for (ScanDirection dir : kScanDirections) {
        Tensor s({C, L});
        for (int c = 0; c < C; ++c)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) s.at(c, scan_position(dir, h, w, H, W)) = fm.at(c, h, w);
        out.seq[static_cast<std::size_t>(dir)] = std::move(s);
    }
    return out;
}

Tensor cross_scan_merge(const DirectionalSequences& seqs) {
    const int C = seqs.channels, H = seqs.H, W = seqs.W;
    const int L = H * W;
    for (const Tensor& s : seqs.seq)
        if (s.shape != std::vector<int>{C, L})
            throw std::invalid_argument("cross_scan_merge: sequence shape " + s.shape_str() +
                                        " inconsistent with C=" + std::to_string(C) +
                                        ", H*W=" + std::to_string(L));
    Tensor out({C, H, W});
    for (ScanDirection dir : kScanDirections) {
        const Tensor& s = seqs.seq[static_cast<std::size_t>(dir)];
        for (int c = 0; c < C; ++c)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) out.at(c, h, w) += s.at(c, scan_position(dir, h, w, H, W));
    }
    return out;
}

Ss2dOp Ss2dOp::make(const std::string& path, int dim, int d_inner, int state_dim, int dt_rank) {
    if (dim < 1 || d_inner < 1 || state_dim < 1 || dt_rank < 1)
        throw std::invalid_argument("Ss2dOp: dims must be >= 1");
    Ss2dOp op;
    op.path = path;
    op.dim = dim;
    op.d_inner = d_inner;
    op.state_dim = state_dim;
    op.dt_rank = dt_rank;
    op.in_proj = Conv2dLayer::make(path + ".in_proj", dim, 2 * d_inner, 1, 1, 1, false);
    op.dw = Conv2dLayer::make(path + ".dw", d_inner, d_inner, 3, 1, d_inner, true);
    for (int i = 0; i < 4; ++i) {
        op.x_proj[static_cast<std::size_t>(i)] =
            LinearLayer{path + ".x_proj." + std::to_string(i), d_inner, dt_rank + 2 * state_dim, false};
        op.dt_proj[static_cast<std::size_t>(i)] =
            LinearLayer{path + ".dt_proj." + std::to_string(i), dt_rank, d_inner, true};
    }
    op.out_norm = LayerNormLayer{path + ".out_norm", d_inner};
    op.out_proj = Conv2dLayer::make(path + ".out_proj", d_inner, dim, 1, 1, 1, false);
    return op;
}

void Ss2dOp::plan(Plan& p) const {
    in_proj.plan(p);
    dw.plan(p);
    for (int i = 0; i < 4; ++i) {
        x_proj[static_cast<std::size_t>(i)].plan(p);
        // dt_proj bias is the learnable Δ bias; planned by hand so it gets
        // the softplus-inverse init instead of zeros.
        const LinearLayer& dt = dt_proj[static_cast<std::size_t>(i)];
        p.add_param({dt.path + ".w", {dt.out, dt.in}, ParamDesc::Init::UniformFanIn, dt.in});
        p.add_param({dt.path + ".b", {dt.out}, ParamDesc::Init::DtBias, 0});
        p.add_param({path + ".A." + std::to_string(i), {d_inner, state_dim}, ParamDesc::Init::SsmA, 0});
    }
    out_norm.plan(p);
    out_proj.plan(p);
}

Tensor Ss2dOp::forward(const WeightStore& ws, const Tensor& fm, bool identity_scan) const {
    if (fm.rank() != 3 || fm.dim(0) != dim)
        throw std::invalid_argument("ss2d " + path + ": input must be " + std::to_string(dim) +
                                    "×H×W, got " + fm.shape_str());
    const int H = fm.dim(1), W = fm.dim(2);
    const int L = H * W;

    const Tensor xz = in_proj.forward(ws, fm);
    Tensor x({d_inner, H, W}), gate({d_inner, H, W});
    std::copy(xz.data.begin(), xz.data.begin() + x.numel(), x.data.begin());
    std::copy(xz.data.begin() + x.numel(), xz.data.end(), gate.data.begin());

    x = activate(dw.forward(ws, x), ActivationKind::SiLU);

    DirectionalSequences seqs = cross_scan_expand(x);
    DirectionalSequences scanned;
    scanned.channels = d_inner;
    scanned.H = H;
    scanned.W = W;
    parallel_for(4, [&](int i) {
        const Tensor& s = seqs.seq[static_cast<std::size_t>(i)];
        if (identity_scan) {
            scanned.seq[static_cast<std::size_t>(i)] = s;
            return;
        }
        const Tensor proj = x_proj[static_cast<std::size_t>(i)].forward(ws, s);
        Tensor dt_in({dt_rank, L});
        std::copy(proj.data.begin(), proj.data.begin() + dt_in.numel(), dt_in.data.begin());
        const Tensor dt_raw = dt_proj[static_cast<std::size_t>(i)].forward(ws, dt_in);

        SequenceBatch<float> batch;
        batch.D = d_inner;
        batch.N = state_dim;
        batch.L = L;
        batch.x = s.data;
        batch.delta.resize(dt_raw.data.size());
        for (std::size_t j = 0; j < dt_raw.data.size(); ++j) batch.delta[j] = softplus(dt_raw.data[j]);
        const std::size_t off_b = static_cast<std::size_t>(dt_rank) * L;
        batch.b.assign(proj.data.begin() + static_cast<std::ptrdiff_t>(off_b),
                       proj.data.begin() + static_cast<std::ptrdiff_t>(off_b + static_cast<std::size_t>(state_dim) * L));
        batch.c.assign(proj.data.begin() + static_cast<std::ptrdiff_t>(off_b + static_cast<std::size_t>(state_dim) * L),
                       proj.data.end());
        const Tensor& A = ws.get(path + ".A." + std::to_string(i));
        auto res = selective_scan(batch, A.data, false);
        scanned.seq[static_cast<std::size_t>(i)] = Tensor({d_inner, L}, std::move(res.y));
    });

    Tensor merged = cross_scan_merge(scanned);
    merged = out_norm.forward(ws, merged);
    merged = elementwise(merged, activate(gate, ActivationKind::SiLU), BinaryOp::Mul);
    return out_proj.forward(ws, merged);
}

void Ss2dOp::cost(CostRows& rows, int H, int W) const {
    const int L = H * W;
    in_proj.cost(rows, H, W);
    dw.cost(rows, H, W);
    for (int i = 0; i < 4; ++i) {
        x_proj[static_cast<std::size_t>(i)].cost(rows, L);
        dt_proj[static_cast<std::size_t>(i)].cost(rows, L);
        rows.push_back({path + ".A." + std::to_string(i),
                        static_cast<std::int64_t>(d_inner) * state_dim,
                        static_cast<std::int64_t>(L) * d_inner * state_dim * kScanMacsPerStep});
    }
    out_norm.cost(rows);
    out_proj.cost(rows, H, W);
}

}  // namespace odm
