#include "odm/blocks.hpp"

#include <stdexcept>

namespace odm {

// ---- LsBlock ----------------------------------------------------------------

LsBlock LsBlock::make(const std::string& path, int channels, int hidden_ratio) {
    LsBlock b;
    b.path = path;
    b.channels = channels;
    b.hidden = channels * hidden_ratio;
    b.dw = Conv2dLayer::make(path + ".dw", channels, channels, 3, 1, channels, false);
    b.bn = BatchNormLayer{path + ".bn", channels};
    b.fc1 = Conv2dLayer::make(path + ".fc1", channels, b.hidden, 1, 1, 1, true);
    b.fc2 = Conv2dLayer::make(path + ".fc2", b.hidden, channels, 1, 1, 1, true);
    return b;
}

void LsBlock::plan(Plan& p) const {
    dw.plan(p);
    bn.plan(p);
    fc1.plan(p);
    fc2.plan(p);
}

Tensor LsBlock::forward(const WeightStore& ws, const Tensor& f) const {
    Tensor mid = bn.forward(ws, dw.forward(ws, f));
    mid = fc2.forward(ws, activate(fc1.forward(ws, mid), ActivationKind::GELU));
    return elementwise(mid, f, BinaryOp::Add);
}

void LsBlock::cost(CostRows& rows, int H, int W) const {
    dw.cost(rows, H, W);
    bn.cost(rows);
    fc1.cost(rows, H, W);
    fc2.cost(rows, H, W);
}

// ---- RgBlock ----------------------------------------------------------------

RgBlock RgBlock::make(const std::string& path, int channels, int hidden_ratio) {
    RgBlock b;
    b.path = path;
    b.channels = channels;
    b.hidden = channels * hidden_ratio;
    b.fc_x1 = Conv2dLayer::make(path + ".fc_x1", channels, b.hidden, 1, 1, 1, true);
    b.fc_x2 = Conv2dLayer::make(path + ".fc_x2", channels, b.hidden, 1, 1, 1, true);
    b.dw = Conv2dLayer::make(path + ".dw", b.hidden, b.hidden, 3, 1, b.hidden, true);
    b.fc_out = Conv2dLayer::make(path + ".fc_out", b.hidden, channels, 1, 1, 1, true);
    return b;
}

void RgBlock::plan(Plan& p) const {
    fc_x1.plan(p);
    fc_x2.plan(p);
    dw.plan(p);
    fc_out.plan(p);
}

Tensor RgBlock::forward_core(const WeightStore& ws, const Tensor& x) const {
    const Tensor x1 = fc_x1.forward(ws, x);
    const Tensor x2 = fc_x2.forward(ws, x);
    // GELU applies to (DWConv(X2) ⊕ X2) as a whole.
    Tensor pos = activate(elementwise(dw.forward(ws, x2), x2, BinaryOp::Add), ActivationKind::GELU);
    return fc_out.forward(ws, elementwise(x1, pos, BinaryOp::Mul));
}

Tensor RgBlock::forward(const WeightStore& ws, const Tensor& x) const {
    return elementwise(forward_core(ws, x), x, BinaryOp::Add);
}

void RgBlock::cost(CostRows& rows, int H, int W) const {
    fc_x1.cost(rows, H, W);
    fc_x2.cost(rows, H, W);
    dw.cost(rows, H, W);
    fc_out.cost(rows, H, W);
}

// ---- MlpBlock ---------------------------------------------------------------

const char* mlp_variant_name(MlpVariant v) {
    switch (v) {
        case MlpVariant::Original: return "original";
        case MlpVariant::Convolutional: return "convolutional";
        case MlpVariant::ResConvolutional: return "res-convolutional";
        case MlpVariant::Gated: return "gated";
        case MlpVariant::RGBlock: return "rg-block";
    }
    return "?";
}

MlpBlock MlpBlock::make(const std::string& path, MlpVariant v, int channels, int hidden_ratio) {
    MlpBlock b;
    b.path = path;
    b.variant = v;
    b.channels = channels;
    b.hidden = channels * hidden_ratio;
    switch (v) {
        case MlpVariant::Original:
            b.fc1 = Conv2dLayer::make(path + ".fc1", channels, b.hidden, 1, 1, 1, true);
            b.fc2 = Conv2dLayer::make(path + ".fc2", b.hidden, channels, 1, 1, 1, true);
            break;
        case MlpVariant::Convolutional:
            // depthwise stage on the input, ahead of the MLP
            b.dw = Conv2dLayer::make(path + ".dw", channels, channels, 3, 1, channels, true);
            b.fc1 = Conv2dLayer::make(path + ".fc1", channels, b.hidden, 1, 1, 1, true);
            b.fc2 = Conv2dLayer::make(path + ".fc2", b.hidden, channels, 1, 1, 1, true);
            break;
        case MlpVariant::ResConvolutional:
            // depthwise residual inside the hidden layer
            b.fc1 = Conv2dLayer::make(path + ".fc1", channels, b.hidden, 1, 1, 1, true);
            b.dw = Conv2dLayer::make(path + ".dw", b.hidden, b.hidden, 3, 1, b.hidden, true);
            b.fc2 = Conv2dLayer::make(path + ".fc2", b.hidden, channels, 1, 1, 1, true);
            break;
        case MlpVariant::Gated:
            b.fc1 = Conv2dLayer::make(path + ".fc1", channels, b.hidden, 1, 1, 1, true);
            b.fc_gate = Conv2dLayer::make(path + ".fc_gate", channels, b.hidden, 1, 1, 1, true);
            b.fc2 = Conv2dLayer::make(path + ".fc2", b.hidden, channels, 1, 1, 1, true);
            break;
        case MlpVariant::RGBlock:
            b.rg = RgBlock::make(path, channels, hidden_ratio);
            break;
    }
    return b;
}

void MlpBlock::plan(Plan& p) const {
    switch (variant) {
        case MlpVariant::Original:
            fc1.plan(p);
            fc2.plan(p);
            break;
        case MlpVariant::Convolutional:
            dw.plan(p);
            fc1.plan(p);
            fc2.plan(p);
            break;
        case MlpVariant::ResConvolutional:
            fc1.plan(p);
            dw.plan(p);
            fc2.plan(p);
            break;
        case MlpVariant::Gated:
            fc1.plan(p);
            fc_gate.plan(p);
            fc2.plan(p);
            break;
        case MlpVariant::RGBlock:
            rg.plan(p);
            break;
    }
}

Tensor MlpBlock::forward(const WeightStore& ws, const Tensor& x) const {
    switch (variant) {
        case MlpVariant::Original:
            return fc2.forward(ws, activate(fc1.forward(ws, x), act));
        case MlpVariant::Convolutional:
            return fc2.forward(ws, activate(fc1.forward(ws, dw.forward(ws, x)), act));
        case MlpVariant::ResConvolutional: {
            const Tensor h = fc1.forward(ws, x);
            const Tensor res = elementwise(dw.forward(ws, h), h, BinaryOp::Add);
            return fc2.forward(ws, activate(res, act));
        }
        case MlpVariant::Gated: {
            const Tensor h = fc1.forward(ws, x);
            const Tensor g = activate(fc_gate.forward(ws, x), act);
            return fc2.forward(ws, elementwise(h, g, BinaryOp::Mul));
        }
        case MlpVariant::RGBlock:
            return rg.forward(ws, x);
    }
    throw std::invalid_argument("unknown MLP variant");
}

std::int64_t MlpBlock::param_count() const {
    Plan p;
    plan(p);
    return p.param_count();
}

// ---- OdssBlock --------------------------------------------------------------

OdssBlock OdssBlock::make(const std::string& path, int in_channels, int channels,
                          const Dims& dims) {
    OdssBlock b;
    b.path = path;
    b.in_channels = in_channels;
    b.channels = channels;
    b.in_conv = Conv2dLayer::make(path + ".in_conv", in_channels, channels, 1, 1, 1, false);
    b.in_bn = BatchNormLayer{path + ".in_bn", channels};
    b.ls = LsBlock::make(path + ".ls", channels, dims.ls_ratio);
    b.ln1 = LayerNormLayer{path + ".ln1", channels};
    const int d_inner = channels * dims.ssm_expand;
    const int dt_rank = dims.dt_rank > 0 ? dims.dt_rank : (d_inner / 16 > 0 ? d_inner / 16 : 1);
    b.ss2d = Ss2dOp::make(path + ".ss2d", channels, d_inner, dims.state_dim, dt_rank);
    b.ln2 = LayerNormLayer{path + ".ln2", channels};
    b.rg = RgBlock::make(path + ".rg", channels, dims.rg_ratio);
    return b;
}

void OdssBlock::plan(Plan& p) const {
    in_conv.plan(p);
    in_bn.plan(p);
    ls.plan(p);
    ln1.plan(p);
    ss2d.plan(p);
    ln2.plan(p);
    rg.plan(p);
}

Tensor OdssBlock::forward(const WeightStore& ws, const Tensor& z, const ForwardOptions& opts) const {
    const Tensor z2 = activate(in_bn.forward(ws, in_conv.forward(ws, z)), ActivationKind::SiLU);
    const Tensor ssm = ss2d.forward(ws, ln1.forward(ws, ls.forward(ws, z2)), opts.ss2d_identity);
    const Tensor z1 = elementwise(ssm, z2, BinaryOp::Add);
    if (opts.sink) opts.sink(path + ".post_ss2d", z1);
    const Tensor out = elementwise(rg.forward_core(ws, ln2.forward(ws, z1)), z1, BinaryOp::Add);
    return out;
}

void OdssBlock::cost(CostRows& rows, int H, int W) const {
    in_conv.cost(rows, H, W);
    in_bn.cost(rows);
    ls.cost(rows, H, W);
    ln1.cost(rows);
    ss2d.cost(rows, H, W);
    ln2.cost(rows);
    rg.cost(rows, H, W);
}

}  // namespace odm
