#include "odm/model.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace odm {

void ModelConfig::validate() const {
    if (stem_channels < 4 || stem_channels % 4 != 0)
        throw std::invalid_argument("config: stem_channels must be a positive multiple of 4");
    int prev = 0;
    for (int i = 0; i < 4; ++i) {
        const StageConfig& s = stages[static_cast<std::size_t>(i)];
        if (s.channels < 4 || s.channels % 4 != 0)
            throw std::invalid_argument("config: stage " + std::to_string(i + 1) +
                                        " channels must be a positive multiple of 4");
        if (s.channels <= prev)
            throw std::invalid_argument("config: stage channels must strictly increase");
        if (s.depth < 1)
            throw std::invalid_argument("config: stage " + std::to_string(i + 1) + " depth must be >= 1");
        prev = s.channels;
    }
    if (ssm_state_dim < 1 || ssm_expand < 1 || dt_rank < 0 || ls_hidden_ratio < 1 ||
        rg_hidden_ratio < 1 || neck_depth < 1)
        throw std::invalid_argument("config: ssm/hidden-ratio fields out of range");
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

ModelConfig parse_config_text(const std::string& text) {
    ModelConfig cfg;
    std::istringstream is(text);
    std::string line;
    int stage = -1;  // -1 = top level
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw std::invalid_argument("config line " + std::to_string(lineno) +
                                                                ": unterminated section header");
            const std::string sec = trim(line.substr(1, line.size() - 2));
            if (sec.rfind("stage.", 0) != 0)
                throw std::invalid_argument("config line " + std::to_string(lineno) +
                                            ": unknown section [" + sec + "]");
            stage = std::stoi(sec.substr(6));
            if (stage < 1 || stage > 4)
                throw std::invalid_argument("config: stage index must be 1..4, got " + sec);
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        auto as_int = [&]() { return std::stoi(val); };
        if (stage >= 1) {
            StageConfig& s = cfg.stages[static_cast<std::size_t>(stage - 1)];
            if (key == "channels") s.channels = as_int();
            else if (key == "depth") s.depth = as_int();
            else throw std::invalid_argument("config: unknown stage key '" + key + "'");
        } else {
            if (key == "variant") cfg.variant = val;
            else if (key == "stem_channels") cfg.stem_channels = as_int();
            else if (key == "ssm_state_dim") cfg.ssm_state_dim = as_int();
            else if (key == "ssm_expand") cfg.ssm_expand = as_int();
            else if (key == "dt_rank") cfg.dt_rank = (val == "auto") ? 0 : as_int();
            else if (key == "ls_hidden_ratio") cfg.ls_hidden_ratio = as_int();
            else if (key == "rg_hidden_ratio") cfg.rg_hidden_ratio = as_int();
            else if (key == "neck_depth") cfg.neck_depth = as_int();
            else if (key == "seed") cfg.seed = std::stoull(val);
            else throw std::invalid_argument("config: unknown key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

ModelConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config: " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_config_text(buf.str());
}

// ---- VisionClueMerge ----------------------------------------------------------

Tensor stack_stride2_phases(const Tensor& f) {
    if (f.rank() != 3) throw std::invalid_argument("stack_stride2_phases input must be C×H×W");
    const int C = f.dim(0), H = f.dim(1), W = f.dim(2);
    if (H % 2 != 0 || W % 2 != 0)
        throw std::invalid_argument("stack_stride2_phases: H and W must be even, got " + f.shape_str());
    // Phase order: (even,even), (even,odd), (odd,even), (odd,odd).
    Tensor out({4 * C, H / 2, W / 2});
    static constexpr int kPhase[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    for (int p = 0; p < 4; ++p)
        for (int c = 0; c < C; ++c)
            for (int h = 0; h < H / 2; ++h)
                for (int w = 0; w < W / 2; ++w)
                    out.at(p * C + c, h, w) = f.at(c, 2 * h + kPhase[p][0], 2 * w + kPhase[p][1]);
    return out;
}

VisionClueMerge VisionClueMerge::make(const std::string& path, int cin, int cout) {
    VisionClueMerge m;
    m.path = path;
    m.in_channels = cin;
    m.out_channels = cout;
    m.pw = Conv2dLayer::make(path + ".pw", 4 * cin, cout, 1, 1, 1, false);
    return m;
}

void VisionClueMerge::plan(Plan& p) const { pw.plan(p); }

Tensor VisionClueMerge::forward(const WeightStore& ws, const Tensor& f) const {
    return pw.forward(ws, stack_stride2_phases(f));
}

void VisionClueMerge::cost(CostRows& rows, int H, int W) const { pw.cost(rows, H / 2, W / 2); }

// ---- Model ---------------------------------------------------------------------

static std::vector<OdssBlock> make_stage(const std::string& path, int cin, int cout, int depth,
                                         const OdssBlock::Dims& dims) {
    std::vector<OdssBlock> blocks;
    blocks.reserve(static_cast<std::size_t>(depth));
    for (int i = 0; i < depth; ++i)
        blocks.push_back(OdssBlock::make(path + ".block" + std::to_string(i), i == 0 ? cin : cout,
                                         cout, dims));
    return blocks;
}

Model Model::make(const ModelConfig& cfg) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    const auto dims = cfg.block_dims();
    const int c1 = cfg.stages[0].channels, c2 = cfg.stages[1].channels,
              c3 = cfg.stages[2].channels, c4 = cfg.stages[3].channels;

    m.stem1 = ConvBnAct::make("stem.1", 3, cfg.stem_channels / 2, 3, 2);
    m.stem2 = ConvBnAct::make("stem.2", cfg.stem_channels / 2, cfg.stem_channels, 3, 2);

    m.stages[0] = make_stage("backbone.stage1", cfg.stem_channels, c1, cfg.stages[0].depth, dims);
    m.merges[0] = VisionClueMerge::make("backbone.merge1", c1, c2);
    m.stages[1] = make_stage("backbone.stage2", c2, c2, cfg.stages[1].depth, dims);
    m.merges[1] = VisionClueMerge::make("backbone.merge2", c2, c3);
    m.stages[2] = make_stage("backbone.stage3", c3, c3, cfg.stages[2].depth, dims);
    m.merges[2] = VisionClueMerge::make("backbone.merge3", c3, c4);
    m.stages[3] = make_stage("backbone.stage4", c4, c4, cfg.stages[3].depth, dims);

    // Pyramid channels: P3 = c2 (stride 8), P4 = c3, P5 = c4.
    m.neck_td1 = make_stage("neck.td1", c4 + c3, c3, cfg.neck_depth, dims);
    m.neck_td2 = make_stage("neck.td2", c3 + c2, c2, cfg.neck_depth, dims);
    m.neck_down1 = ConvBnAct::make("neck.down1", c2, c2, 3, 2);
    m.neck_bu1 = make_stage("neck.bu1", c2 + c3, c3, cfg.neck_depth, dims);
    m.neck_down2 = ConvBnAct::make("neck.down2", c3, c3, 3, 2);
    m.neck_bu2 = make_stage("neck.bu2", c3 + c4, c4, cfg.neck_depth, dims);
    return m;
}

Plan Model::plan() const {
    Plan p;
    stem1.plan(p);
    stem2.plan(p);
    for (int i = 0; i < 4; ++i) {
        for (const auto& b : stages[static_cast<std::size_t>(i)]) b.plan(p);
        if (i < 3) merges[static_cast<std::size_t>(i)].plan(p);
    }
    for (const auto& b : neck_td1) b.plan(p);
    for (const auto& b : neck_td2) b.plan(p);
    neck_down1.plan(p);
    for (const auto& b : neck_bu1) b.plan(p);
    neck_down2.plan(p);
    for (const auto& b : neck_bu2) b.plan(p);
    return p;
}

Tensor Model::stem_forward(const WeightStore& ws, const Tensor& img) const {
    if (img.rank() != 3 || img.dim(0) != 3)
        throw std::invalid_argument("stem: input must be 3×H×W, got " + img.shape_str());
    const int H = img.dim(1), W = img.dim(2);
    if (H % 32 != 0 || W % 32 != 0) {
        const int ph = (32 - H % 32) % 32, pw = (32 - W % 32) % 32;
        throw std::invalid_argument("stem: input " + std::to_string(H) + "x" + std::to_string(W) +
                                    " not divisible by 32; pad by " + std::to_string(ph) + "x" +
                                    std::to_string(pw));
    }
    return stem2.forward(ws, stem1.forward(ws, img));
}

static Tensor run_stage(const std::vector<OdssBlock>& blocks, const WeightStore& ws, Tensor x,
                        const ForwardOptions& opts) {
    for (const auto& b : blocks) x = b.forward(ws, x, opts);
    return x;
}

PyramidFeatures Model::backbone_forward(const WeightStore& ws, const Tensor& img,
                                        const ForwardOptions& opts) const {
    Tensor x = stem_forward(ws, img);
    if (opts.sink) opts.sink("backbone.stem", x);
    x = run_stage(stages[0], ws, std::move(x), opts);
    x = merges[0].forward(ws, x);
    Tensor p3 = run_stage(stages[1], ws, std::move(x), opts);
    Tensor p4 = run_stage(stages[2], ws, merges[1].forward(ws, p3), opts);
    Tensor p5 = run_stage(stages[3], ws, merges[2].forward(ws, p4), opts);
    if (opts.sink) {
        opts.sink("backbone.p3", p3);
        opts.sink("backbone.p4", p4);
        opts.sink("backbone.p5", p5);
    }
    return {std::move(p3), std::move(p4), std::move(p5)};
}

PyramidFeatures Model::neck_forward(const WeightStore& ws, const PyramidFeatures& pyr,
                                    const ForwardOptions& opts) const {
    // Top-down
    const Tensor m4 =
        run_stage(neck_td1, ws, concat_channels(upsample_nearest_2x(pyr.p5), pyr.p4), opts);
    const Tensor o3 =
        run_stage(neck_td2, ws, concat_channels(upsample_nearest_2x(m4), pyr.p3), opts);
    // Bottom-up
    const Tensor o4 =
        run_stage(neck_bu1, ws, concat_channels(neck_down1.forward(ws, o3), m4), opts);
    const Tensor o5 =
        run_stage(neck_bu2, ws, concat_channels(neck_down2.forward(ws, o4), pyr.p5), opts);
    return {o3, o4, o5};
}

PyramidFeatures Model::forward(const WeightStore& ws, const Tensor& img,
                               const ForwardOptions& opts) const {
    return neck_forward(ws, backbone_forward(ws, img, opts), opts);
}

CostRows Model::backbone_cost(int H, int W) const {
    CostRows rows;
    stem1.cost(rows, H, W);
    stem2.cost(rows, H / 2, W / 2);
    int h = H / 4, w = W / 4;
    for (int i = 0; i < 4; ++i) {
        for (const auto& b : stages[static_cast<std::size_t>(i)]) b.cost(rows, h, w);
        if (i < 3) {
            merges[static_cast<std::size_t>(i)].cost(rows, h, w);
            h /= 2;
            w /= 2;
        }
    }
    return rows;
}

CostRows Model::neck_cost(int H, int W) const {
    CostRows rows;
    const int h3 = H / 8, w3 = W / 8, h4 = H / 16, w4 = W / 16, h5 = H / 32, w5 = W / 32;
    for (const auto& b : neck_td1) b.cost(rows, h4, w4);
    for (const auto& b : neck_td2) b.cost(rows, h3, w3);
    neck_down1.cost(rows, h3, w3);
    for (const auto& b : neck_bu1) b.cost(rows, h4, w4);
    neck_down2.cost(rows, h4, w4);
    for (const auto& b : neck_bu2) b.cost(rows, h5, w5);
    return rows;
}

}  // namespace odm
