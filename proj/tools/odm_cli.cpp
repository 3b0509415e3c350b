#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "odm/analysis.hpp"
#include "odm/bench.hpp"
#include "odm/model.hpp"
#include "odm/rng.hpp"
#include "odm/selftest.hpp"
#include "odm/ssm_scan.hpp"
#include "odm/tensor_io.hpp"
#include "odm/threading.hpp"

namespace {

constexpr const char* kVersion = "odm 1.0.0";

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::pair<int, int> parse_hw(const std::string& s) {
    const std::size_t x = s.find('x');
    if (x == std::string::npos) throw UsageError("expected WxH size, got '" + s + "'");
    const int w = std::stoi(s.substr(0, x));
    const int h = std::stoi(s.substr(x + 1));
    if (w < 32 || h < 32) throw UsageError("size must be at least 32x32");
    return {h, w};
}

odm::ModelConfig load_config_checked(const std::string& path) {
    if (!std::filesystem::exists(path)) throw UsageError("config file not found: " + path);
    return odm::load_config(path);
}

int cmd_selftest(std::uint64_t seed) {
    const auto results = odm::run_selftest(seed);
    bool all = true;
    std::cout << "# " << kVersion << "\tselftest\tseed=" << seed << "\n";
    for (const auto& r : results) {
        std::cout << (r.pass ? "PASS" : "FAIL") << "\t" << r.name;
        if (!r.detail.empty()) std::cout << "\t" << r.detail;
        std::cout << "\n";
        all = all && r.pass;
    }
    std::cout << (all ? "selftest: all checks passed" : "selftest: FAILURES PRESENT") << "\n";
    return all ? 0 : 1;
}

int cmd_scan_equiv(int N, int L, int trials, std::uint64_t seed) {
    double worst32 = 0.0, worst64 = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        const std::string tag = "scan-equiv." + std::to_string(trial);
        odm::CounterRng rng(seed, tag);
        std::uint64_t ctr = 0;
        auto draw = [&](double lo, double hi) { return rng.uniform(ctr++, lo, hi); };
        odm::SsmParams<double> p;
        p.a.resize(static_cast<std::size_t>(N));
        p.b.resize(static_cast<std::size_t>(N));
        p.c.resize(static_cast<std::size_t>(N));
        for (auto& v : p.a) v = draw(-2.0, -0.05);
        for (auto& v : p.b) v = draw(-1.0, 1.0);
        for (auto& v : p.c) v = draw(-1.0, 1.0);
        p.delta = draw(0.05, 0.8);
        std::vector<double> x64(static_cast<std::size_t>(L));
        for (auto& v : x64) v = draw(-1.0, 1.0);

        odm::SsmParams<float> pf;
        pf.a.assign(p.a.begin(), p.a.end());
        pf.b.assign(p.b.begin(), p.b.end());
        pf.c.assign(p.c.begin(), p.c.end());
        pf.delta = static_cast<float>(p.delta);
        std::vector<float> x32(x64.begin(), x64.end());

        const auto d64 = odm::zoh_discretize(p);
        const auto yr64 = odm::scan_recurrent(d64, p.c, x64);
        const auto yc64 = odm::scan_convolutional(odm::build_kernel(d64, p.c, x64.size()), x64);
        const auto d32 = odm::zoh_discretize(pf);
        const auto yr32 = odm::scan_recurrent(d32, pf.c, x32);
        const auto yc32 = odm::scan_convolutional(odm::build_kernel(d32, pf.c, x32.size()), x32);
        for (std::size_t t = 0; t < x64.size(); ++t) {
            worst64 = std::max(worst64, std::abs(yr64[t] - yc64[t]));
            worst32 = std::max(worst32, std::abs(static_cast<double>(yr32[t]) - yc32[t]));
        }
    }
    std::cout << "# " << kVersion << "\tscan-equiv\tn=" << N << "\tl=" << L << "\ttrials=" << trials
              << "\tseed=" << seed << "\n";
    std::cout << "max_abs_dev_f32\t" << worst32 << "\n";
    std::cout << "max_abs_dev_f64\t" << worst64 << "\n";
    const bool pass = worst32 <= 1e-4 && worst64 <= 1e-9;
    std::cout << (pass ? "PASS" : "FAIL") << "\tscan-form equivalence\n";
    return pass ? 0 : 1;
}

int cmd_gradcheck(std::uint64_t seed, int trials) {
    double worst = 0.0;
    std::string worst_coord;
    bool all = true;
    std::cout << "# " << kVersion << "\tgradcheck\tseed=" << seed << "\ttrials=" << trials << "\n";
    for (int t = 0; t < trials; ++t) {
        odm::CounterRng rng(seed, "gradcheck.dims" + std::to_string(t));
        const int D = 1 + static_cast<int>(rng.bits(0) % 2);
        const int N = 1 + static_cast<int>(rng.bits(1) % 4);
        const int L = 1 + static_cast<int>(rng.bits(2) % 8);
        const auto rep = odm::grad_check_random_instance(seed, t, D, N, L, 1e-5);
        all = all && rep.pass(1e-5);
        if (rep.max_rel_err > worst) {
            worst = rep.max_rel_err;
            worst_coord = rep.worst_coordinate;
        }
        std::cout << "trial\t" << t << "\tD=" << D << "\tN=" << N << "\tL=" << L << "\tmax_rel_err\t"
                  << rep.max_rel_err << "\n";
    }
    std::cout << "worst\t" << worst << "\t" << worst_coord << "\n";
    std::cout << (all ? "PASS" : "FAIL") << "\tgradient check (tol 1e-5)\n";
    return all ? 0 : 1;
}

void print_block_row(const std::string& name, int cin, int cout_, int hin, int win, int hout,
                     int wout, const odm::CostRows& rows) {
    std::int64_t params = 0, macs = 0;
    for (const auto& r : rows) {
        params += r.params;
        macs += r.macs;
    }
    std::cout << name << "\t" << cin << "x" << hin << "x" << win << "\t" << cout_ << "x" << hout
              << "x" << wout << "\t" << params << "\t" << macs << "\n";
}

int cmd_shapes(const std::string& config_path, const std::string& input) {
    const auto cfg = load_config_checked(config_path);
    const auto [H, W] = parse_hw(input);
    if (H % 32 != 0 || W % 32 != 0) throw UsageError("input size must be divisible by 32");
    const odm::Model m = odm::Model::make(cfg);
    std::cout << "# " << kVersion << "\tshapes\tvariant=" << cfg.variant << "\tinput=" << input
              << "\n";
    std::cout << "block\tin\tout\tparams\tmacs\n";
    auto block_cost = [](const auto& blk, int h, int w) {
        odm::CostRows rows;
        blk.cost(rows, h, w);
        return rows;
    };
    print_block_row("stem.1", 3, cfg.stem_channels / 2, H, W, H / 2, W / 2, block_cost(m.stem1, H, W));
    print_block_row("stem.2", cfg.stem_channels / 2, cfg.stem_channels, H / 2, W / 2, H / 4, W / 4,
                    block_cost(m.stem2, H / 2, W / 2));
    int h = H / 4, w = W / 4;
    for (int i = 0; i < 4; ++i) {
        for (const auto& b : m.stages[static_cast<std::size_t>(i)])
            print_block_row(b.path, b.in_channels, b.channels, h, w, h, w, block_cost(b, h, w));
        if (i < 3) {
            const auto& mg = m.merges[static_cast<std::size_t>(i)];
            print_block_row(mg.path, mg.in_channels, mg.out_channels, h, w, h / 2, w / 2,
                            block_cost(mg, h, w));
            h /= 2;
            w /= 2;
        }
    }
    const int h3 = H / 8, w3 = W / 8, h4 = H / 16, w4 = W / 16, h5 = H / 32, w5 = W / 32;
    for (const auto& b : m.neck_td1)
        print_block_row(b.path, b.in_channels, b.channels, h4, w4, h4, w4, block_cost(b, h4, w4));
    for (const auto& b : m.neck_td2)
        print_block_row(b.path, b.in_channels, b.channels, h3, w3, h3, w3, block_cost(b, h3, w3));
    print_block_row("neck.down1", m.neck_down1.conv.spec.in_channels,
                    m.neck_down1.conv.spec.out_channels, h3, w3, h4, w4,
                    block_cost(m.neck_down1, h3, w3));
    for (const auto& b : m.neck_bu1)
        print_block_row(b.path, b.in_channels, b.channels, h4, w4, h4, w4, block_cost(b, h4, w4));
    print_block_row("neck.down2", m.neck_down2.conv.spec.in_channels,
                    m.neck_down2.conv.spec.out_channels, h4, w4, h5, w5,
                    block_cost(m.neck_down2, h4, w4));
    for (const auto& b : m.neck_bu2)
        print_block_row(b.path, b.in_channels, b.channels, h5, w5, h5, w5, block_cost(b, h5, w5));
    return 0;
}

int cmd_count(const std::string& config_path, const std::string& input, const std::string& csv) {
    const auto cfg = load_config_checked(config_path);
    const auto [H, W] = parse_hw(input);
    if (H % 32 != 0 || W % 32 != 0) throw UsageError("input size must be divisible by 32");
    const odm::CostReport rep = odm::count_macs(cfg, H, W);
    std::int64_t backbone_params = 0, backbone_macs = 0;
    for (const auto& r : rep.rows) {
        if (r.path.rfind("neck.", 0) != 0) {
            backbone_params += r.params;
            backbone_macs += r.macs;
        }
    }
    std::cout << "# " << kVersion << "\tcount\tvariant=" << cfg.variant << "\tinput=" << input
              << "\n";
    std::cout << "path\tparams\tmacs\n";
    for (const auto& r : rep.rows) std::cout << r.path << "\t" << r.params << "\t" << r.macs << "\n";
    std::cout << "total.backbone\t" << backbone_params << "\t" << backbone_macs << "\n";
    std::cout << "total.with_neck\t" << rep.total_params << "\t" << rep.total_macs << "\n";
    std::cout << "# MACs are the primitive unit; multiply by 2 for FLOP-style comparison\n";
    std::cout << "# flops_est.backbone\t" << 2 * backbone_macs << "\n";
    std::cout << "# flops_est.with_neck\t" << 2 * rep.total_macs << "\n";
    if (!csv.empty()) {
        std::ofstream os(csv);
        if (!os) throw UsageError("cannot write csv: " + csv);
        os << "path,params,macs\n";
        for (const auto& r : rep.rows) os << r.path << "," << r.params << "," << r.macs << "\n";
        os << "total.backbone," << backbone_params << "," << backbone_macs << "\n";
        os << "total.with_neck," << rep.total_params << "," << rep.total_macs << "\n";
    }
    return 0;
}

int cmd_extract(const std::string& image, const std::string& config_path, const std::string& out_dir,
                bool dump_intermediate, std::uint64_t seed, bool seed_given) {
    if (!std::filesystem::exists(image)) throw UsageError("image file not found: " + image);
    auto cfg = load_config_checked(config_path);
    if (seed_given) cfg.seed = seed;
    odm::Tensor img = odm::read_ppm(image);
    const int H = img.dim(1), W = img.dim(2);
    const int ph = (32 - H % 32) % 32, pw = (32 - W % 32) % 32;
    if (ph || pw) {
        std::cerr << "padding input " << W << "x" << H << " by " << pw << "x" << ph
                  << " to a multiple of 32\n";
        img = odm::pad_spatial(img, ph, pw);
    }
    std::filesystem::create_directories(out_dir);
    const odm::Model m = odm::Model::make(cfg);
    const odm::WeightStore ws = m.init_weights();
    odm::ForwardOptions opts;
    if (dump_intermediate) {
        opts.sink = [&out_dir](const std::string& name, const odm::Tensor& t) {
            std::string fname = name;
            for (char& ch : fname)
                if (ch == '/' || ch == '.') ch = '_';
            odm::write_myt(out_dir + "/" + fname + ".myt", t);
        };
    }
    const auto pyr = m.forward(ws, img, opts);
    odm::write_myt(out_dir + "/p3.myt", pyr.p3);
    odm::write_myt(out_dir + "/p4.myt", pyr.p4);
    odm::write_myt(out_dir + "/p5.myt", pyr.p5);
    std::cout << "# " << kVersion << "\textract\tseed=" << cfg.seed << "\n";
    std::cout << "p3\t" << pyr.p3.shape_str() << "\n";
    std::cout << "p4\t" << pyr.p4.shape_str() << "\n";
    std::cout << "p5\t" << pyr.p5.shape_str() << "\n";
    return 0;
}

int cmd_bench(const std::string& op, std::vector<std::int64_t> sizes, int repeats,
              std::uint64_t seed) {
    if (repeats < 1) throw UsageError("bench: repeats must be >= 1");
    if (sizes.empty()) {
        if (op == "ss2d") sizes = {8, 16, 32};
        else sizes = {1024, 2048, 4096, 8192};
    }
    const auto rep = odm::run_bench(op, sizes, repeats, seed);
    std::cout << "# " << kVersion << "\tbench\top=" << op << "\trepeats=" << repeats << "\n";
    std::cout << odm::format_bench_report(rep);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"state-space detection backbone toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    int threads = 0;
    app.add_option("--seed", seed, "global RNG seed")->capture_default_str();
    app.add_option("--threads", threads, "worker thread cap (default: ODM_THREADS or 1)");

    auto* selftest = app.add_subcommand("selftest", "run every module's property suite");

    auto* scan_equiv = app.add_subcommand("scan-equiv", "recurrent vs convolutional scan deviation");
    int se_n = 8, se_l = 64, se_trials = 50;
    scan_equiv->add_option("--n", se_n, "state dimension")->capture_default_str();
    scan_equiv->add_option("--l", se_l, "sequence length")->capture_default_str();
    scan_equiv->add_option("--trials", se_trials, "random instances")->capture_default_str();

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the scan backward");
    int gc_trials = 20;
    gradcheck->add_option("--trials", gc_trials, "random instances")->capture_default_str();

    auto* shapes = app.add_subcommand("shapes", "per-block shape/param/MAC table");
    std::string sh_config, sh_input = "640x640";
    shapes->add_option("--config", sh_config, "model config file")->required();
    shapes->add_option("--input", sh_input, "input size WxH")->capture_default_str();

    auto* count = app.add_subcommand("count", "per-layer parameter and MAC accounting");
    std::string ct_config, ct_input = "640x640", ct_csv;
    count->add_option("--config", ct_config, "model config file")->required();
    count->add_option("--input", ct_input, "input size WxH")->capture_default_str();
    count->add_option("--csv", ct_csv, "also write rows to a CSV file");

    auto* extract = app.add_subcommand("extract", "run the backbone+neck on a PPM image");
    std::string ex_image, ex_config, ex_out;
    bool ex_dump = false;
    extract->add_option("--image", ex_image, "binary P6 PPM input")->required();
    extract->add_option("--config", ex_config, "model config file")->required();
    extract->add_option("--out", ex_out, "output directory for MYT1 dumps")->required();
    extract->add_flag("--dump-intermediate", ex_dump, "also dump stage and post-SS2D tensors");

    auto* bench = app.add_subcommand("bench", "micro-benchmarks with linear-scaling fit");
    std::string be_op = "selective";
    std::vector<std::int64_t> be_sizes;
    int be_repeats = 0;
    bench->add_option("--op", be_op, "scan-recurrent|scan-conv|selective|ss2d")
        ->capture_default_str();
    bench->add_option("--sizes", be_sizes, "sizes (L for scans, side for ss2d)");
    bench->add_option("--repeats", be_repeats, "timed repetitions per size")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (threads > 0) odm::set_thread_cap(threads);

    try {
        if (*selftest) return cmd_selftest(seed);
        if (*scan_equiv) return cmd_scan_equiv(se_n, se_l, se_trials, seed);
        if (*gradcheck) return cmd_gradcheck(seed, gc_trials);
        if (*shapes) return cmd_shapes(sh_config, sh_input);
        if (*count) return cmd_count(ct_config, ct_input, ct_csv);
        if (*extract)
            return cmd_extract(ex_image, ex_config, ex_out, ex_dump, seed,
                               app.count("--seed") > 0);
        if (*bench) return cmd_bench(be_op, be_sizes, be_repeats, seed);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
