// Command-line frontend: synthetic data generation, training, evaluation,
// ablation sweeps and abundance-map rendering over the cube/checkpoint file
// formats.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <iostream>
#include <vector>

#include "sawu/baseline.hpp"
#include "sawu/checkpoint.hpp"
#include "sawu/cube.hpp"
#include "sawu/errors.hpp"
#include "sawu/format.hpp"
#include "sawu/metrics.hpp"
#include "sawu/model.hpp"
#include "sawu/pgm.hpp"
#include "sawu/synthetic.hpp"
#include "sawu/vca.hpp"

namespace fs = std::filesystem;
using namespace sawu;

namespace {

int ensure_out_dir(const std::string& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out)) {
        std::cerr << "error: cannot create output directory '" << out << "'\n";
        return 2;
    }
    return 0;
}

// Resolved-config echo in the dotted INI form the --config option reads
// back: `sawu --config <file> <subcommand>` reproduces this run.
void echo_config(const CLI::App* sub, const std::string& out_dir) {
    std::string ini;
    std::istringstream raw(sub->config_to_str(true, false));
    std::string line;
    while (std::getline(raw, line)) {
        if (!line.empty()) ini += sub->get_name() + "." + line + "\n";
    }
    std::cout << "# resolved configuration (" << sub->get_name() << ")\n" << ini;
    if (!out_dir.empty()) {
        std::ofstream os(fs::path(out_dir) / "config.ini");
        os << ini;
    }
}

struct TrainOptions {
    std::string cube_path;
    std::string out = ".";
    std::string variant = "sawu";
    std::size_t endmembers = 4;
    std::size_t window = 3;
    double lambda1 = 12.0;
    double lambda2 = 2e-3;
    std::size_t batch = 128;
    std::size_t epochs = 300;
    double lr_encoder = 1e-3;
    double lr_decoder = 1e-4;
    double dropout = 0.1;
    bool no_pixel_attention = false;
    std::uint64_t seed = 0;

    ModelConfig to_config(std::size_t bands) const {
        ModelConfig c;
        c.window = window;
        c.endmembers = endmembers;
        c.bands = bands;
        c.lambda1 = lambda1;
        c.lambda2 = lambda2;
        c.dropout_rate = dropout;
        c.use_pixel_attention = !no_pixel_attention;
        c.maxiter = epochs;
        c.batch_size = batch;
        c.lr_encoder = lr_encoder;
        c.lr_decoder = lr_decoder;
        c.seed = seed;
        return c;
    }
};

void add_train_options(CLI::App* sub, TrainOptions& o, bool with_epochs) {
    sub->add_option("--cube", o.cube_path, "Input cube file (binary cube format)")->required();
    sub->add_option("--endmembers", o.endmembers, "Number of endmembers P");
    sub->add_option("--window", o.window, "Window size K (odd)");
    sub->add_option("--lambda1", o.lambda1, "Reconstruction (SAD) weight");
    sub->add_option("--lambda2", o.lambda2, "Abundance sparsity weight");
    sub->add_option("--batch", o.batch, "Batch size");
    if (with_epochs) sub->add_option("--epochs", o.epochs, "Training epochs");
    sub->add_option("--lr-encoder", o.lr_encoder, "Learning rate for encoder/attention/BN");
    sub->add_option("--lr-decoder", o.lr_decoder, "Learning rate for the decoder");
    sub->add_option("--dropout", o.dropout, "Dropout rate in [0,1)");
    sub->add_flag("--no-pixel-attention", o.no_pixel_attention,
                  "Disable the pixel attention gate");
    sub->add_option("--seed", o.seed, "RNG seed");
    sub->add_option("--out", o.out, "Output directory");
}

// ---- generate ----

struct GenerateOptions {
    std::string out = ".";
    std::size_t endmembers = 4;
    std::size_t bands = 100;
    std::size_t height = 64;
    std::size_t width = 64;
    double snr = 30.0;
    std::uint64_t seed = 0;
};

int cmd_generate(const GenerateOptions& o, const CLI::App* sub) {
    if (int rc = ensure_out_dir(o.out)) return rc;
    echo_config(sub, o.out);

    SyntheticData d = generate_synthetic(o.endmembers, o.bands, o.height, o.width, o.snr, o.seed);
    save_cube(d.cube, (fs::path(o.out) / "cube.bin").string());
    save_matrix_text(d.gt.endmembers, (fs::path(o.out) / "gt_endmembers.txt").string());
    save_cube(d.gt.abundances, (fs::path(o.out) / "gt_abundances.bin").string());

    std::cout << "achieved_snr_db=" << fmt_double(d.achieved_snr_db) << "\n";
    std::cout << "wrote " << (fs::path(o.out) / "cube.bin").string() << " (" << o.height << "x"
              << o.width << "x" << o.bands << ")\n";
    return 0;
}

// ---- train ----

int cmd_train(const TrainOptions& o, const CLI::App* sub) {
    if (int rc = ensure_out_dir(o.out)) return rc;
    echo_config(sub, o.out);

    HsiCube cube = load_cube(o.cube_path);
    ModelConfig config = o.to_config(cube.bands);
    const NetVariant variant = o.variant == "baseline" ? NetVariant::Baseline : NetVariant::Sawu;

    std::ofstream loss_log(fs::path(o.out) / "loss.txt");
    TrainResult result = train(cube, config, variant, &loss_log);

    save_checkpoint({config, variant, result.params},
                    (fs::path(o.out) / "checkpoint.ckpt").string());
    std::cout << "epochs=" << result.loss_history.size();
    if (!result.loss_history.empty())
        std::cout << " final_loss=" << fmt_double(result.loss_history.back());
    std::cout << " degenerate_pixels=" << result.degenerate_pixels << "\n";
    std::cout << "wrote " << (fs::path(o.out) / "checkpoint.ckpt").string() << "\n";
    return 0;
}

// ---- eval ----

struct EvalOptions {
    std::string checkpoint_path;
    std::string cube_path;
    std::string gt_endmembers;
    std::string gt_abundances;
    std::string out = ".";
};

int cmd_eval(const EvalOptions& o, const CLI::App* sub) {
    if (int rc = ensure_out_dir(o.out)) return rc;
    echo_config(sub, o.out);

    Checkpoint ckpt = load_checkpoint(o.checkpoint_path);
    HsiCube cube = load_cube(o.cube_path);
    if (cube.bands != ckpt.config.bands)
        throw DimensionError("eval: cube has " + std::to_string(cube.bands) +
                             " bands, checkpoint expects " + std::to_string(ckpt.config.bands));

    const Tensor endmembers = extract_endmembers(ckpt.params);
    InferResult inf = infer_abundances(ckpt.params, cube, ckpt.config, ckpt.variant);
    std::cout << "degenerate_pixels=" << inf.degenerate_pixels << "\n";

    // endmember spectra as comma-separated columns
    {
        std::ofstream os(fs::path(o.out) / "endmembers.csv");
        for (std::size_t b = 0; b < endmembers.rows(); ++b) {
            for (std::size_t e = 0; e < endmembers.cols(); ++e)
                os << (e ? "," : "") << fmt_double(endmembers.at(b, e));
            os << "\n";
        }
    }
    // per-endmember abundance maps
    for (std::size_t e = 0; e < ckpt.config.endmembers; ++e) {
        std::vector<double> plane(cube.pixels());
        for (std::size_t px = 0; px < cube.pixels(); ++px)
            plane[px] = inf.abundances.data[px * ckpt.config.endmembers + e];
        write_pgm((fs::path(o.out) / ("abundance_em" + std::to_string(e + 1) + ".pgm")).string(),
                  cube.width, cube.height, plane);
    }

    if (o.gt_endmembers.empty()) {
        std::cerr << "warning: no ground-truth endmembers given; writing endmember-only report\n";
        std::ofstream os(fs::path(o.out) / "report.txt");
        os << "seed=" << ckpt.config.seed << "\n";
        char hexbuf[32];
        std::snprintf(hexbuf, sizeof(hexbuf), "%016llx",
                      static_cast<unsigned long long>(ckpt.config.hash()));
        os << "config_hash=" << hexbuf << "\n";
        os << "degenerate_pixels=" << inf.degenerate_pixels << "\n";
        return 0;
    }

    Tensor gt_em = load_matrix_text(o.gt_endmembers);
    HsiCube gt_ab;
    const bool with_ab = !o.gt_abundances.empty();
    if (with_ab) gt_ab = load_cube(o.gt_abundances);

    MetricsReport report = score(endmembers, gt_em, with_ab ? &inf.abundances : nullptr,
                                 with_ab ? &gt_ab : nullptr);
    report.seed = ckpt.config.seed;
    report.config_hash = ckpt.config.hash();

    std::ofstream os(fs::path(o.out) / "report.txt");
    write_report(report, os);
    os << "degenerate_pixels=" << inf.degenerate_pixels << "\n";
    std::cout << human_table(report);
    return 0;
}

// ---- ablate ----

struct AblateOptions {
    TrainOptions train;
    std::string gt_endmembers;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::size_t epochs = 300;
    std::vector<std::size_t> sweep{1, 3, 5, 7, 9};
};

struct AblateCell {
    std::string variant;
    std::size_t window;
    std::vector<double> sad_per_seed;
    double mean = 0.0;
    double stddev = 0.0;
};

AblateCell run_cell(const HsiCube& cube, const Tensor& gt_em, const AblateOptions& o,
                    const std::string& variant, std::size_t window) {
    AblateCell cell;
    cell.variant = variant;
    cell.window = window;
    for (std::uint64_t seed : o.seeds) {
        TrainOptions to = o.train;
        to.window = window;
        to.epochs = o.epochs;
        to.seed = seed;
        to.no_pixel_attention = variant == "sawu-no-pa";
        ModelConfig config = to.to_config(cube.bands);
        const NetVariant nv = variant == "baseline" ? NetVariant::Baseline : NetVariant::Sawu;
        TrainResult r = train(cube, config, nv);
        MetricsReport rep = score(extract_endmembers(r.params), gt_em, nullptr, nullptr);
        cell.sad_per_seed.push_back(rep.avg_sad());
    }
    double acc = 0.0;
    for (double v : cell.sad_per_seed) acc += v;
    cell.mean = acc / static_cast<double>(cell.sad_per_seed.size());
    double var = 0.0;
    for (double v : cell.sad_per_seed) var += (v - cell.mean) * (v - cell.mean);
    cell.stddev = std::sqrt(var / static_cast<double>(cell.sad_per_seed.size()));
    return cell;
}

int cmd_ablate(const AblateOptions& o, const CLI::App* sub) {
    if (int rc = ensure_out_dir(o.train.out)) return rc;
    echo_config(sub, o.train.out);

    HsiCube cube = load_cube(o.train.cube_path);
    Tensor gt_em = load_matrix_text(o.gt_endmembers);

    std::vector<AblateCell> cells;
    for (const char* variant : {"baseline", "sawu-no-pa", "sawu"})
        cells.push_back(run_cell(cube, gt_em, o, variant, o.train.window));
    for (std::size_t k : o.sweep) cells.push_back(run_cell(cube, gt_em, o, "sawu", k));

    std::ofstream os(fs::path(o.train.out) / "ablate.txt");
    for (const auto& c : cells) {
        os << "variant=" << c.variant << " window=" << c.window << " seeds=";
        for (std::size_t i = 0; i < o.seeds.size(); ++i) os << (i ? "," : "") << o.seeds[i];
        os << " sad=";
        for (std::size_t i = 0; i < c.sad_per_seed.size(); ++i)
            os << (i ? "," : "") << fmt_double(c.sad_per_seed[i]);
        os << " mean=" << fmt_double(c.mean) << " stddev=" << fmt_double(c.stddev) << "\n";
    }

    std::cout << "variant       K   mean avg-SAD (x1e-2)   stddev\n";
    for (const auto& c : cells)
        std::cout << c.variant << std::string(14 - c.variant.size(), ' ') << c.window << "   "
                  << fmt_fixed(c.mean * 100.0, 3) << "                "
                  << fmt_fixed(c.stddev * 100.0, 3) << "\n";
    return 0;
}

// ---- render ----

struct RenderOptions {
    std::string input;
    std::string out = ".";
};

int cmd_render(const RenderOptions& o, const CLI::App* sub) {
    if (int rc = ensure_out_dir(o.out)) return rc;
    echo_config(sub, o.out);

    HsiCube cube = load_cube(o.input);
    for (std::size_t b = 0; b < cube.bands; ++b) {
        std::vector<double> plane(cube.pixels());
        for (std::size_t px = 0; px < cube.pixels(); ++px)
            plane[px] = cube.data[px * cube.bands + b];
        write_pgm((fs::path(o.out) / ("band_" + std::to_string(b + 1) + ".pgm")).string(),
                  cube.width, cube.height, plane);
    }
    std::cout << "wrote " << cube.bands << " graymaps to " << o.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatial-attention weighted autoencoder for hyperspectral unmixing"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    app.set_config("--config", "", "Read options from a dotted-key INI file");
    app.allow_config_extras(CLI::config_extras_mode::error);

    GenerateOptions gen_opts;
    auto* gen = app.add_subcommand("generate", "Generate a synthetic cube with ground truth");
    gen->add_option("--endmembers", gen_opts.endmembers, "Number of endmembers P");
    gen->add_option("--bands", gen_opts.bands, "Spectral bands L");
    gen->add_option("--height", gen_opts.height, "Cube height");
    gen->add_option("--width", gen_opts.width, "Cube width");
    gen->add_option("--snr", gen_opts.snr, "Target SNR in dB (inf for noiseless)");
    gen->add_option("--seed", gen_opts.seed, "RNG seed");
    gen->add_option("--out", gen_opts.out, "Output directory");

    TrainOptions train_opts;
    auto* tr = app.add_subcommand("train", "Train a model on a cube");
    add_train_options(tr, train_opts, true);
    tr->add_option("--variant", train_opts.variant, "Network variant: sawu | baseline")
        ->check(CLI::IsMember({"sawu", "baseline"}));

    EvalOptions eval_opts;
    auto* ev = app.add_subcommand("eval", "Score a checkpoint against ground truth");
    ev->add_option("--checkpoint", eval_opts.checkpoint_path, "Model checkpoint")->required();
    ev->add_option("--cube", eval_opts.cube_path, "Input cube")->required();
    ev->add_option("--gt-endmembers", eval_opts.gt_endmembers,
                   "Ground-truth endmembers (text LxP)");
    ev->add_option("--gt-abundances", eval_opts.gt_abundances,
                   "Ground-truth abundances (cube format)");
    ev->add_option("--out", eval_opts.out, "Output directory");

    AblateOptions ab_opts;
    auto* ab = app.add_subcommand("ablate", "Variant and window-size sweep");
    add_train_options(ab, ab_opts.train, false);
    ab->add_option("--gt-endmembers", ab_opts.gt_endmembers, "Ground-truth endmembers")->required();
    ab->add_option("--seeds", ab_opts.seeds, "Seed list")->delimiter(',');
    ab->add_option("--epochs", ab_opts.epochs, "Training epochs per cell");
    ab->add_option("--sweep", ab_opts.sweep, "Window sizes to sweep")->delimiter(',');

    RenderOptions render_opts;
    auto* re = app.add_subcommand("render", "Render cube bands as graymaps");
    re->add_option("--input", render_opts.input, "Cube-format file (e.g. abundances)")->required();
    re->add_option("--out", render_opts.out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (gen->parsed()) return cmd_generate(gen_opts, gen);
        if (tr->parsed()) return cmd_train(train_opts, tr);
        if (ev->parsed()) return cmd_eval(eval_opts, ev);
        if (ab->parsed()) return cmd_ablate(ab_opts, ab);
        if (re->parsed()) return cmd_render(render_opts, re);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
