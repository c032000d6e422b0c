// s2sr: command-line front end. Exit codes: 0 ok, 1 usage, 2 data, 3 divergence.

#include <malloc.h>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "s2sr/acquisition.hpp"
#include "s2sr/dataset.hpp"
#include "s2sr/error.hpp"
#include "s2sr/eval.hpp"
#include "s2sr/experiments.hpp"
#include "s2sr/nn/checkpoint.hpp"
#include "s2sr/pairing.hpp"
#include "s2sr/raster_io.hpp"
#include "s2sr/train.hpp"

namespace fs = std::filesystem;
using namespace s2sr;

namespace {

struct Args {
    // shared
    std::string out;
    std::uint64_t seed = 0;
    bool verbose = false;
    // simulate / table1
    std::string hr_dir;
    std::string config;
    int crop = 64;
    int max_crops = 8;
    int margin = 8;
    double noise = 0.001;
    double sigma_alias = 0.7;
    double sigma_noalias = 1.2;
    // pair
    std::string list;
    double threshold = kDefaultScoreThreshold;
    double test_fraction = 0.2;
    double val_fraction = 0.1;
    // train / experiments
    std::string manifest;
    std::string spec = "tiny";
    int iters = 1000;
    int batch = 4;
    int patch = 32;
    double lr = 5e-4;
    // eval
    std::string ckpt;
    std::string split = "test";
    std::string report;
    int tile = 64;
    int overlap = 8;
    int halo = 8;
    // report
    std::string in;
    // ingest
    std::string png_dir;
    int ingest_tile = 256;
};

void add_dataset_opts(CLI::App* c, Args& a) {
    c->add_option("--crop", a.crop, "LR crop side")->capture_default_str();
    c->add_option("--max-crops", a.max_crops, "crops per image")->capture_default_str();
    c->add_option("--margin", a.margin, "LR pixels trimmed per side before cropping")->capture_default_str();
    c->add_option("--noise", a.noise, "noise std as a fraction of 4095")->capture_default_str();
    c->add_option("--sigma-alias", a.sigma_alias, "blur sigma (HR px) of alias configs")->capture_default_str();
    c->add_option("--sigma-noalias", a.sigma_noalias, "blur sigma (HR px) of no-alias configs")->capture_default_str();
}

void add_train_opts(CLI::App* c, Args& a) {
    c->add_option("--spec", a.spec, "model profile: tiny|desk|paper")->capture_default_str();
    c->add_option("--iters", a.iters, "training iterations")->capture_default_str();
    c->add_option("--batch", a.batch, "batch size")->capture_default_str();
    c->add_option("--patch", a.patch, "LR patch side")->capture_default_str();
    c->add_option("--lr", a.lr, "Adam learning rate")->capture_default_str();
    c->add_option("--seed", a.seed, "seed")->capture_default_str();
}

AcquisitionConfig base_config(const Args& a) {
    AcquisitionConfig c;
    c.noise_level = a.noise;
    c.sigma_alias = a.sigma_alias;
    c.sigma_noalias = a.sigma_noalias;
    return c;
}

DatasetOptions dataset_options(const Args& a) {
    DatasetOptions d;
    d.crop = a.crop;
    d.max_crops = a.max_crops;
    d.margin = a.margin;
    d.test_fraction = a.test_fraction;
    d.val_fraction = a.val_fraction;
    return d;
}

TrainConfig train_config(const Args& a) {
    TrainConfig t;
    t.adam.lr = a.lr;
    t.iterations = a.iters;
    t.batch = a.batch;
    t.patch = a.patch;
    t.seed = a.seed;
    return t;
}

ExperimentOptions experiment_options(const Args& a) {
    ExperimentOptions o;
    o.base = base_config(a);
    o.dataset = dataset_options(a);
    o.train = train_config(a);
    o.spec = a.spec;
    o.seed = a.seed;
    o.tiles = {a.tile, a.overlap, a.halo};
    o.verbose = a.verbose;
    return o;
}

int cmd_simulate(const Args& a) {
    AcquisitionConfig cfg = parse_config_id(a.config);
    const auto base = base_config(a);
    cfg.noise_level = base.noise_level;
    cfg.sigma_alias = base.sigma_alias;
    cfg.sigma_noalias = base.sigma_noalias;
    const auto m = build_synthetic_dataset(a.hr_dir, cfg, a.out, dataset_options(a), a.seed);
    std::cout << "wrote " << m["pairs"].size() << " pairs to " << (fs::path(a.out) / "manifest.json").string() << "\n";
    return 0;
}

int cmd_pair(const Args& a) {
    const auto s = run_pairing(a.list, a.out, a.threshold, a.seed, a.test_fraction, a.val_fraction);
    std::cout << "kept " << s.kept << ", rejected " << s.rejected << "\n";
    return 0;
}

int cmd_train(const Args& a) {
    const Manifest m = load_manifest(a.manifest);
    const auto pairs = load_pairs(m, "train");
    if (pairs.empty()) throw DataError("manifest has no train pairs");
    const TrainConfig tc = train_config(a);
    const auto res = train(pairs, nn::spec_by_name(a.spec, pairs[0].lr.bands), tc);
    nn::save_checkpoint(res.params, a.out, {{"train", to_json(tc)}, {"config", m.config()}});
    write_file_bytes(a.out + ".loss.csv", loss_csv(res.loss_history));
    if (!res.loss_history.empty())
        std::cout << "loss " << res.loss_history.front() << " -> " << res.loss_history.back() << "\n";
    std::cout << "wrote " << a.out << "\n";
    return 0;
}

int cmd_eval(const Args& a) {
    const auto rep = evaluate_checkpoint(a.ckpt, a.manifest, {a.split}, {a.tile, a.overlap, a.halo});
    write_report(rep, a.report);
    for (const auto& s : rep.splits)
        std::cout << s.split << ": " << format_db(s.mean_psnr, 3) << " dB over " << s.pairs.size() << " pairs (bicubic "
                  << format_db(s.mean_bicubic, 3) << ")\n";
    return 0;
}

int cmd_table1(const Args& a) {
    const auto res = run_table1_experiment(a.hr_dir, experiment_options(a), a.out);
    std::cout << table1_text(res.cells);
    return 0;
}

int cmd_xspectral(const Args& a) {
    const auto r = run_cross_spectral_experiment(a.manifest, experiment_options(a), a.out);
    std::cout << "joint " << format_db(r.joint_psnr, 3) << " dB, ensemble " << format_db(r.ensemble_psnr, 3) << " dB, gap "
              << format_db(r.gap, 3) << " dB\n";
    return 0;
}

int cmd_report(const Args& a) {
    const auto n = render_report_dir(a.in, a.out);
    std::cout << "rendered " << n << " reports to " << a.out << "\n";
    return 0;
}

int cmd_ingest(const Args& a) {
    const auto n = ingest_png_dir(a.png_dir, a.out, a.ingest_tile);
    std::cout << "wrote " << n << " rasters to " << a.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    // Training allocates and frees the same large buffers every step; keep
    // them on the heap instead of round-tripping through mmap.
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);

    Args a;
    CLI::App app{"Desk-scale x2 super-resolution of multi-band imagery"};
    app.require_subcommand(1);
    app.add_flag("-v,--verbose", a.verbose, "progress on stderr");

    auto* sim = app.add_subcommand("simulate", "build a synthetic LR/HR dataset");
    sim->add_option("--hr-dir", a.hr_dir, "directory of HR .ras images")->required();
    sim->add_option("--config", a.config, "{alias|noalias}:{none|fixed|random}")->required();
    sim->add_option("--out", a.out, "output directory")->required();
    sim->add_option("--seed", a.seed, "seed")->capture_default_str();
    add_dataset_opts(sim, a);

    auto* pair = app.add_subcommand("pair", "register and filter real LR/HR pairs");
    pair->add_option("--list", a.list, "JSON list of {lr_path, hr_path, scene_id, date}")->required();
    pair->add_option("--out", a.out, "output directory")->required();
    pair->add_option("--threshold", a.threshold, "minimum correlation score")->capture_default_str();
    pair->add_option("--seed", a.seed, "split seed")->capture_default_str();
    pair->add_option("--test", a.test_fraction, "test fraction of scenes")->capture_default_str();
    pair->add_option("--val", a.val_fraction, "validation fraction of scenes")->capture_default_str();

    auto* tr = app.add_subcommand("train", "train a model on a manifest's train split");
    tr->add_option("--manifest", a.manifest, "manifest.json")->required();
    tr->add_option("--out", a.out, "checkpoint path (loss history goes to <out>.loss.csv)")->required();
    add_train_opts(tr, a);

    auto* ev = app.add_subcommand("eval", "PSNR of a checkpoint on a manifest split");
    ev->add_option("--ckpt", a.ckpt, "checkpoint")->required();
    ev->add_option("--manifest", a.manifest, "manifest.json")->required();
    ev->add_option("--split", a.split, "train|val|test|all")->capture_default_str();
    ev->add_option("--report", a.report, "report JSON path")->required();
    ev->add_option("--tile", a.tile, "inference tile (LR px)")->capture_default_str();
    ev->add_option("--overlap", a.overlap, "tile overlap (LR px)")->capture_default_str();
    ev->add_option("--halo", a.halo, "extra context around each tile (LR px)")->capture_default_str();

    auto* t1 = app.add_subcommand("table1", "six-scenario alias/shift experiment");
    t1->add_option("--hr-dir", a.hr_dir, "directory of HR .ras images")->required();
    t1->add_option("--out", a.out, "output directory")->required();
    add_train_opts(t1, a);
    add_dataset_opts(t1, a);

    auto* xs = app.add_subcommand("xspectral", "joint vs per-band model ablation");
    xs->add_option("--manifest", a.manifest, "3-band manifest.json")->required();
    xs->add_option("--out", a.out, "output directory")->required();
    add_train_opts(xs, a);

    auto* rep = app.add_subcommand("report", "render CSV, text table and triptychs");
    rep->add_option("--in", a.in, "experiment output directory")->required();
    rep->add_option("--out", a.out, "report directory")->required();

    auto* ing = app.add_subcommand("ingest", "convert PNG photographs into HR .ras tiles");
    ing->add_option("--png-dir", a.png_dir, "directory of .png files")->required();
    ing->add_option("--out", a.out, "output directory")->required();
    ing->add_option("--tile", a.ingest_tile, "tile side in pixels, 0 keeps whole images")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*sim) return cmd_simulate(a);
        if (*pair) return cmd_pair(a);
        if (*tr) return cmd_train(a);
        if (*ev) return cmd_eval(a);
        if (*t1) return cmd_table1(a);
        if (*xs) return cmd_xspectral(a);
        if (*rep) return cmd_report(a);
        if (*ing) return cmd_ingest(a);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const DivergenceError& e) {
        std::cerr << "training diverged: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
