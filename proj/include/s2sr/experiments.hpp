#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "s2sr/acquisition.hpp"
#include "s2sr/dataset.hpp"
#include "s2sr/error.hpp"
#include "s2sr/eval.hpp"
#include "s2sr/nn/checkpoint.hpp"
#include "s2sr/nn/model.hpp"
#include "s2sr/raster_io.hpp"
#include "s2sr/train.hpp"

namespace s2sr {

/// Everything shared by the cells of a comparative experiment.
struct ExperimentOptions {
    AcquisitionConfig base;
    DatasetOptions dataset;
    TrainConfig train;
    std::string spec = "tiny";
    std::uint64_t seed = 0;  // dataset and training seed
    TileOptions tiles;
    bool verbose = false;
};

inline nlohmann::json to_json(const ExperimentOptions& o) {
    return {{"spec", o.spec},
            {"seed", o.seed},
            {"train", to_json(o.train)},
            {"crop", o.dataset.crop},
            {"max_crops", o.dataset.max_crops},
            {"margin", o.dataset.margin},
            {"sigma_alias", o.base.sigma_alias},
            {"sigma_noalias", o.base.sigma_noalias},
            {"noise_level", o.base.noise_level}};
}

/// File-system safe form of a config id ("alias:fixed" -> "alias_fixed").
inline std::string cell_dir_name(const std::string& id) {
    std::string s = id;
    std::replace(s.begin(), s.end(), ':', '_');
    return s;
}

struct TrainedModel {
    std::filesystem::path checkpoint;
    EvalReport report;
};

/// Trains on the train split of a manifest, writes <stem>.srw and
/// <stem>.loss.csv, and evaluates every split.
inline TrainedModel train_and_evaluate(const std::filesystem::path& manifest_path, const ExperimentOptions& opt,
                                       const std::filesystem::path& stem, std::optional<int> band = std::nullopt) {
    const Manifest m = load_manifest(manifest_path);
    const auto pairs = load_pairs(m, "train", band);
    const int bands = pairs.empty() ? 3 : pairs[0].lr.bands;
    TrainConfig tc = opt.train;
    tc.seed = opt.seed;
    const auto result = train(pairs, nn::spec_by_name(opt.spec, bands), tc);
    TrainedModel tm;
    tm.checkpoint = stem.string() + ".srw";
    nlohmann::json meta = {{"train", to_json(tc)}, {"config", m.config()}};
    if (band) meta["band"] = *band;
    const std::string bytes = nn::encode_checkpoint(result.params, meta);
    write_file_bytes(tm.checkpoint, bytes);
    write_file_bytes(stem.string() + ".loss.csv", loss_csv(result.loss_history));
    if (!band) {
        tm.report = evaluate(result.params, m, standard_splits(), opt.tiles);
        tm.report.checkpoint = tm.checkpoint.string();
        tm.report.checkpoint_hash = nn::fnv1a_hex(bytes);
        tm.report.manifest = manifest_path.string();
    }
    return tm;
}

// ---------------------------------------------------------------------------
// Table 1: six acquisition scenarios, one model each

struct Table1Result {
    std::vector<EvalReport> cells;  // canonical order
};

inline std::string table1_row_label(const std::string& id) {
    const auto cfg = parse_config_id(id);
    const std::string a = cfg.alias ? "alias" : "no alias";
    const std::string s = cfg.shift_mode == ShiftMode::None ? "no shift" : to_string(cfg.shift_mode) + " shift";
    return a + " | " + s;
}

/// Plain-text facsimile of the six-row PSNR table.
inline std::string table1_text(const std::vector<EvalReport>& cells) {
    std::ostringstream os;
    os << "PSNR (dB)                 Test      Train     Val       Bicubic(test)\n";
    for (const auto& c : cells) {
        std::string label = c.config;
        try {
            label = table1_row_label(c.config);
        } catch (const UsageError&) {
        }
        char line[160];
        std::snprintf(line, sizeof line, "%-24s  %-8s  %-8s  %-8s  %s\n", label.c_str(), format_db(c.mean("test")).c_str(),
                      format_db(c.mean("train")).c_str(), format_db(c.mean("val")).c_str(),
                      format_db(c.find("test") ? c.find("test")->mean_bicubic : std::nan("")).c_str());
        os << line;
    }
    return os.str();
}

inline std::string table1_csv(const std::vector<EvalReport>& cells) {
    std::ostringstream os;
    os << "config,test_psnr,train_psnr,val_psnr\n";
    for (const auto& c : cells)
        os << c.config << "," << format_db(c.mean("test"), 4) << "," << format_db(c.mean("train"), 4) << ","
           << format_db(c.mean("val"), 4) << "\n";
    return os.str();
}

/// Builds the six datasets from one corpus and seed, trains one model per
/// dataset with identical settings, and evaluates each on its own splits.
/// Layout: out/<cell>/{manifest.json, lr/, hr/, model.srw, model.loss.csv,
/// report.json}, plus out/table1.{json,txt,csv}.
inline Table1Result run_table1_experiment(const std::filesystem::path& hr_dir, const ExperimentOptions& opt,
                                          const std::filesystem::path& out) {
    std::filesystem::create_directories(out);
    Table1Result res;
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& cfg : canonical_configs(opt.base)) {
        const auto dir = out / cell_dir_name(cfg.id());
        try {
            build_synthetic_dataset(hr_dir, cfg, dir, opt.dataset, opt.seed);
            auto tm = train_and_evaluate(dir / "manifest.json", opt, dir / "model");
            write_report(tm.report, dir / "report.json");
            if (opt.verbose)
                std::cerr << cfg.id() << ": test " << format_db(tm.report.mean("test")) << " dB ("
                          << tm.report.runtime_seconds << " s eval)\n";
            cells.push_back(cell_dir_name(cfg.id()) + "/report.json");
            res.cells.push_back(std::move(tm.report));
        } catch (const DivergenceError& e) {
            throw DivergenceError("cell " + cfg.id() + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError("cell " + cfg.id() + ": " + e.what());
        }
    }
    nlohmann::json summary = {{"experiment", "table1"}, {"options", to_json(opt)}, {"cells", cells}};
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& c : res.cells)
        rows.push_back({{"config", c.config}, {"test", db_json(c.mean("test"))}, {"train", db_json(c.mean("train"))}, {"val", db_json(c.mean("val"))}});
    summary["rows"] = rows;
    write_file_bytes(out / "table1.json", summary.dump(2) + "\n");
    write_file_bytes(out / "table1.txt", table1_text(res.cells));
    write_file_bytes(out / "table1.csv", table1_csv(res.cells));
    return res;
}

// ---------------------------------------------------------------------------
// Cross-spectral ablation: one joint model vs three single-band models

struct CrossSpectralResult {
    std::string config;
    double joint_psnr = 0.0;     // test-split mean
    double ensemble_psnr = 0.0;  // test-split mean of the stacked single-band outputs
    double gap = 0.0;            // joint - ensemble
    std::vector<PairScore> joint_pairs;
    std::vector<PairScore> ensemble_pairs;
};

inline nlohmann::json to_json(const CrossSpectralResult& r) {
    auto pairs = [](const std::vector<PairScore>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& p : v) a.push_back({{"lr_path", p.lr_path}, {"psnr", db_json(p.psnr)}});
        return a;
    };
    return {{"config", r.config},
            {"split", "test"},
            {"joint_psnr", db_json(r.joint_psnr)},
            {"ensemble_psnr", db_json(r.ensemble_psnr)},
            {"gap_db", db_json(r.gap)},
            {"joint_pairs", pairs(r.joint_pairs)},
            {"ensemble_pairs", pairs(r.ensemble_pairs)}};
}

/// Stacks single-band outputs back into one raster, band k from parts[k].
inline Raster stack_bands(const std::vector<Raster>& parts) {
    std::vector<Plane> planes;
    for (const auto& p : parts) {
        if (p.bands != 1) throw DataError("stack_bands expects single-band rasters");
        planes.push_back(p.band(0));
    }
    return from_bands(planes);
}

/// Trains a joint model and one model per band under the same budget and
/// seed, and scores both on the test split. Layout: out/joint.*,
/// out/band<k>.*, out/xspectral.{json,txt}.
inline CrossSpectralResult run_cross_spectral_experiment(const std::filesystem::path& manifest_path, const ExperimentOptions& opt,
                                                         const std::filesystem::path& out) {
    const Manifest m = load_manifest(manifest_path);
    const auto test = load_pairs(m, "test");
    if (test.empty()) throw DataError("cross-spectral experiment needs a non-empty test split");
    if (test[0].lr.bands != 3) throw DataError("cross-spectral experiment needs a 3-band dataset");
    std::filesystem::create_directories(out);

    const auto joint = train_and_evaluate(manifest_path, opt, out / "joint");
    write_report(joint.report, out / "joint.report.json");
    std::vector<nn::ModelParams<float>> singles;
    for (int b = 0; b < 3; ++b) {
        const auto tm = train_and_evaluate(manifest_path, opt, out / ("band" + std::to_string(b)), b);
        singles.push_back(nn::load_checkpoint(tm.checkpoint).params.frozen());
        if (opt.verbose) std::cerr << "band " << b << " trained\n";
    }

    CrossSpectralResult r;
    r.config = m.config();
    r.joint_pairs = joint.report.find("test")->pairs;
    std::vector<double> ps;
    for (const auto& p : test) {
        std::vector<Raster> parts;
        for (int b = 0; b < 3; ++b) {
            const int which[1] = {b};
            parts.push_back(infer(singles[static_cast<std::size_t>(b)], select_bands(p.lr, which), opt.tiles));
        }
        r.ensemble_pairs.push_back({p.lr_path, psnr(stack_bands(parts), p.hr), psnr(nn::bicubic_upsample(p.lr), p.hr)});
        ps.push_back(r.ensemble_pairs.back().psnr);
    }
    r.joint_psnr = joint.report.mean("test");
    r.ensemble_psnr = mean_of(ps);
    r.gap = r.joint_psnr - r.ensemble_psnr;

    nlohmann::json j = to_json(r);
    j["options"] = to_json(opt);
    j["manifest"] = manifest_path.string();
    write_file_bytes(out / "xspectral.json", j.dump(2) + "\n");
    std::ostringstream os;
    os << "Cross-spectral ablation (" << r.config << ", test split, " << test.size() << " pairs)\n"
       << "joint RGB model        " << format_db(r.joint_psnr) << " dB\n"
       << "per-band ensemble      " << format_db(r.ensemble_psnr) << " dB\n"
       << "gap (joint - ensemble) " << format_db(r.gap) << " dB\n";
    write_file_bytes(out / "xspectral.txt", os.str());
    return r;
}

// ---------------------------------------------------------------------------
// Report rendering

inline constexpr int kPanelGap = 4;  // HR pixels between triptych panels

struct Triptych {
    std::string name;
    Raster lr;
    Raster sr;
    Raster hr;
};

/// LR (nearest 2x) | SR | HR side by side: (2H) x (3*2W + 2*gap).
inline Raster compose_triptych(const Raster& lr, const Raster& sr, const Raster& hr) {
    const int H = 2 * lr.height;
    const int W = 2 * lr.width;
    if (sr.bands != lr.bands || hr.bands != lr.bands || sr.height != H || sr.width != W || hr.height != H || hr.width != W)
        throw DataError("triptych panels disagree in shape");
    Raster out(lr.bands, H, 3 * W + 2 * kPanelGap, kPeakDN);
    for (int b = 0; b < lr.bands; ++b)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                out.at(b, y, x) = lr.at(b, y / 2, x / 2);
                out.at(b, y, W + kPanelGap + x) = sr.at(b, y, x);
                out.at(b, y, 2 * (W + kPanelGap) + x) = hr.at(b, y, x);
            }
    return out;
}

/// Writes report.csv, report.txt and one triptych PNG per sample.
inline void render_report(const std::vector<EvalReport>& reports, const std::vector<Triptych>& samples,
                          const std::filesystem::path& out) {
    if (reports.empty()) throw DataError("nothing to report");
    std::filesystem::create_directories(out);
    write_file_bytes(out / "report.csv", table1_csv(reports));
    write_file_bytes(out / "report.txt", table1_text(reports));
    for (const auto& t : samples) write_png_preview(compose_triptych(t.lr, t.sr, t.hr), out / ("triptych_" + t.name + ".png"));
}

/// First test pair (else first pair) of the report's manifest through its
/// checkpoint.
inline Triptych sample_triptych(const EvalReport& r, const std::string& name, const TileOptions& tiles = {}) {
    const Manifest m = load_manifest(r.manifest);
    if (m.entries.empty()) throw DataError("manifest " + r.manifest + " has no pairs");
    const ManifestEntry* pick = &m.entries[0];
    for (const auto& e : m.entries)
        if (e.split == "test") {
            pick = &e;
            break;
        }
    Triptych t;
    t.name = name;
    t.lr = read_raster(m.root / pick->lr_path);
    t.hr = read_raster(m.root / pick->hr_path);
    t.sr = infer(nn::load_checkpoint(r.checkpoint).params.frozen(), t.lr, tiles);
    return t;
}

/// Collects every report.json / *.report.json under dir (sorted by path)
/// and renders them with one triptych each.
inline std::size_t render_report_dir(const std::filesystem::path& in, const std::filesystem::path& out) {
    if (!std::filesystem::is_directory(in)) throw DataError("not a directory: " + in.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(in)) {
        const std::string n = e.path().filename().string();
        if (e.is_regular_file() && (n == "report.json" || (n.size() > 12 && n.ends_with(".report.json")))) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<EvalReport> reports;
    std::vector<Triptych> samples;
    for (const auto& f : files) {
        reports.push_back(read_report(f));
        const auto rel = std::filesystem::relative(f, in).parent_path().string();
        std::string name = rel.empty() ? f.stem().stem().string() : cell_dir_name(rel);
        std::replace(name.begin(), name.end(), '/', '_');
        if (!reports.back().checkpoint.empty() && !reports.back().manifest.empty())
            samples.push_back(sample_triptych(reports.back(), name));
    }
    // Table-1 order when the reports are the six canonical cells.
    std::vector<std::string> order;
    for (const auto& c : canonical_configs(AcquisitionConfig{})) order.push_back(c.id());
    std::stable_sort(reports.begin(), reports.end(), [&](const EvalReport& a, const EvalReport& b) {
        auto rank = [&](const std::string& id) { return std::find(order.begin(), order.end(), id) - order.begin(); };
        return rank(a.config) < rank(b.config);
    });
    render_report(reports, samples, out);
    return reports.size();
}

}  // namespace s2sr
