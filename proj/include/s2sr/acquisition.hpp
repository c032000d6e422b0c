#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "s2sr/error.hpp"
#include "s2sr/pairing.hpp"
#include "s2sr/raster.hpp"
#include "s2sr/raster_io.hpp"
#include "s2sr/signal.hpp"

namespace s2sr {

enum class ShiftMode { None, Fixed, Random };

inline std::string to_string(ShiftMode m) {
    switch (m) {
        case ShiftMode::None: return "none";
        case ShiftMode::Fixed: return "fixed";
        case ShiftMode::Random: return "random";
    }
    return "none";
}

inline ShiftMode parse_shift_mode(const std::string& s) {
    if (s == "none") return ShiftMode::None;
    if (s == "fixed") return ShiftMode::Fixed;
    if (s == "random") return ShiftMode::Random;
    throw UsageError("unknown shift mode '" + s + "'");
}

/// One degradation scenario. Sigmas are in HR pixels; noise is a fraction of 4095.
struct AcquisitionConfig {
    bool alias = true;
    ShiftMode shift_mode = ShiftMode::None;
    double sigma_alias = 0.7;
    double sigma_noalias = 1.2;
    double noise_level = 0.001;
    std::uint64_t seed = 0;

    [[nodiscard]] double sigma() const { return alias ? sigma_alias : sigma_noalias; }
    /// "alias:fixed", "noalias:none", ...
    [[nodiscard]] std::string id() const { return std::string(alias ? "alias" : "noalias") + ":" + to_string(shift_mode); }
};

inline AcquisitionConfig parse_config_id(const std::string& id) {
    const auto colon = id.find(':');
    if (colon == std::string::npos) throw UsageError("config must look like alias:fixed, got '" + id + "'");
    const std::string a = id.substr(0, colon);
    AcquisitionConfig cfg;
    if (a == "alias")
        cfg.alias = true;
    else if (a == "noalias")
        cfg.alias = false;
    else
        throw UsageError("unknown alias flag '" + a + "'");
    cfg.shift_mode = parse_shift_mode(id.substr(colon + 1));
    return cfg;
}

/// The six canonical scenarios in report order: {no alias, alias} x {none, fixed, random}.
inline std::vector<AcquisitionConfig> canonical_configs(const AcquisitionConfig& base) {
    std::vector<AcquisitionConfig> out;
    for (bool alias : {false, true})
        for (ShiftMode m : {ShiftMode::None, ShiftMode::Fixed, ShiftMode::Random}) {
            AcquisitionConfig c = base;
            c.alias = alias;
            c.shift_mode = m;
            out.push_back(c);
        }
    return out;
}

struct BandOffset {
    int dr = 0;
    int dc = 0;
    bool operator==(const BandOffset&) const = default;
};

/// Per-band integer offsets in HR pixels, indexed by raster band (R, G, B).
/// Green is the reference band and never moves.
struct BandShiftTable {
    std::vector<BandOffset> offsets;

    [[nodiscard]] bool all_zero() const {
        return std::all_of(offsets.begin(), offsets.end(), [](const BandOffset& o) { return o.dr == 0 && o.dc == 0; });
    }
    bool operator==(const BandShiftTable&) const = default;
};

inline constexpr int kReferenceBand = 1;  // green in R, G, B order

inline BandShiftTable make_shift_table(ShiftMode mode, Rng& rng, int bands = 3) {
    BandShiftTable t;
    t.offsets.assign(static_cast<std::size_t>(bands), {});
    if (bands != 3) return t;  // single-band inputs carry no inter-band shift
    switch (mode) {
        case ShiftMode::None: break;
        case ShiftMode::Fixed:
            t.offsets[0] = {1, 0};
            t.offsets[2] = {0, 1};
            break;
        case ShiftMode::Random:
            for (int b = 0; b < 3; ++b) {
                if (b == kReferenceBand) continue;
                const int dr = rng.sign();
                const int dc = rng.sign();
                t.offsets[static_cast<std::size_t>(b)] = {dr, dc};
            }
            break;
    }
    return t;
}

/// HR -> LR per band: integer shift, Gaussian blur, 2x decimation, half-offset
/// spline compensation, additive noise.
inline Raster simulate_lr(const Raster& hr, const AcquisitionConfig& cfg, const BandShiftTable& shifts, Rng& rng) {
    if (hr.height % 2 != 0 || hr.width % 2 != 0) throw DataError("HR dimensions must be even");
    if (static_cast<int>(shifts.offsets.size()) != hr.bands) throw DataError("shift table does not match band count");
    const Kernel1D k = gaussian_kernel(cfg.sigma());
    std::vector<Plane> out;
    out.reserve(static_cast<std::size_t>(hr.bands));
    for (int b = 0; b < hr.bands; ++b) {
        const BandOffset o = shifts.offsets[static_cast<std::size_t>(b)];
        Plane p = shift_integer(hr.band(b), o.dr, o.dc);
        p = blur(p, k);
        p = decimate2(p, 0, 0);
        if (o.dr != 0 || o.dc != 0) p = spline_shift(p, -0.5 * o.dr, -0.5 * o.dc);
        p = add_noise(p, cfg.noise_level, rng);
        out.push_back(std::move(p));
    }
    return from_bands(out);
}

struct DatasetOptions {
    int crop = 64;
    int max_crops = 8;
    /// LR pixels trimmed from every side before cropping; keeps crops clear of
    /// the zero-filled compensation border and the blur/shift boundary extension.
    int margin = 8;
    double test_fraction = 0.2;
    double val_fraction = 0.1;
};

/// Photo-level scene key: the file stem up to a "__" tile separator.
inline std::string scene_of(const std::string& stem) {
    const auto pos = stem.find("__");
    return pos == std::string::npos ? stem : stem.substr(0, pos);
}

inline nlohmann::json shift_table_json(const BandShiftTable& t) {
    auto arr = nlohmann::json::array();
    for (const auto& o : t.offsets) arr.push_back({o.dr, o.dc});
    return arr;
}

inline std::vector<std::filesystem::path> list_rasters(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw DataError("not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".ras") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    return files;
}

/// Builds LR/HR crop pairs for one configuration and writes them, with
/// manifest.json, under out_dir. Deterministic in (inputs, cfg, opts, seed).
inline nlohmann::json build_synthetic_dataset(const std::filesystem::path& hr_dir, const AcquisitionConfig& cfg_in,
                                              const std::filesystem::path& out_dir, const DatasetOptions& opts,
                                              std::uint64_t seed) {
    const auto files = list_rasters(hr_dir);
    if (files.empty()) throw DataError("no .ras images in " + hr_dir.string());
    AcquisitionConfig cfg = cfg_in;
    cfg.seed = seed;

    std::filesystem::create_directories(out_dir / "lr");
    std::filesystem::create_directories(out_dir / "hr");

    nlohmann::json pairs = nlohmann::json::array();
    nlohmann::json warnings = nlohmann::json::array();
    std::vector<SplitItem> scenes;
    int skipped = 0;
    for (std::size_t i = 0; i < files.size(); ++i) {
        const auto& path = files[i];
        const std::string stem = path.stem().string();
        Raster hr;
        try {
            hr = read_raster(path);
            if (hr.height % 2 != 0 || hr.width % 2 != 0) throw DataError("odd dimensions");
        } catch (const DataError& e) {
            ++skipped;
            warnings.push_back("skipped " + path.filename().string() + ": " + e.what());
            std::cerr << "warning: skipped " << path << ": " << e.what() << "\n";
            continue;
        }
        // Separate streams so crops and noise do not depend on the shift mode:
        // every config of one seed sees the same crop placement.
        Rng shift_rng = Rng::derive(seed, 3 * i);
        Rng noise_rng = Rng::derive(seed, 3 * i + 1);
        Rng crop_rng = Rng::derive(seed, 3 * i + 2);
        const BandShiftTable table = make_shift_table(cfg.shift_mode, shift_rng, hr.bands);
        const Raster lr = simulate_lr(hr, cfg, table, noise_rng);

        const int m = opts.margin;
        if (lr.height - 2 * m < opts.crop || lr.width - 2 * m < opts.crop) {
            ++skipped;
            warnings.push_back("skipped " + path.filename().string() + ": too small for crop");
            continue;
        }
        const Raster lr_in = window(lr, m, m, lr.height - 2 * m, lr.width - 2 * m);
        const Raster hr_in = window(hr, 2 * m, 2 * m, hr.height - 4 * m, hr.width - 4 * m);
        const auto crops = extract_crops(lr_in, hr_in, opts.crop, opts.max_crops, crop_rng);
        for (std::size_t k = 0; k < crops.size(); ++k) {
            const std::string name = stem + "_" + std::to_string(k) + ".ras";
            write_raster(crops[k].lr, out_dir / "lr" / name);
            write_raster(crops[k].hr, out_dir / "hr" / name);
            pairs.push_back({{"lr_path", "lr/" + name},
                             {"hr_path", "hr/" + name},
                             {"source_image", path.filename().string()},
                             {"scene_id", scene_of(stem)},
                             {"crop_origin", {crops[k].spec.row0 + m, crops[k].spec.col0 + m}},
                             {"shift_table", shift_table_json(table)}});
            scenes.push_back({scene_of(stem)});
        }
    }
    if (pairs.empty()) throw DataError("no usable images in " + hr_dir.string());

    std::vector<Split> assignment;
    Rng split_rng = Rng::derive(seed, 0x5EEDULL << 32U);
    try {
        assignment = assemble_splits(scenes, opts.test_fraction, opts.val_fraction, split_rng);
    } catch (const DataError& e) {
        warnings.push_back(std::string("splits: ") + e.what() + "; all pairs assigned to train");
        assignment.assign(scenes.size(), Split::Train);
    }
    for (std::size_t k = 0; k < pairs.size(); ++k) pairs[k]["split"] = to_string(assignment[k]);

    nlohmann::json manifest = {
        {"config", cfg.id()},
        {"config_params",
         {{"alias", cfg.alias},
          {"shift_mode", to_string(cfg.shift_mode)},
          {"sigma_alias", cfg.sigma_alias},
          {"sigma_noalias", cfg.sigma_noalias},
          {"noise_level", cfg.noise_level}}},
        {"seed", seed},
        {"crop", opts.crop},
        {"max_crops", opts.max_crops},
        {"margin", opts.margin},
        {"pairs", pairs},
        {"skipped", skipped},
        {"warnings", warnings},
    };
    write_file_bytes(out_dir / "manifest.json", manifest.dump(2) + "\n");
    return manifest;
}

}  // namespace s2sr
