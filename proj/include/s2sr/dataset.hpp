#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "s2sr/error.hpp"
#include "s2sr/raster.hpp"
#include "s2sr/raster_io.hpp"

namespace s2sr {

struct ManifestEntry {
    std::string lr_path;  // relative to the manifest directory
    std::string hr_path;
    std::string split;
    std::string scene_id;
};

struct Manifest {
    std::filesystem::path root;
    nlohmann::json doc;
    std::vector<ManifestEntry> entries;

    [[nodiscard]] std::string config() const { return doc.value("config", std::string("unknown")); }
};

inline Manifest load_manifest(const std::filesystem::path& path) {
    Manifest m;
    m.root = path.parent_path();
    try {
        m.doc = nlohmann::json::parse(read_file_bytes(path));
        for (const auto& p : m.doc.at("pairs")) {
            ManifestEntry e;
            e.lr_path = p.at("lr_path").get<std::string>();
            e.hr_path = p.at("hr_path").get<std::string>();
            e.split = p.value("split", std::string("train"));
            e.scene_id = p.value("scene_id", p.value("source_image", std::string()));
            m.entries.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad manifest " + path.string() + ": " + e.what());
    }
    return m;
}

struct LoadedPair {
    std::string lr_path;
    Raster lr;
    Raster hr;
};

/// Loads the pairs of one split (all pairs when split is empty), optionally
/// keeping a single band.
inline std::vector<LoadedPair> load_pairs(const Manifest& m, const std::string& split, std::optional<int> band = std::nullopt) {
    std::vector<LoadedPair> out;
    for (const auto& e : m.entries) {
        if (!split.empty() && e.split != split) continue;
        LoadedPair p{e.lr_path, read_raster(m.root / e.lr_path), read_raster(m.root / e.hr_path)};
        if (p.hr.height != 2 * p.lr.height || p.hr.width != 2 * p.lr.width || p.hr.bands != p.lr.bands)
            throw DataError("pair " + e.lr_path + " is not a consistent x2 pair");
        if (band) {
            const int b[1] = {*band};
            p.lr = select_bands(p.lr, b);
            p.hr = select_bands(p.hr, b);
        }
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace s2sr
