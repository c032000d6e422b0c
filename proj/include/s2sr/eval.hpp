#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"

#include "s2sr/dataset.hpp"
#include "s2sr/error.hpp"
#include "s2sr/nn/checkpoint.hpp"
#include "s2sr/nn/model.hpp"
#include "s2sr/raster.hpp"

namespace s2sr {

/// 10*log10(peak^2 / MSE), one MSE over all bands. Identical inputs give +inf.
inline double psnr(const Raster& pred, const Raster& ref, double peak = kPeakDN) {
    if (pred.bands != ref.bands || pred.height != ref.height || pred.width != ref.width)
        throw DataError("psnr: shape mismatch");
    if (pred.data.empty()) throw DataError("psnr: empty raster");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double d = static_cast<double>(pred.data[i]) - static_cast<double>(ref.data[i]);
        acc += d * d;
    }
    const double mse = acc / static_cast<double>(pred.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

/// JSON value for a dB figure: "inf" for the sentinel, null for NaN.
inline nlohmann::json db_json(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return nullptr;
    return v;
}

inline double db_from_json(const nlohmann::json& j) {
    if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        throw DataError("bad dB value '" + s + "'");
    }
    return j.get<double>();
}

inline std::string format_db(double v, int precision = 2) {
    if (std::isnan(v)) return "n/a";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

struct TileOptions {
    int tile = 64;     // LR pixels
    int overlap = 8;   // LR pixels, >= 8
    int halo = 8;      // extra LR context around each tile, cropped before blending
};

namespace detail {

inline std::vector<int> tile_starts(int n, int t, int overlap) {
    std::vector<int> s;
    for (int p = 0;; p = std::min(p + t - overlap, n - t)) {
        s.push_back(p);
        if (p + t >= n) break;
    }
    return s;
}

// Feather weight at HR offset u inside a tile of HR length len. The outer
// quarter of the overlap on an interior edge is discarded; the middle half
// ramps linearly.
inline double feather(int u, int len, int hr_overlap, bool left_open, bool right_open) {
    const double q = hr_overlap / 4.0;
    const double span = hr_overlap / 2.0;
    double w = 1.0;
    if (left_open) w *= std::clamp((u - q + 0.5) / span, 0.0, 1.0);
    if (right_open) w *= std::clamp((len - 1 - u - q + 0.5) / span, 0.0, 1.0);
    return w;
}

}  // namespace detail

/// Super-resolves a scene in DN. Scenes that fit in one tile go straight
/// through the model; larger ones are split into overlapping tiles whose
/// learned residuals are feather-blended, then the global bicubic skip is
/// added once. Each tile sees halo extra pixels of context so the zero
/// padding of its convolutions stays out of the kept region.
inline Raster infer(const nn::ModelParams<float>& params, const Raster& lr, const TileOptions& opt = {}) {
    if (opt.overlap < 8) throw UsageError("tile overlap must be at least 8 pixels");
    if (opt.tile <= opt.overlap) throw UsageError("tile must be larger than the overlap");
    if (opt.halo < 0) throw UsageError("tile halo must be non-negative");
    if (lr.bands != params.spec.in_bands)
        throw DataError("checkpoint expects " + std::to_string(params.spec.in_bands) + " bands, scene has " + std::to_string(lr.bands));
    const auto x = nn::batch_from_rasters<float>({&lr});
    const int th = std::min(opt.tile, lr.height);
    const int tw = std::min(opt.tile, lr.width);
    if (th == lr.height && tw == lr.width) return nn::raster_from_batch(*nn::model_forward(x, params), 0);

    const int H = 2 * lr.height;
    const int W = 2 * lr.width;
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    std::vector<double> acc(plane * lr.bands, 0.0);
    std::vector<double> wsum(plane, 0.0);
    const auto rows = detail::tile_starts(lr.height, th, opt.overlap);
    const auto cols = detail::tile_starts(lr.width, tw, opt.overlap);
    const int hov = 2 * opt.overlap;
    for (int r0 : rows)
        for (int c0 : cols) {
            // Compute on the tile plus its halo, keep the tile.
            const int er0 = std::max(0, r0 - opt.halo);
            const int ec0 = std::max(0, c0 - opt.halo);
            const int eh = std::min(lr.height, r0 + th + opt.halo) - er0;
            const int ew = std::min(lr.width, c0 + tw + opt.halo) - ec0;
            const Raster sub = window(lr, er0, ec0, eh, ew);
            const auto res = nn::model_residual(nn::batch_from_rasters<float>({&sub}), params);
            const int ou = 2 * (r0 - er0);
            const int ov = 2 * (c0 - ec0);
            const bool top = r0 > 0;
            const bool bottom = r0 + th < lr.height;
            const bool left = c0 > 0;
            const bool right = c0 + tw < lr.width;
            for (int u = 0; u < 2 * th; ++u) {
                const double wr = detail::feather(u, 2 * th, hov, top, bottom);
                if (wr == 0.0) continue;
                for (int v = 0; v < 2 * tw; ++v) {
                    const double w = wr * detail::feather(v, 2 * tw, hov, left, right);
                    if (w == 0.0) continue;
                    const std::size_t o = static_cast<std::size_t>(2 * r0 + u) * W + (2 * c0 + v);
                    wsum[o] += w;
                    for (int b = 0; b < lr.bands; ++b)
                        acc[b * plane + o] += w * res->value[(static_cast<std::size_t>(b) * 2 * eh + ou + u) * 2 * ew + ov + v];
                }
            }
        }
    const auto bic = nn::bicubic_up2(x);
    Raster out(lr.bands, H, W);
    for (int b = 0; b < lr.bands; ++b)
        for (std::size_t o = 0; o < plane; ++o) {
            const float r = static_cast<float>(acc[b * plane + o] / wsum[o]);
            out.data[b * plane + o] = static_cast<float>(static_cast<double>(r + bic->value[b * plane + o]) * kPeakDN);
        }
    return out;
}

struct PairScore {
    std::string lr_path;
    double psnr = 0.0;
    double bicubic_psnr = 0.0;
};

struct SplitScores {
    std::string split;
    double mean_psnr = std::numeric_limits<double>::quiet_NaN();
    double mean_bicubic = std::numeric_limits<double>::quiet_NaN();
    std::vector<PairScore> pairs;
};

/// Per-split PSNR of one checkpoint on one dataset. runtime_seconds is kept
/// out of to_json so reports are byte-identical across reruns.
struct EvalReport {
    std::string config;
    std::string checkpoint_hash;
    std::string checkpoint;
    std::string manifest;
    std::vector<SplitScores> splits;
    double runtime_seconds = 0.0;

    [[nodiscard]] const SplitScores* find(const std::string& split) const {
        for (const auto& s : splits)
            if (s.split == split) return &s;
        return nullptr;
    }
    [[nodiscard]] double mean(const std::string& split) const {
        const auto* s = find(split);
        return s ? s->mean_psnr : std::numeric_limits<double>::quiet_NaN();
    }
};

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json splits = nlohmann::json::object();
    for (const auto& s : r.splits) {
        nlohmann::json pairs = nlohmann::json::array();
        for (const auto& p : s.pairs) pairs.push_back({{"lr_path", p.lr_path}, {"psnr", db_json(p.psnr)}, {"bicubic_psnr", db_json(p.bicubic_psnr)}});
        splits[s.split] = {{"mean_psnr", db_json(s.mean_psnr)}, {"mean_bicubic_psnr", db_json(s.mean_bicubic)},
                           {"count", s.pairs.size()}, {"pairs", pairs}};
    }
    return {{"config", r.config}, {"checkpoint", r.checkpoint}, {"checkpoint_hash", r.checkpoint_hash},
            {"manifest", r.manifest}, {"splits", splits}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport r;
    try {
        r.config = j.at("config").get<std::string>();
        r.checkpoint = j.value("checkpoint", std::string());
        r.checkpoint_hash = j.value("checkpoint_hash", std::string());
        r.manifest = j.value("manifest", std::string());
        for (const auto& [name, s] : j.at("splits").items()) {
            SplitScores sc;
            sc.split = name;
            sc.mean_psnr = db_from_json(s.at("mean_psnr"));
            sc.mean_bicubic = db_from_json(s.at("mean_bicubic_psnr"));
            for (const auto& p : s.at("pairs"))
                sc.pairs.push_back({p.at("lr_path").get<std::string>(), db_from_json(p.at("psnr")), db_from_json(p.at("bicubic_psnr"))});
            r.splits.push_back(std::move(sc));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("bad report: ") + e.what());
    }
    return r;
}

inline const std::vector<std::string>& standard_splits() {
    static const std::vector<std::string> s{"test", "train", "val"};
    return s;
}

/// Scores the given splits of a manifest. Split names outside train/val/test
/// are a usage error; "all" expands to the three.
inline EvalReport evaluate(const nn::ModelParams<float>& params, const Manifest& manifest, std::vector<std::string> splits,
                           const TileOptions& tiles = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    if (splits.size() == 1 && splits[0] == "all") splits = standard_splits();
    for (const auto& s : splits)
        if (std::find(standard_splits().begin(), standard_splits().end(), s) == standard_splits().end())
            throw UsageError("unknown split '" + s + "'");
    const auto model = params.frozen();
    EvalReport rep;
    rep.config = manifest.config();
    for (const auto& split : splits) {
        SplitScores sc;
        sc.split = split;
        std::vector<double> ps;
        std::vector<double> pb;
        for (const auto& p : load_pairs(manifest, split)) {
            const Raster sr = infer(model, p.lr, tiles);
            const Raster bic = nn::bicubic_upsample(p.lr);
            sc.pairs.push_back({p.lr_path, psnr(sr, p.hr), psnr(bic, p.hr)});
            ps.push_back(sc.pairs.back().psnr);
            pb.push_back(sc.pairs.back().bicubic_psnr);
        }
        sc.mean_psnr = mean_of(ps);
        sc.mean_bicubic = mean_of(pb);
        rep.splits.push_back(std::move(sc));
    }
    rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

inline EvalReport evaluate_checkpoint(const std::filesystem::path& ckpt, const std::filesystem::path& manifest_path,
                                      const std::vector<std::string>& splits, const TileOptions& tiles = {}) {
    const std::string bytes = read_file_bytes(ckpt);
    const auto ck = nn::decode_checkpoint(bytes);
    EvalReport rep = evaluate(ck.params, load_manifest(manifest_path), splits, tiles);
    rep.checkpoint = ckpt.string();
    rep.checkpoint_hash = nn::fnv1a_hex(bytes);
    rep.manifest = manifest_path.string();
    return rep;
}

namespace detail {

inline std::string relative_to(const std::string& p, const std::filesystem::path& dir) {
    if (p.empty()) return p;
    const auto base = std::filesystem::absolute(dir.empty() ? std::filesystem::path(".") : dir);
    return std::filesystem::absolute(p).lexically_normal().lexically_relative(base.lexically_normal()).generic_string();
}

}  // namespace detail

/// Writes the report and a runtime sidecar (<path>.runtime.json). Checkpoint
/// and manifest paths are stored relative to the report's directory.
inline void write_report(const EvalReport& r, const std::filesystem::path& path) {
    EvalReport rel = r;
    rel.checkpoint = detail::relative_to(r.checkpoint, path.parent_path());
    rel.manifest = detail::relative_to(r.manifest, path.parent_path());
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    write_file_bytes(path, to_json(rel).dump(2) + "\n");
    write_file_bytes(path.string() + ".runtime.json", nlohmann::json{{"runtime_seconds", r.runtime_seconds}}.dump() + "\n");
}

inline EvalReport read_report(const std::filesystem::path& path) {
    try {
        EvalReport r = report_from_json(nlohmann::json::parse(read_file_bytes(path)));
        if (!r.checkpoint.empty()) r.checkpoint = (path.parent_path() / r.checkpoint).string();
        if (!r.manifest.empty()) r.manifest = (path.parent_path() / r.manifest).string();
        return r;
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError("bad report " + path.string() + ": " + e.what());
    }
}

}  // namespace s2sr
