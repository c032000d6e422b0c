#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "s2sr/error.hpp"
#include "s2sr/fft.hpp"
#include "s2sr/raster.hpp"
#include "s2sr/raster_io.hpp"
#include "s2sr/signal.hpp"

namespace s2sr {

// ---------------------------------------------------------------------------
// Radiometric equalization

struct EqualizationCoeffs {
    std::vector<double> gain;
    std::vector<double> offset;
};

namespace detail {

inline std::pair<double, double> mean_std(std::span<const float> v) {
    double mean = 0.0;
    for (float x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (float x : v) var += (x - mean) * (x - mean);
    return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}

}  // namespace detail

/// Maps each band of src onto the per-band mean and standard deviation of ref.
/// A flat src band (std < 1e-9) is only offset.
inline std::pair<Raster, EqualizationCoeffs> equalize(const Raster& src, const Raster& ref) {
    if (src.bands != ref.bands) throw DataError("equalize: band count mismatch");
    if (src.plane_size() == 0 || ref.plane_size() == 0) throw DataError("equalize: empty raster");
    EqualizationCoeffs eq;
    Raster out = src;
    for (int b = 0; b < src.bands; ++b) {
        const auto [ms, ss] = detail::mean_std(src.band_view(b));
        const auto [mr, sr] = detail::mean_std(ref.band_view(b));
        const double gain = ss < 1e-9 ? 1.0 : sr / ss;
        const double offset = mr - gain * ms;
        eq.gain.push_back(gain);
        eq.offset.push_back(offset);
        const std::size_t base = static_cast<std::size_t>(b) * src.plane_size();
        for (std::size_t i = 0; i < src.plane_size(); ++i)
            out.data[base + i] = static_cast<float>(gain * src.data[base + i] + offset);
    }
    return {std::move(out), std::move(eq)};
}

// ---------------------------------------------------------------------------
// Phase correlation

struct RegistrationResult {
    double dr = 0.0;
    double dc = 0.0;
    double score = 0.0;
};

/// Periodic Hann window, separable.
inline Plane hann_windowed(const Plane& p) {
    Plane out = p;
    auto w = [](int i, int n) { return n <= 1 ? 1.0 : 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n); };
    for (int r = 0; r < p.height; ++r) {
        const double wr = w(r, p.height);
        for (int c = 0; c < p.width; ++c) out.at(r, c) = static_cast<float>(p.at(r, c) * wr * w(c, p.width));
    }
    return out;
}

namespace detail {

inline Spectrum windowed_spectrum(const Plane& p) {
    const auto [mean, sd] = mean_std(p.data);
    if (sd < 1e-9) throw DataError("phase_correlate: zero-variance input");
    Plane centered = p;
    for (auto& v : centered.data) v = static_cast<float>(v - mean);
    return fft2(hann_windowed(centered));
}

// Gaussian weight (cycles/px) on the normalized cross-power spectrum. A flat
// spectrum gives a Dirichlet-shaped peak that a parabola fits with up to
// ~0.2 px bias toward integer shifts; the weight makes the peak near-Gaussian.
inline constexpr double kCrossPowerSigma = 0.25;

// Correlation surface of the normalized, Gaussian-weighted cross-power spectrum.
inline Spectrum phase_surface(const Spectrum& fa, const Spectrum& fb) {
    Spectrum cross(fa.height, fa.width);
    for (int r = 0; r < cross.height; ++r) {
        const double fy = dft_frequency(r, cross.height);
        for (int c = 0; c < cross.width; ++c) {
            const double fx = dft_frequency(c, cross.width);
            const double wt = std::exp(-(fy * fy + fx * fx) / (2.0 * kCrossPowerSigma * kCrossPowerSigma));
            const Complex v = fa.at(r, c) * std::conj(fb.at(r, c));
            const double mag = std::abs(v);
            cross.at(r, c) = mag > 1e-20 ? v * (wt / mag) : Complex(0.0, 0.0);
        }
    }
    fft2_inplace(cross, true);
    return cross;
}

inline double parabolic_offset(double ym, double y0, double yp) {
    const double denom = ym - 2.0 * y0 + yp;
    if (std::abs(denom) < 1e-15 || std::abs(ym - yp) <= 1e-12 * std::abs(y0)) return 0.0;
    return std::clamp(0.5 * (ym - yp) / denom, -0.5, 0.5);
}

}  // namespace detail

/// Estimates (dr, dc) such that b(i, j) ~ a(i - dr, j - dc). The score is the
/// correlation peak divided by the peak of a's own autocorrelation, so
/// phase_correlate(x, x) scores 1.
inline RegistrationResult phase_correlate(const Plane& a, const Plane& b) {
    if (a.height != b.height || a.width != b.width) throw DataError("phase_correlate: size mismatch");
    const Spectrum fa = detail::windowed_spectrum(a);
    const Spectrum fb = detail::windowed_spectrum(b);
    const Spectrum surf = detail::phase_surface(fa, fb);
    const double auto_peak = detail::phase_surface(fa, fa).at(0, 0).real();

    const int h = surf.height;
    const int w = surf.width;
    int pr = 0;
    int pc = 0;
    double best = -1e300;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            if (surf.at(r, c).real() > best) {
                best = surf.at(r, c).real();
                pr = r;
                pc = c;
            }
    auto val = [&](int r, int c) { return surf.at((r % h + h) % h, (c % w + w) % w).real(); };
    const double sub_r = h > 2 ? detail::parabolic_offset(val(pr - 1, pc), best, val(pr + 1, pc)) : 0.0;
    const double sub_c = w > 2 ? detail::parabolic_offset(val(pr, pc - 1), best, val(pr, pc + 1)) : 0.0;

    // The peak sits at -shift (mod size); pick the smallest-magnitude representative.
    auto unwrap = [](double p, int n) {
        double s = -p;
        while (s > n / 2.0) s -= n;
        while (s <= -n / 2.0) s += n;
        return s;
    };
    RegistrationResult res;
    res.dr = unwrap(pr + sub_r, h);
    res.dc = unwrap(pc + sub_c, w);
    res.score = auto_peak > 0.0 ? std::clamp(best / auto_peak, 0.0, 1.0) : 0.0;
    return res;
}

inline int registration_band(const Raster& r) { return r.bands == 3 ? 1 : 0; }

/// Registers hr_resampled (on the 2x grid) to lr using the green band of its
/// 2x-decimated view, then re-samples every HR band by the HR-grid equivalent
/// of the estimated offset (zero fill at borders).
inline std::pair<Raster, RegistrationResult> register_pair(const Raster& lr, const Raster& hr_resampled) {
    if (hr_resampled.height != 2 * lr.height || hr_resampled.width != 2 * lr.width)
        throw DataError("register_pair: HR must be exactly 2x the LR grid");
    if (hr_resampled.bands != lr.bands) throw DataError("register_pair: band count mismatch");
    const int b = registration_band(lr);
    const Plane hr_view = decimate2(hr_resampled.band(b), 0, 0);
    const RegistrationResult res = phase_correlate(lr.band(b), hr_view);
    std::vector<Plane> bands;
    for (int k = 0; k < hr_resampled.bands; ++k) bands.push_back(spline_shift(hr_resampled.band(k), -2.0 * res.dr, -2.0 * res.dc));
    return {from_bands(bands), res};
}

// ---------------------------------------------------------------------------
// Filtering and splits

enum class Split { Train, Val, Test };

inline std::string to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "train";
}

inline Split parse_split(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    throw UsageError("unknown split '" + s + "'");
}

struct PairRecord {
    std::string lr_path;
    std::string hr_path;
    std::string scene_id;
    std::string date;
    RegistrationResult registration;
    EqualizationCoeffs eq;
    Split split = Split::Train;
};

inline constexpr double kDefaultScoreThreshold = 0.55;

/// Keeps records with score >= threshold (inclusive boundary).
inline std::pair<std::vector<PairRecord>, std::vector<PairRecord>> filter_pairs(const std::vector<PairRecord>& records,
                                                                                double threshold = kDefaultScoreThreshold) {
    std::vector<PairRecord> kept;
    std::vector<PairRecord> rejected;
    for (const auto& r : records) (r.registration.score >= threshold ? kept : rejected).push_back(r);
    return {kept, rejected};
}

struct SplitItem {
    std::string scene_id;
};

/// Scene-granular split: every item of a scene lands in the same split. Scene
/// counts are round(fraction * scenes), with at least one scene for any
/// positive fraction and at least one scene left for training.
inline std::vector<Split> assemble_splits(const std::vector<SplitItem>& items, double test_fraction, double val_fraction,
                                          Rng& rng) {
    if (test_fraction < 0.0 || val_fraction < 0.0 || test_fraction + val_fraction >= 1.0)
        throw UsageError("split fractions must be non-negative and sum below 1");
    std::vector<std::string> scenes;
    {
        std::set<std::string> uniq;
        for (const auto& it : items) uniq.insert(it.scene_id);
        scenes.assign(uniq.begin(), uniq.end());
    }
    const auto n = static_cast<int>(scenes.size());
    auto count = [n](double f) { return f > 0.0 ? std::max(1, static_cast<int>(std::lround(f * n))) : 0; };
    const int n_test = count(test_fraction);
    const int n_val = count(val_fraction);
    if (n_test + n_val + 1 > n)
        throw DataError("too few scenes (" + std::to_string(n) + ") for the requested splits");
    rng.shuffle(scenes);
    std::map<std::string, Split> by_scene;
    for (int i = 0; i < n; ++i)
        by_scene[scenes[static_cast<std::size_t>(i)]] = i < n_test ? Split::Test : (i < n_test + n_val ? Split::Val : Split::Train);
    std::vector<Split> out;
    out.reserve(items.size());
    for (const auto& it : items) out.push_back(by_scene.at(it.scene_id));
    return out;
}

// ---------------------------------------------------------------------------
// Pairing-list driver

inline nlohmann::json eq_json(const EqualizationCoeffs& eq) { return {{"gain", eq.gain}, {"offset", eq.offset}}; }

struct PairingSummary {
    nlohmann::json manifest;
    std::size_t kept = 0;
    std::size_t rejected = 0;
};

/// Runs equalization, registration, filtering and split assembly over a list of
/// {lr_path, hr_path, scene_id, date} entries (paths relative to the list file)
/// and writes registered pairs plus manifest.json to out_dir.
inline PairingSummary run_pairing(const std::filesystem::path& list_path, const std::filesystem::path& out_dir,
                                  double threshold, std::uint64_t seed, double test_fraction = 0.2,
                                  double val_fraction = 0.1) {
    nlohmann::json list;
    try {
        list = nlohmann::json::parse(read_file_bytes(list_path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("bad pairing list: ") + e.what());
    }
    if (!list.is_array()) throw DataError("pairing list must be a JSON array");
    const auto base = list_path.parent_path();
    std::filesystem::create_directories(out_dir / "lr");
    std::filesystem::create_directories(out_dir / "hr");

    std::vector<PairRecord> records;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& e = list[i];
        PairRecord rec;
        try {
            rec.scene_id = e.at("scene_id").get<std::string>();
            rec.date = e.value("date", "");
            const Raster lr = read_raster(base / e.at("lr_path").get<std::string>());
            const Raster hr = read_raster(base / e.at("hr_path").get<std::string>());
            auto [hr_eq, eq] = equalize(hr, lr);
            auto [hr_reg, reg] = register_pair(lr, hr_eq);
            rec.eq = std::move(eq);
            rec.registration = reg;
            const std::string name = "pair_" + std::to_string(i) + ".ras";
            rec.lr_path = "lr/" + name;
            rec.hr_path = "hr/" + name;
            write_raster(lr, out_dir / rec.lr_path);
            write_raster(hr_reg, out_dir / rec.hr_path);
        } catch (const nlohmann::json::exception& ex) {
            throw DataError("pairing list entry " + std::to_string(i) + ": " + ex.what());
        }
        records.push_back(std::move(rec));
    }

    auto [kept, rejected] = filter_pairs(records, threshold);
    std::vector<SplitItem> items;
    for (const auto& r : kept) items.push_back({r.scene_id});
    Rng rng(seed);
    const auto splits = kept.empty() ? std::vector<Split>{} : assemble_splits(items, test_fraction, val_fraction, rng);

    auto record_json = [](const PairRecord& r) {
        return nlohmann::json{{"lr_path", r.lr_path},
                              {"hr_path", r.hr_path},
                              {"source_image", r.scene_id},
                              {"scene_id", r.scene_id},
                              {"date", r.date},
                              {"score", r.registration.score},
                              {"shift", {r.registration.dr, r.registration.dc}},
                              {"eq", eq_json(r.eq)}};
    };
    nlohmann::json pairs = nlohmann::json::array();
    for (std::size_t k = 0; k < kept.size(); ++k) {
        kept[k].split = splits[k];
        auto j = record_json(kept[k]);
        j["split"] = to_string(splits[k]);
        pairs.push_back(std::move(j));
    }
    nlohmann::json rejected_json = nlohmann::json::array();
    for (const auto& r : rejected) rejected_json.push_back(record_json(r));

    PairingSummary summary;
    summary.kept = kept.size();
    summary.rejected = rejected.size();
    summary.manifest = {{"config", "paired"},
                        {"seed", seed},
                        {"threshold", threshold},
                        {"pairs", pairs},
                        {"rejected", rejected_json}};
    write_file_bytes(out_dir / "manifest.json", summary.manifest.dump(2) + "\n");
    return summary;
}

}  // namespace s2sr
