#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "s2sr/error.hpp"

namespace s2sr {

/// Nominal peak of the 12-bit DN scale every raster lives on.
inline constexpr float kPeakDN = 4095.0F;

/// Single band, row-major.
struct Plane {
    int height = 0;
    int width = 0;
    std::vector<float> data;

    Plane() = default;
    Plane(int h, int w, float fill = 0.0F)
        : height(h), width(w), data(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {
        if (h < 0 || w < 0) throw DataError("negative plane dimensions");
    }

    [[nodiscard]] std::size_t size() const { return data.size(); }
    [[nodiscard]] float& at(int r, int c) { return data[static_cast<std::size_t>(r) * width + c]; }
    [[nodiscard]] float at(int r, int c) const { return data[static_cast<std::size_t>(r) * width + c]; }
};

/// Multi-band image in planar band-major order (band, row, col).
struct Raster {
    int bands = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;

    Raster() = default;
    Raster(int b, int h, int w, float fill = 0.0F) : bands(b), height(h), width(w) {
        if (b < 1 || h < 0 || w < 0) throw DataError("invalid raster dimensions");
        data.assign(static_cast<std::size_t>(b) * h * w, fill);
    }

    [[nodiscard]] std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
    [[nodiscard]] float& at(int b, int r, int c) {
        return data[static_cast<std::size_t>(b) * plane_size() + static_cast<std::size_t>(r) * width + c];
    }
    [[nodiscard]] float at(int b, int r, int c) const {
        return data[static_cast<std::size_t>(b) * plane_size() + static_cast<std::size_t>(r) * width + c];
    }
    [[nodiscard]] std::span<const float> band_view(int b) const {
        return {data.data() + static_cast<std::size_t>(b) * plane_size(), plane_size()};
    }

    [[nodiscard]] Plane band(int b) const {
        Plane p(height, width);
        auto v = band_view(b);
        std::copy(v.begin(), v.end(), p.data.begin());
        return p;
    }

    void set_band(int b, const Plane& p) {
        if (p.height != height || p.width != width) throw DataError("band dimensions do not match raster");
        std::copy(p.data.begin(), p.data.end(), data.begin() + static_cast<std::ptrdiff_t>(b * plane_size()));
    }

    [[nodiscard]] bool all_finite() const {
        return std::all_of(data.begin(), data.end(), [](float v) { return std::isfinite(v); });
    }

    bool operator==(const Raster&) const = default;
};

inline Raster from_bands(const std::vector<Plane>& planes) {
    if (planes.empty()) throw DataError("no bands");
    Raster r(static_cast<int>(planes.size()), planes[0].height, planes[0].width);
    for (int b = 0; b < r.bands; ++b) r.set_band(b, planes[static_cast<std::size_t>(b)]);
    return r;
}

/// Copies a sub-window; the window must lie inside the raster.
inline Raster window(const Raster& src, int row0, int col0, int h, int w) {
    if (row0 < 0 || col0 < 0 || row0 + h > src.height || col0 + w > src.width)
        throw DataError("window out of bounds");
    Raster out(src.bands, h, w);
    for (int b = 0; b < src.bands; ++b)
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) out.at(b, r, c) = src.at(b, row0 + r, col0 + c);
    return out;
}

/// Keeps the listed bands, in order.
inline Raster select_bands(const Raster& src, std::span<const int> which) {
    std::vector<Plane> planes;
    planes.reserve(which.size());
    for (int b : which) {
        if (b < 0 || b >= src.bands) throw DataError("band index out of range");
        planes.push_back(src.band(b));
    }
    return from_bands(planes);
}

/// Seedable, portable generator. mt19937_64's output sequence is fixed by the
/// standard; the distributions on top of it are implemented here because the
/// std:: distributions are not reproducible across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

    [[nodiscard]] std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11U) * 0x1.0p-53; }

    /// Uniform integer in [0, n) by rejection; n must be positive.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % n;
    }

    int sign() { return (engine_() >> 63U) != 0U ? 1 : -1; }

    /// Standard normal via Box-Muller; the second variate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.14159265358979323846 * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Independent child stream, for handing to a worker.
    /// Independent child stream; splitmix64 keeps (seed, index) pairs apart.
    [[nodiscard]] static Rng derive(std::uint64_t seed, std::uint64_t index) {
        std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
        z = (z ^ (z >> 30U)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27U)) * 0x94D049BB133111EBULL;
        return Rng(z ^ (z >> 31U));
    }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

struct CropSpec {
    int row0 = 0;
    int col0 = 0;
    int size = 0;
    bool operator==(const CropSpec&) const = default;
};

struct CropPair {
    CropSpec spec;
    Raster lr;
    Raster hr;
};

/// Samples up to max_crops distinct origins (without replacement) from the grid
/// of all valid LR placements; each HR crop is the 2x footprint of its LR crop.
inline std::vector<CropPair> extract_crops(const Raster& lr, const Raster& hr, int size, int max_crops, Rng& rng) {
    if (hr.height != 2 * lr.height || hr.width != 2 * lr.width)
        throw DataError("HR dimensions must be exactly 2x the LR dimensions");
    if (hr.bands != lr.bands) throw DataError("LR/HR band count mismatch");
    if (size <= 0 || size > std::min(lr.height, lr.width)) throw DataError("crop size does not fit the LR image");
    const int rows = lr.height - size + 1;
    const int cols = lr.width - size + 1;
    std::vector<CropSpec> origins;
    origins.reserve(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) origins.push_back({r, c, size});
    rng.shuffle(origins);
    if (static_cast<int>(origins.size()) > max_crops) origins.resize(static_cast<std::size_t>(std::max(max_crops, 0)));

    std::vector<CropPair> out;
    out.reserve(origins.size());
    for (const auto& o : origins)
        out.push_back({o, window(lr, o.row0, o.col0, size, size), window(hr, 2 * o.row0, 2 * o.col0, 2 * size, 2 * size)});
    return out;
}

}  // namespace s2sr
