#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "s2sr/error.hpp"
#include "s2sr/fft.hpp"
#include "s2sr/raster.hpp"

namespace s2sr {

/// Odd-length symmetric filter with unit DC gain.
struct Kernel1D {
    std::vector<double> taps;
    double sigma = 0.0;

    [[nodiscard]] int radius() const { return static_cast<int>(taps.size() / 2); }
};

inline Kernel1D gaussian_kernel(double sigma) {
    if (!(sigma >= 0.0)) throw DataError("negative sigma");
    Kernel1D k;
    k.sigma = sigma;
    if (sigma == 0.0) {
        k.taps = {1.0};
        return k;
    }
    const int radius = static_cast<int>(std::ceil(4.0 * sigma));
    k.taps.resize(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
        k.taps[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (auto& t : k.taps) t /= sum;
    return k;
}

/// Whole-sample symmetric reflection (d c b | a b c d | c b a).
inline int mirror_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

namespace detail {

inline void require_finite(const Plane& p) {
    if (!std::all_of(p.data.begin(), p.data.end(), [](float v) { return std::isfinite(v); }))
        throw DataError("non-finite input");
}

}  // namespace detail

/// Separable convolution, rows then columns, mirror boundary.
inline Plane blur(const Plane& band, const Kernel1D& k) {
    detail::require_finite(band);
    const int h = band.height;
    const int w = band.width;
    const int rad = k.radius();
    std::vector<double> tmp(band.size());
    std::vector<double> line;
    for (int r = 0; r < h; ++r) {
        line.assign(static_cast<std::size_t>(w + 2 * rad), 0.0);
        for (int c = -rad; c < w + rad; ++c) line[static_cast<std::size_t>(c + rad)] = band.at(r, mirror_index(c, w));
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int t = 0; t <= 2 * rad; ++t) acc += k.taps[static_cast<std::size_t>(t)] * line[static_cast<std::size_t>(c + t)];
            tmp[static_cast<std::size_t>(r) * w + c] = acc;
        }
    }
    Plane out(h, w);
    for (int c = 0; c < w; ++c) {
        line.assign(static_cast<std::size_t>(h + 2 * rad), 0.0);
        for (int r = -rad; r < h + rad; ++r) line[static_cast<std::size_t>(r + rad)] = tmp[static_cast<std::size_t>(mirror_index(r, h)) * w + c];
        for (int r = 0; r < h; ++r) {
            double acc = 0.0;
            for (int t = 0; t <= 2 * rad; ++t) acc += k.taps[static_cast<std::size_t>(t)] * line[static_cast<std::size_t>(r + t)];
            out.at(r, c) = static_cast<float>(acc);
        }
    }
    return out;
}

/// out(i, j) = in(2i + phase_row, 2j + phase_col).
inline Plane decimate2(const Plane& band, int phase_row, int phase_col) {
    if (band.height % 2 != 0 || band.width % 2 != 0) throw DataError("decimate2 needs even dimensions");
    if ((phase_row | phase_col) & ~1) throw DataError("decimation phase must be 0 or 1");
    Plane out(band.height / 2, band.width / 2);
    for (int r = 0; r < out.height; ++r)
        for (int c = 0; c < out.width; ++c) out.at(r, c) = band.at(2 * r + phase_row, 2 * c + phase_col);
    return out;
}

/// out(i, j) = in(i - dr, j - dc), edge-replicated outside the domain.
inline Plane shift_integer(const Plane& band, int dr, int dc) {
    Plane out(band.height, band.width);
    for (int r = 0; r < band.height; ++r) {
        const int sr = std::clamp(r - dr, 0, band.height - 1);
        for (int c = 0; c < band.width; ++c) out.at(r, c) = band.at(sr, std::clamp(c - dc, 0, band.width - 1));
    }
    return out;
}

namespace detail {

inline constexpr double kBsplinePole = -0.26794919243112270;  // sqrt(3) - 2

// Cubic B-spline interpolation coefficients for one line (mirror boundary).
inline void bspline_prefilter(std::vector<double>& s) {
    const auto n = static_cast<int>(s.size());
    if (n < 2) return;
    const double z = kBsplinePole;
    const double gain = (1.0 - z) * (1.0 - 1.0 / z);
    for (auto& v : s) v *= gain;

    // Causal initialization, truncated once z^k drops below double precision.
    const int horizon = std::min(n, static_cast<int>(std::ceil(std::log(1e-16) / std::log(std::abs(z)))));
    double zk = z;
    double sum = s[0];
    for (int k = 1; k < horizon; ++k) {
        sum += zk * s[static_cast<std::size_t>(k)];
        zk *= z;
    }
    if (horizon == n) {
        // Exact mirror-symmetric sum for short lines.
        const double zn = std::pow(z, n - 1);
        const double iz = 1.0 / z;
        sum = s[0] + zn * s[static_cast<std::size_t>(n - 1)];
        double za = z;
        double zb = zn * zn * iz;
        for (int k = 1; k < n - 1; ++k) {
            sum += (za + zb) * s[static_cast<std::size_t>(k)];
            za *= z;
            zb *= iz;
        }
        sum /= (1.0 - zn * zn);
    }
    s[0] = sum;
    for (int k = 1; k < n; ++k) s[static_cast<std::size_t>(k)] += z * s[static_cast<std::size_t>(k - 1)];
    s[static_cast<std::size_t>(n - 1)] =
        (z / (z * z - 1.0)) * (s[static_cast<std::size_t>(n - 1)] + z * s[static_cast<std::size_t>(n - 2)]);
    for (int k = n - 2; k >= 0; --k)
        s[static_cast<std::size_t>(k)] = z * (s[static_cast<std::size_t>(k + 1)] - s[static_cast<std::size_t>(k)]);
}

inline double bspline3(double x) {
    x = std::abs(x);
    if (x < 1.0) return 2.0 / 3.0 - x * x + 0.5 * x * x * x;
    if (x < 2.0) {
        const double t = 2.0 - x;
        return t * t * t / 6.0;
    }
    return 0.0;
}

// Resamples one line at positions i - shift; positions outside [0, n-1] give 0.
inline void bspline_shift_line(const std::vector<double>& coeffs, double shift, std::vector<double>& out) {
    const auto n = static_cast<int>(coeffs.size());
    out.assign(coeffs.size(), 0.0);
    constexpr double eps = 1e-9;
    for (int i = 0; i < n; ++i) {
        const double x = static_cast<double>(i) - shift;
        if (x < -eps || x > static_cast<double>(n - 1) + eps) continue;
        if (n == 1) {
            out[static_cast<std::size_t>(i)] = coeffs[0];
            continue;
        }
        const int base = static_cast<int>(std::floor(x));
        double acc = 0.0;
        for (int k = base - 1; k <= base + 2; ++k)
            acc += coeffs[static_cast<std::size_t>(mirror_index(k, n))] * bspline3(x - static_cast<double>(k));
        out[static_cast<std::size_t>(i)] = acc;
    }
}

}  // namespace detail

/// Cubic B-spline translation: out(i, j) = f(i - dr, j - dc), zero where the
/// source location falls outside the input grid.
inline Plane spline_shift(const Plane& band, double dr, double dc) {
    detail::require_finite(band);
    const int h = band.height;
    const int w = band.width;
    std::vector<double> work(band.size());
    std::vector<double> line;
    std::vector<double> shifted;
    for (int r = 0; r < h; ++r) {
        line.assign(band.data.begin() + static_cast<std::ptrdiff_t>(r) * w, band.data.begin() + static_cast<std::ptrdiff_t>(r + 1) * w);
        detail::bspline_prefilter(line);
        detail::bspline_shift_line(line, dc, shifted);
        std::copy(shifted.begin(), shifted.end(), work.begin() + static_cast<std::ptrdiff_t>(r) * w);
    }
    Plane out(h, w);
    line.resize(static_cast<std::size_t>(h));
    for (int c = 0; c < w; ++c) {
        for (int r = 0; r < h; ++r) line[static_cast<std::size_t>(r)] = work[static_cast<std::size_t>(r) * w + c];
        detail::bspline_prefilter(line);
        detail::bspline_shift_line(line, dr, shifted);
        for (int r = 0; r < h; ++r) out.at(r, c) = static_cast<float>(shifted[static_cast<std::size_t>(r)]);
    }
    return out;
}

/// Additive i.i.d. Gaussian noise with std level * 4095.
inline Plane add_noise(const Plane& band, double level, Rng& rng) {
    if (!(level >= 0.0)) throw DataError("negative noise level");
    Plane out = band;
    if (level == 0.0) return out;
    const double sd = level * kPeakDN;
    for (auto& v : out.data) v = static_cast<float>(static_cast<double>(v) + sd * rng.normal());
    return out;
}

/// Signed frequency in cycles/sample for DFT bin k of n.
inline double dft_frequency(int k, int n) {
    return static_cast<double>(k <= n / 2 ? k : k - n) / static_cast<double>(n);
}

/// Share of non-DC spectral energy at frequencies that fold under a factor-2
/// decimation: max(|fy|, |fx|) > 0.25 cycles/px on this grid.
inline double alias_energy_ratio(const Plane& band) {
    detail::require_finite(band);
    const Spectrum s = fft2(band);
    double total = 0.0;
    double high = 0.0;
    for (int r = 0; r < s.height; ++r) {
        const double fr = std::abs(dft_frequency(r, s.height));
        for (int c = 0; c < s.width; ++c) {
            if (r == 0 && c == 0) continue;
            const double e = std::norm(s.at(r, c));
            total += e;
            if (fr > 0.25 || std::abs(dft_frequency(c, s.width)) > 0.25) high += e;
        }
    }
    // Constant-band energy below this is rounding noise.
    if (total <= 1e-12 * (1.0 + std::norm(s.at(0, 0)))) return 0.0;
    return high / total;
}

}  // namespace s2sr
