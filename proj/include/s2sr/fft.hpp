#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "s2sr/error.hpp"
#include "s2sr/raster.hpp"

namespace s2sr {

using Complex = std::complex<double>;

/// Complex 2-D array, row-major. Forward transforms are unnormalized; inverse
/// transforms divide by the element count.
struct Spectrum {
    int height = 0;
    int width = 0;
    std::vector<Complex> data;

    Spectrum() = default;
    Spectrum(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w) {}

    Complex& at(int r, int c) { return data[static_cast<std::size_t>(r) * width + c]; }
    [[nodiscard]] const Complex& at(int r, int c) const { return data[static_cast<std::size_t>(r) * width + c]; }
};

namespace detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey, in place. Sign convention exp(-2*pi*i*k*n/N)
// for forward; no scaling.
inline void fft_radix2(std::span<Complex> a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1U;
        for (; (j & bit) != 0; bit >>= 1U) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1U) {
        const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        const std::size_t half = len / 2;
        std::vector<Complex> tw(half);
        for (std::size_t k = 0; k < half; ++k) tw[k] = std::polar(1.0, ang * static_cast<double>(k));
        for (std::size_t i = 0; i < n; i += len)
            for (std::size_t k = 0; k < half; ++k) {
                const Complex u = a[i + k];
                const Complex v = a[i + k + half] * tw[k];
                a[i + k] = u + v;
                a[i + k + half] = u - v;
            }
    }
}

// Bluestein chirp-z for arbitrary lengths, routed through a power-of-two
// convolution.
inline void fft_bluestein(std::span<Complex> a, bool inverse) {
    const std::size_t n = a.size();
    std::size_t m = 1;
    while (m < 2 * n - 1) m <<= 1U;
    const double sgn = inverse ? 1.0 : -1.0;
    std::vector<Complex> chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        // k^2 mod 2n keeps the angle argument small for large k.
        const auto k2 = static_cast<double>((k * k) % (2 * n));
        chirp[k] = std::polar(1.0, sgn * std::numbers::pi * k2 / static_cast<double>(n));
    }
    std::vector<Complex> x(m), y(m);
    for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * chirp[k];
    y[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) y[k] = y[m - k] = std::conj(chirp[k]);
    fft_radix2(x, false);
    fft_radix2(y, false);
    for (std::size_t k = 0; k < m; ++k) x[k] *= y[k];
    fft_radix2(x, true);
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * inv_m * chirp[k];
}

}  // namespace detail

/// In-place 1-D DFT of any length (unnormalized both directions).
inline void fft1d(std::span<Complex> a, bool inverse) {
    if (a.empty()) throw DataError("zero-sized FFT");
    if (a.size() == 1) return;
    if (detail::is_pow2(a.size()))
        detail::fft_radix2(a, inverse);
    else
        detail::fft_bluestein(a, inverse);
}

/// In-place 2-D transform; inverse divides by height*width.
inline void fft2_inplace(Spectrum& s, bool inverse) {
    if (s.height <= 0 || s.width <= 0) throw DataError("zero-sized FFT");
    for (int r = 0; r < s.height; ++r) fft1d(std::span<Complex>(s.data.data() + static_cast<std::size_t>(r) * s.width, static_cast<std::size_t>(s.width)), inverse);
    std::vector<Complex> col(static_cast<std::size_t>(s.height));
    for (int c = 0; c < s.width; ++c) {
        for (int r = 0; r < s.height; ++r) col[static_cast<std::size_t>(r)] = s.at(r, c);
        fft1d(col, inverse);
        for (int r = 0; r < s.height; ++r) s.at(r, c) = col[static_cast<std::size_t>(r)];
    }
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(s.data.size());
        for (auto& v : s.data) v *= inv;
    }
}

inline Spectrum fft2(const Plane& p) {
    Spectrum s(p.height, p.width);
    for (std::size_t i = 0; i < p.data.size(); ++i) s.data[i] = Complex(p.data[i], 0.0);
    fft2_inplace(s, false);
    return s;
}

/// Real part of the inverse transform.
inline Plane ifft2(Spectrum s) {
    fft2_inplace(s, true);
    Plane p(s.height, s.width);
    for (std::size_t i = 0; i < p.data.size(); ++i) p.data[i] = static_cast<float>(s.data[i].real());
    return p;
}

}  // namespace s2sr
