#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "s2sr/fft.hpp"
#include "s2sr/raster.hpp"
#include "s2sr/signal.hpp"

using namespace s2sr;

namespace {

Plane random_plane(int h, int w, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    Plane p(h, w);
    for (auto& v : p.data) v = static_cast<float>(scale * rng.normal());
    return p;
}

Plane ramp(int h, int w) {
    Plane p(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) p.at(r, c) = static_cast<float>(r * w + c);
    return p;
}

double max_abs_diff(const Plane& a, const Plane& b, int border = 0) {
    double m = 0.0;
    for (int r = border; r < a.height - border; ++r)
        for (int c = border; c < a.width - border; ++c) m = std::max(m, std::abs(double(a.at(r, c)) - double(b.at(r, c))));
    return m;
}

// Direct O(N^2) 2-D DFT.
std::vector<std::complex<double>> brute_dft(const Plane& p) {
    const int h = p.height;
    const int w = p.width;
    std::vector<std::complex<double>> out(static_cast<std::size_t>(h) * w);
    for (int u = 0; u < h; ++u)
        for (int v = 0; v < w; ++v) {
            std::complex<double> acc = 0.0;
            for (int r = 0; r < h; ++r)
                for (int c = 0; c < w; ++c) {
                    const double ang = -2.0 * std::numbers::pi * (double(u) * r / h + double(v) * c / w);
                    acc += double(p.at(r, c)) * std::complex<double>(std::cos(ang), std::sin(ang));
                }
            out[static_cast<std::size_t>(u) * w + v] = acc;
        }
    return out;
}

// Reflect-101 written out independently of the library.
int reflect(int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * n - 2 - i;
    return i;
}

// Dense 2-D convolution with the outer-product kernel.
Plane dense_blur(const Plane& x, const Kernel1D& k) {
    const int rad = k.radius();
    Plane out(x.height, x.width);
    for (int r = 0; r < x.height; ++r)
        for (int c = 0; c < x.width; ++c) {
            double acc = 0.0;
            for (int i = -rad; i <= rad; ++i)
                for (int j = -rad; j <= rad; ++j)
                    acc += k.taps[i + rad] * k.taps[j + rad] * x.at(reflect(r + i, x.height), reflect(c + j, x.width));
            out.at(r, c) = static_cast<float>(acc);
        }
    return out;
}

}  // namespace

TEST(Gaussian, SigmaZeroIsIdentity) {
    const auto k = gaussian_kernel(0.0);
    ASSERT_EQ(k.taps.size(), 1U);
    EXPECT_EQ(k.taps[0], 1.0);
}

TEST(Gaussian, SigmaOneMatchesHandNormalisedExponentials) {
    const auto k = gaussian_kernel(1.0);
    ASSERT_EQ(k.taps.size(), 9U);
    double z = 0.0;
    for (int i = -4; i <= 4; ++i) z += std::exp(-0.5 * i * i);
    for (int i = -4; i <= 4; ++i) EXPECT_NEAR(k.taps[i + 4], std::exp(-0.5 * i * i) / z, 1e-12);
}

TEST(Gaussian, NormalisedSymmetricRadius) {
    for (double s : {0.3, 0.7, 1.2, 2.4, 3.9}) {
        const auto k = gaussian_kernel(s);
        EXPECT_EQ(k.radius(), static_cast<int>(std::ceil(4.0 * s)));
        double sum = 0.0;
        for (double t : k.taps) sum += t;
        EXPECT_NEAR(sum, 1.0, 1e-6);
        for (std::size_t i = 0; i < k.taps.size(); ++i) EXPECT_EQ(k.taps[i], k.taps[k.taps.size() - 1 - i]);
    }
    EXPECT_THROW(gaussian_kernel(-0.1), DataError);
}

TEST(Blur, ConstantUnchanged) {
    const Plane p(12, 9, 123.5F);
    const Plane b = blur(p, gaussian_kernel(2.4));
    EXPECT_LT(max_abs_diff(p, b), 1e-4);
}

TEST(Blur, ImpulseGivesOuterProduct) {
    Plane p(21, 21, 0.0F);
    p.at(10, 10) = 1.0F;
    const auto k = gaussian_kernel(1.0);
    const Plane b = blur(p, k);
    for (int i = -4; i <= 4; ++i)
        for (int j = -4; j <= 4; ++j) EXPECT_NEAR(b.at(10 + i, 10 + j), k.taps[i + 4] * k.taps[j + 4], 1e-7);
    EXPECT_EQ(b.at(0, 0), 0.0F);
}

TEST(Blur, MatchesDenseConvolution) {
    const Plane x = random_plane(16, 16, 3);
    const auto k = gaussian_kernel(0.8);
    EXPECT_LT(max_abs_diff(blur(x, k), dense_blur(x, k)), 1e-4);
}

TEST(Blur, Linearity) {
    const Plane x = random_plane(20, 14, 4);
    const Plane y = random_plane(20, 14, 5);
    const auto k = gaussian_kernel(1.3);
    Plane comb(20, 14);
    for (std::size_t i = 0; i < comb.data.size(); ++i) comb.data[i] = 2.5F * x.data[i] - 0.75F * y.data[i];
    const Plane bx = blur(x, k);
    const Plane by = blur(y, k);
    const Plane bc = blur(comb, k);
    for (std::size_t i = 0; i < comb.data.size(); ++i) EXPECT_NEAR(bc.data[i], 2.5F * bx.data[i] - 0.75F * by.data[i], 1e-4);
}

TEST(Blur, CommutesWithIntegerShiftOnInterior) {
    const Plane x = random_plane(32, 32, 6);
    const auto k = gaussian_kernel(0.7);
    const int r = k.radius() + 2;
    EXPECT_LT(max_abs_diff(shift_integer(blur(x, k), 1, -2), blur(shift_integer(x, 1, -2), k), r), 1e-5);
}

TEST(Decimate, Definition) {
    Plane two(2, 4);
    two.data = {1, 2, 3, 4, 5, 6, 7, 8};
    const Plane d = decimate2(two, 0, 0);
    EXPECT_EQ(d.data, (std::vector<float>{1, 3}));
    const Plane r = decimate2(ramp(4, 4), 0, 0);
    EXPECT_EQ(r.data, (std::vector<float>{0, 2, 8, 10}));
    EXPECT_EQ(decimate2(ramp(4, 4), 1, 1).data, (std::vector<float>{5, 7, 13, 15}));
    EXPECT_THROW(decimate2(Plane(3, 4), 0, 0), DataError);
}

TEST(Decimate, CheckerboardFoldsToConstant) {
    Plane p(8, 8);
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) p.at(r, c) = ((r + c) % 2 == 0) ? 1.0F : -1.0F;
    for (float v : decimate2(p, 0, 0).data) EXPECT_EQ(v, 1.0F);
}

TEST(ShiftInteger, Definition) {
    const Plane x = random_plane(9, 7, 1);
    EXPECT_EQ(shift_integer(x, 0, 0).data, x.data);
    Plane imp(10, 10, 0.0F);
    imp.at(5, 5) = 1.0F;
    const Plane s = shift_integer(imp, 1, 0);
    EXPECT_EQ(s.at(6, 5), 1.0F);
    EXPECT_EQ(s.at(5, 5), 0.0F);
    // Edge replication at the vacated border.
    const Plane rp = shift_integer(ramp(4, 4), 1, 0);
    EXPECT_EQ(rp.at(0, 2), 2.0F);
    const Plane back = shift_integer(shift_integer(ramp(8, 8), 1, 1), -1, -1);
    EXPECT_EQ(max_abs_diff(back, ramp(8, 8), 1), 0.0);
}

TEST(SplineShift, ZeroShiftIsIdentity) {
    const Plane x = random_plane(13, 17, 2, 100.0);
    EXPECT_LT(max_abs_diff(spline_shift(x, 0.0, 0.0), x), 1e-4 * 100.0);
}

TEST(SplineShift, IntegerShiftZeroFills) {
    const Plane x = random_plane(12, 10, 3);
    const Plane s = spline_shift(x, 2.0, 0.0);
    for (int r = 0; r < 12; ++r)
        for (int c = 0; c < 10; ++c) EXPECT_NEAR(s.at(r, c), r >= 2 ? x.at(r - 2, c) : 0.0F, 1e-4) << r << "," << c;
}

TEST(SplineShift, ReproducesLinearRamp) {
    // The mirror-boundary prefilter bends the ramp near the ends; the error
    // decays like |z|^d with distance d, so "interior" starts 10 px in.
    Plane x(16, 48);
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 48; ++c) x.at(r, c) = static_cast<float>(3.0 * c + 0.5 * r);
    const Plane s = spline_shift(x, 0.0, 0.5);
    for (int r = 0; r < 16; ++r)
        for (int c = 10; c < 38; ++c) EXPECT_NEAR(s.at(r, c), 3.0 * (c - 0.5) + 0.5 * r, 1e-3);
}

TEST(SplineShift, HalfPixelRoundTripOnSmoothField) {
    Plane x(40, 40);
    for (int r = 0; r < 40; ++r)
        for (int c = 0; c < 40; ++c) x.at(r, c) = static_cast<float>(std::sin(0.3 * r + 0.1 * c) + 0.5 * std::cos(0.2 * c));
    const Plane back = spline_shift(spline_shift(x, 0.5, 0.0), -0.5, 0.0);
    EXPECT_LT(max_abs_diff(back, x, 8), 1e-3);
}

TEST(Fft, ImpulseIsFlat) {
    Plane p(8, 8, 0.0F);
    p.at(0, 0) = 1.0F;
    const Spectrum s = fft2(p);
    for (const auto& v : s.data) EXPECT_NEAR(std::abs(v - Complex(1.0, 0.0)), 0.0, 1e-12);
}

TEST(Fft, MatchesBruteForceDft) {
    for (auto [h, w] : {std::pair{8, 8}, std::pair{6, 10}, std::pair{5, 7}}) {
        const Plane p = random_plane(h, w, 10 + h);
        const Spectrum s = fft2(p);
        const auto ref = brute_dft(p);
        double m = 0.0;
        for (std::size_t i = 0; i < ref.size(); ++i) m = std::max(m, std::abs(s.data[i] - ref[i]));
        EXPECT_LT(m, 1e-6) << h << "x" << w;
    }
}

TEST(Fft, ParsevalAndInverse) {
    const Plane p = random_plane(32, 32, 12);
    const Spectrum s = fft2(p);
    double ex = 0.0;
    double ek = 0.0;
    for (float v : p.data) ex += double(v) * v;
    for (const auto& v : s.data) ek += std::norm(v);
    EXPECT_NEAR(ek / 1024.0, ex, 1e-3 * ex);
    EXPECT_LT(max_abs_diff(ifft2(s), p), 1e-4);
    const Plane q = random_plane(12, 20, 13);
    EXPECT_LT(max_abs_diff(ifft2(fft2(q)), q), 1e-4);
    EXPECT_THROW(fft2(Plane(0, 4)), DataError);
}

TEST(Noise, LevelZeroIsIdentity) {
    Rng rng(1);
    const Plane x = random_plane(8, 8, 1);
    EXPECT_EQ(add_noise(x, 0.0, rng).data, x.data);
    EXPECT_THROW(add_noise(x, -0.1, rng), DataError);
}

TEST(Noise, SampleStdAndDeterminism) {
    const Plane c(256, 256, 2000.0F);
    Rng a(5);
    const Plane n = add_noise(c, 0.001, a);
    double m = 0.0;
    for (float v : n.data) m += v;
    m /= double(n.data.size());
    double var = 0.0;
    for (float v : n.data) var += (v - m) * (v - m);
    const double sd = std::sqrt(var / double(n.data.size()));
    EXPECT_NEAR(sd, 4.095, 0.05 * 4.095);
    Rng b(5);
    EXPECT_EQ(add_noise(c, 0.001, b).data, n.data);
}

TEST(AliasRatio, Extremes) {
    EXPECT_EQ(alias_energy_ratio(Plane(16, 16, 5.0F)), 0.0);
    Plane cb(16, 16);
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c) cb.at(r, c) = ((r + c) % 2 == 0) ? 1.0F : -1.0F;
    EXPECT_NEAR(alias_energy_ratio(cb), 1.0, 1e-12);
}

TEST(AliasRatio, WhiteNoiseRegimes) {
    const Plane noise = random_plane(128, 128, 21);
    EXPECT_LT(alias_energy_ratio(blur(noise, gaussian_kernel(1.2))), 0.05);
    EXPECT_GT(alias_energy_ratio(blur(noise, gaussian_kernel(0.4))), 0.3);
    EXPECT_LT(alias_energy_ratio(blur(noise, gaussian_kernel(2.4))), 0.05);
}
