#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <vector>

#include "s2sr/error.hpp"
#include "s2sr/nn/tensor.hpp"

namespace s2sr::nn {

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline void accumulate_into(auto& dst, const auto& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// 3x3, zero padding 1. col is (C*9) x (H*W), row index c*9 + ky*3 + kx.
template <typename T>
void im2col3x3(const T* in, int channels, int h, int w, T* col) {
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    for (int c = 0; c < channels; ++c) {
        const T* src = in + static_cast<std::size_t>(c) * hw;
        for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
                T* dst = col + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
                const int dx = kx - 1;
                for (int y = 0; y < h; ++y) {
                    T* drow = dst + static_cast<std::size_t>(y) * w;
                    const int sy = y + ky - 1;
                    if (sy < 0 || sy >= h) {
                        std::fill(drow, drow + w, T(0));
                        continue;
                    }
                    const T* srow = src + static_cast<std::size_t>(sy) * w;
                    const int x0 = std::max(0, -dx);
                    const int x1 = std::min(w, w - dx);
                    std::fill(drow, drow + x0, T(0));
                    std::copy(srow + x0 + dx, srow + x1 + dx, drow + x0);
                    std::fill(drow + x1, drow + w, T(0));
                }
            }
    }
}

template <typename T>
void col2im3x3_add(const T* col, int channels, int h, int w, T* out) {
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    for (int c = 0; c < channels; ++c) {
        T* dst = out + static_cast<std::size_t>(c) * hw;
        for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
                const T* src = col + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
                const int dx = kx - 1;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + ky - 1;
                    if (sy < 0 || sy >= h) continue;
                    const T* srow = src + static_cast<std::size_t>(y) * w;
                    T* drow = dst + static_cast<std::size_t>(sy) * w;
                    const int x0 = std::max(0, -dx);
                    const int x1 = std::min(w, w - dx);
                    for (int x = x0; x < x1; ++x) drow[x + dx] += srow[x];
                }
            }
    }
}

}  // namespace detail

/// 3x3 cross-correlation, zero padding 1, stride 1. weight (O, C, 3, 3), bias (O, 1, 1, 1).
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
    const Shape xs = x->shape;
    const Shape ws = weight->shape;
    if (ws.h != 3 || ws.w != 3) throw DataError("conv2d supports 3x3 kernels only");
    if (ws.c != xs.c) throw DataError("conv2d channel mismatch: input " + to_string(xs) + " weight " + to_string(ws));
    if (bias->numel() != static_cast<std::size_t>(ws.n)) throw DataError("conv2d bias size mismatch");
    const int outc = ws.n;
    const int k = xs.c * 9;
    const auto hw = static_cast<Eigen::Index>(xs.plane());
    const Shape os{xs.n, outc, xs.h, xs.w};

    auto cols = std::make_shared<std::vector<T>>(static_cast<std::size_t>(k) * hw * xs.n);
    auto out = make_result<T>(os, "conv2d", {x, weight, bias}, [cols, xs, outc, k, hw](Node<T>& self) {
        const Var<T>& px = self.parents[0];
        const Var<T>& pw = self.parents[1];
        const Var<T>& pb = self.parents[2];
        Eigen::Map<const detail::RowMat<T>> wm(pw->value.data(), outc, k);
        std::vector<T> dcol(static_cast<std::size_t>(k) * hw);
        for (int n = 0; n < xs.n; ++n) {
            Eigen::Map<const detail::RowMat<T>> dy(self.grad.data() + static_cast<std::size_t>(n) * outc * hw, outc, hw);
            Eigen::Map<const detail::RowMat<T>> col(cols->data() + static_cast<std::size_t>(n) * k * hw, k, hw);
            if (pw->requires_grad) {
                Eigen::Map<detail::RowMat<T>> dw(pw->grad.data(), outc, k);
                dw.noalias() += dy * col.transpose();
            }
            // Plain loop: Eigen's row sum peels to the first aligned element,
            // which would make the summation order depend on the address.
            if (pb->requires_grad)
                for (int o = 0; o < outc; ++o) {
                    const T* row = self.grad.data() + (static_cast<std::size_t>(n) * outc + o) * hw;
                    double acc = 0.0;
                    for (Eigen::Index i = 0; i < hw; ++i) acc += row[i];
                    pb->grad[static_cast<std::size_t>(o)] += static_cast<T>(acc);
                }
            if (px->requires_grad) {
                Eigen::Map<detail::RowMat<T>> dc(dcol.data(), k, hw);
                dc.noalias() = wm.transpose() * dy;
                detail::col2im3x3_add(dcol.data(), xs.c, xs.h, xs.w, px->grad.data() + static_cast<std::size_t>(n) * xs.c * hw);
            }
        }
    });

    Eigen::Map<const detail::RowMat<T>> wm(weight->value.data(), outc, k);
    for (int n = 0; n < xs.n; ++n) {
        T* col = cols->data() + static_cast<std::size_t>(n) * k * hw;
        detail::im2col3x3(x->value.data() + static_cast<std::size_t>(n) * xs.c * hw, xs.c, xs.h, xs.w, col);
        Eigen::Map<const detail::RowMat<T>> cm(col, k, hw);
        Eigen::Map<detail::RowMat<T>> ym(out->value.data() + static_cast<std::size_t>(n) * outc * hw, outc, hw);
        ym.noalias() = wm * cm;
        for (int o = 0; o < outc; ++o) ym.row(o).array() += bias->value[static_cast<std::size_t>(o)];
    }
    if (!out->requires_grad) cols.reset();
    return out;
}

/// max(x, slope * x) for 0 < slope < 1.
template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope = T(0.2)) {
    auto out = make_result<T>(x->shape, "leaky_relu", {x}, [slope](Node<T>& self) {
        const Var<T>& p = self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            p->grad[i] += p->value[i] > T(0) ? self.grad[i] : slope * self.grad[i];
    });
    for (std::size_t i = 0; i < x->numel(); ++i) {
        const T v = x->value[i];
        out->value[i] = v > T(0) ? v : slope * v;
    }
    return out;
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    if (a->shape != b->shape) throw DataError("add: shape mismatch " + to_string(a->shape) + " vs " + to_string(b->shape));
    auto out = make_result<T>(a->shape, "add", {a, b}, [](Node<T>& self) {
        for (const auto& p : self.parents)
            if (p->requires_grad) detail::accumulate_into(p->grad, self.grad);
    });
    for (std::size_t i = 0; i < a->numel(); ++i) out->value[i] = a->value[i] + b->value[i];
    return out;
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
    auto out = make_result<T>(a->shape, "scale", {a}, [s](Node<T>& self) {
        const Var<T>& p = self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += s * self.grad[i];
    });
    for (std::size_t i = 0; i < a->numel(); ++i) out->value[i] = s * a->value[i];
    return out;
}

/// Channel concatenation.
template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts) {
    if (parts.empty()) throw DataError("concat of nothing");
    Shape s = parts[0]->shape;
    int channels = 0;
    for (const auto& p : parts) {
        if (p->shape.n != s.n || p->shape.h != s.h || p->shape.w != s.w) throw DataError("concat: spatial/batch mismatch");
        channels += p->shape.c;
    }
    s.c = channels;
    const std::size_t plane = s.plane();
    auto out = make_result<T>(s, "concat", parts, [plane](Node<T>& self) {
        const int total = self.shape.c;
        for (int n = 0; n < self.shape.n; ++n) {
            std::size_t offset = static_cast<std::size_t>(n) * total * plane;
            for (const auto& p : self.parents) {
                const std::size_t len = static_cast<std::size_t>(p->shape.c) * plane;
                if (p->requires_grad) {
                    T* dst = p->grad.data() + static_cast<std::size_t>(n) * len;
                    const T* src = self.grad.data() + offset;
                    for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
                }
                offset += len;
            }
        }
    });
    for (int n = 0; n < s.n; ++n) {
        std::size_t offset = static_cast<std::size_t>(n) * channels * plane;
        for (const auto& p : parts) {
            const std::size_t len = static_cast<std::size_t>(p->shape.c) * plane;
            std::copy_n(p->value.data() + static_cast<std::size_t>(n) * len, len, out->value.data() + offset);
            offset += len;
        }
    }
    return out;
}

/// Nearest-neighbour 2x: out(2i + a, 2j + b) = in(i, j).
template <typename T>
Var<T> upsample_nearest2(const Var<T>& x) {
    const Shape s = x->shape;
    const Shape os{s.n, s.c, 2 * s.h, 2 * s.w};
    auto out = make_result<T>(os, "upsample_nearest2", {x}, [s, os](Node<T>& self) {
        const Var<T>& p = self.parents[0];
        for (std::size_t pl = 0; pl < static_cast<std::size_t>(s.n) * s.c; ++pl) {
            const T* g = self.grad.data() + pl * os.plane();
            T* d = p->grad.data() + pl * s.plane();
            for (int y = 0; y < os.h; ++y)
                for (int xx = 0; xx < os.w; ++xx) d[static_cast<std::size_t>(y / 2) * s.w + xx / 2] += g[static_cast<std::size_t>(y) * os.w + xx];
        }
    });
    for (std::size_t pl = 0; pl < static_cast<std::size_t>(s.n) * s.c; ++pl) {
        const T* src = x->value.data() + pl * s.plane();
        T* dst = out->value.data() + pl * os.plane();
        for (int y = 0; y < os.h; ++y)
            for (int xx = 0; xx < os.w; ++xx) dst[static_cast<std::size_t>(y) * os.w + xx] = src[static_cast<std::size_t>(y / 2) * s.w + xx / 2];
    }
    return out;
}

namespace detail {

// Keys cubic convolution kernel, a = -0.5.
inline double keys_cubic(double x) {
    constexpr double a = -0.5;
    x = std::abs(x);
    if (x <= 1.0) return (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0;
    if (x < 2.0) return a * x * x * x - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a;
    return 0.0;
}

// 2x upsampling with pixel-centre alignment: output 2i samples input i - 1/4,
// output 2i + 1 samples i + 1/4. Four taps each, sources clamped to the edge.
struct Bicubic2Taps {
    std::array<double, 4> even;  // sources i-2 .. i+1
    std::array<double, 4> odd;   // sources i-1 .. i+2
};

inline const Bicubic2Taps& bicubic2_taps() {
    static const Bicubic2Taps taps = [] {
        Bicubic2Taps t{};
        const std::array<double, 4> de{1.75, 0.75, 0.25, 1.25};
        for (std::size_t i = 0; i < 4; ++i) {
            t.even[i] = keys_cubic(de[i]);
            t.odd[i] = keys_cubic(de[3 - i]);
        }
        return t;
    }();
    return taps;
}

// Applies (or, with adjoint, transposes) the 1-D 2x bicubic operator along one
// axis of a plane. len is the input length along that axis; stride/count walk
// the orthogonal lines.
template <typename T>
void bicubic2_line(const T* in, std::ptrdiff_t in_step, T* out, std::ptrdiff_t out_step, int len, bool adjoint) {
    const auto& t = bicubic2_taps();
    auto src = [len](int i) { return std::clamp(i, 0, len - 1); };
    for (int i = 0; i < len; ++i) {
        for (int k = 0; k < 4; ++k) {
            const int se = src(i - 2 + k);
            const int so = src(i - 1 + k);
            if (!adjoint) {
                out[(2 * i) * out_step] += static_cast<T>(t.even[static_cast<std::size_t>(k)]) * in[se * in_step];
                out[(2 * i + 1) * out_step] += static_cast<T>(t.odd[static_cast<std::size_t>(k)]) * in[so * in_step];
            } else {
                // in is the 2x-long gradient, out the original-length accumulator.
                out[se * out_step] += static_cast<T>(t.even[static_cast<std::size_t>(k)]) * in[(2 * i) * in_step];
                out[so * out_step] += static_cast<T>(t.odd[static_cast<std::size_t>(k)]) * in[(2 * i + 1) * in_step];
            }
        }
    }
}

template <typename T>
void bicubic2_plane(const T* in, int h, int w, T* out) {
    std::vector<T> tmp(static_cast<std::size_t>(h) * 2 * w, T(0));
    for (int y = 0; y < h; ++y) bicubic2_line(in + static_cast<std::size_t>(y) * w, 1, tmp.data() + static_cast<std::size_t>(y) * 2 * w, 1, w, false);
    for (int x = 0; x < 2 * w; ++x) bicubic2_line(tmp.data() + x, 2 * w, out + x, 2 * w, h, false);
}

template <typename T>
void bicubic2_plane_adjoint(const T* gout, int h, int w, T* gin) {
    std::vector<T> tmp(static_cast<std::size_t>(h) * 2 * w, T(0));
    for (int x = 0; x < 2 * w; ++x) bicubic2_line(gout + x, 2 * w, tmp.data() + x, 2 * w, h, true);
    for (int y = 0; y < h; ++y) bicubic2_line(tmp.data() + static_cast<std::size_t>(y) * 2 * w, 1, gin + static_cast<std::size_t>(y) * w, 1, w, true);
}

}  // namespace detail

/// Separable Keys bicubic 2x upsampling (a = -0.5), edge-clamped.
template <typename T>
Var<T> bicubic_up2(const Var<T>& x) {
    const Shape s = x->shape;
    const Shape os{s.n, s.c, 2 * s.h, 2 * s.w};
    auto out = make_result<T>(os, "bicubic_up2", {x}, [s, os](Node<T>& self) {
        const Var<T>& p = self.parents[0];
        for (std::size_t pl = 0; pl < static_cast<std::size_t>(s.n) * s.c; ++pl)
            detail::bicubic2_plane_adjoint(self.grad.data() + pl * os.plane(), s.h, s.w, p->grad.data() + pl * s.plane());
    });
    for (std::size_t pl = 0; pl < static_cast<std::size_t>(s.n) * s.c; ++pl)
        detail::bicubic2_plane(x->value.data() + pl * s.plane(), s.h, s.w, out->value.data() + pl * os.plane());
    return out;
}

/// Mean absolute error; subgradient 0 where pred == target.
template <typename T>
Var<T> l1_loss(const Var<T>& pred, const Var<T>& target) {
    if (pred->shape != target->shape) throw DataError("l1_loss: shape mismatch " + to_string(pred->shape) + " vs " + to_string(target->shape));
    const auto count = static_cast<double>(pred->numel());
    auto out = make_result<T>(Shape{1, 1, 1, 1}, "l1_loss", {pred, target}, [count](Node<T>& self) {
        const T g = self.grad[0] / static_cast<T>(count);
        const Var<T>& p = self.parents[0];
        const Var<T>& t = self.parents[1];
        for (std::size_t i = 0; i < p->numel(); ++i) {
            const T d = p->value[i] - t->value[i];
            const T s = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
            if (p->requires_grad) p->grad[i] += s * g;
            if (t->requires_grad) t->grad[i] -= s * g;
        }
    });
    double acc = 0.0;
    for (std::size_t i = 0; i < pred->numel(); ++i) acc += std::abs(static_cast<double>(pred->value[i]) - static_cast<double>(target->value[i]));
    out->value[0] = static_cast<T>(acc / count);
    return out;
}

}  // namespace s2sr::nn
