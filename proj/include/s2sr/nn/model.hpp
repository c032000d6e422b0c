#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "s2sr/error.hpp"
#include "s2sr/nn/ops.hpp"
#include "s2sr/nn/tensor.hpp"
#include "s2sr/raster.hpp"

namespace s2sr::nn {

/// RRDB network hyperparameters. The scale factor is fixed at 2.
struct ModelSpec {
    int in_bands = 3;
    int features = 32;   // F
    int num_rrdb = 4;    // N
    int growth = 16;     // G
    double residual_scale = 0.2;

    bool operator==(const ModelSpec&) const = default;

    /// Desk-scale profile used for experiments on one CPU core.
    static ModelSpec tiny(int bands = 3) { return {bands, 16, 2, 8, 0.2}; }
    /// Default desk profile.
    static ModelSpec desk(int bands = 3) { return {bands, 32, 4, 16, 0.2}; }
    /// Full-depth profile: 8 RRDB blocks.
    static ModelSpec paper(int bands = 3) { return {bands, 64, 8, 32, 0.2}; }
};

inline ModelSpec spec_by_name(const std::string& name, int bands = 3) {
    if (name == "tiny") return ModelSpec::tiny(bands);
    if (name == "desk") return ModelSpec::desk(bands);
    if (name == "paper") return ModelSpec::paper(bands);
    throw UsageError("unknown model spec '" + name + "' (tiny|desk|paper)");
}

inline nlohmann::json to_json(const ModelSpec& s) {
    return {{"in_bands", s.in_bands}, {"features", s.features}, {"num_rrdb", s.num_rrdb},
            {"growth", s.growth},     {"residual_scale", s.residual_scale}, {"scale", 2}};
}

inline ModelSpec spec_from_json(const nlohmann::json& j) {
    ModelSpec s;
    s.in_bands = j.at("in_bands").get<int>();
    s.features = j.at("features").get<int>();
    s.num_rrdb = j.at("num_rrdb").get<int>();
    s.growth = j.at("growth").get<int>();
    s.residual_scale = j.at("residual_scale").get<double>();
    if (j.value("scale", 2) != 2) throw DataError("only scale factor 2 is supported");
    return s;
}

/// One convolution's parameter shapes, in network order.
struct ConvDef {
    std::string name;
    int in_channels;
    int out_channels;
    bool residual_branch;  // inside an RRDB (init scaled by 0.1)
};

inline std::vector<ConvDef> conv_layout(const ModelSpec& s) {
    std::vector<ConvDef> defs;
    defs.push_back({"head", s.in_bands, s.features, false});
    for (int b = 0; b < s.num_rrdb; ++b)
        for (int d = 0; d < 3; ++d)
            for (int k = 0; k < 5; ++k) {
                const std::string name = "rrdb" + std::to_string(b) + ".rdb" + std::to_string(d) + ".conv" + std::to_string(k);
                defs.push_back({name, s.features + k * s.growth, k < 4 ? s.growth : s.features, true});
            }
    defs.push_back({"trunk", s.features, s.features, false});
    defs.push_back({"up", s.features, s.features, false});
    defs.push_back({"tail0", s.features, s.features, false});
    defs.push_back({"tail1", s.features, s.in_bands, false});
    return defs;
}

/// Closed-form parameter count: 9*Cin*Cout + Cout per convolution.
inline std::size_t parameter_count(const ModelSpec& s) {
    auto conv = [](std::size_t cin, std::size_t cout) { return 9 * cin * cout + cout; };
    const std::size_t f = s.features;
    const std::size_t g = s.growth;
    const std::size_t c = s.in_bands;
    std::size_t rdb = 0;
    for (std::size_t k = 0; k < 4; ++k) rdb += conv(f + k * g, g);
    rdb += conv(f + 4 * g, f);
    return conv(c, f) + static_cast<std::size_t>(s.num_rrdb) * 3 * rdb + 3 * conv(f, f) + conv(f, c);
}

/// Named weight/bias leaves, in a fixed order.
template <typename T>
struct ModelParams {
    ModelSpec spec;
    std::vector<std::pair<std::string, Var<T>>> tensors;
    std::map<std::string, std::size_t> index;

    void add(std::string name, Var<T> v) {
        index[name] = tensors.size();
        tensors.emplace_back(std::move(name), std::move(v));
    }

    [[nodiscard]] const Var<T>& get(const std::string& name) const {
        const auto it = index.find(name);
        if (it == index.end()) throw DataError("missing parameter " + name);
        return tensors[it->second].second;
    }

    [[nodiscard]] std::size_t count() const {
        std::size_t n = 0;
        for (const auto& [name, t] : tensors) n += t->numel();
        return n;
    }

    void zero_grad() {
        for (auto& [name, t] : tensors) {
            t->ensure_grad();
            t->zero_grad();
        }
    }

    template <typename U>
    [[nodiscard]] ModelParams<U> cast(bool requires_grad = true) const {
        ModelParams<U> out;
        out.spec = spec;
        for (const auto& [name, t] : tensors) {
            std::vector<U> v(t->value.begin(), t->value.end());
            out.add(name, make_leaf<U>(t->shape, std::move(v), requires_grad));
        }
        return out;
    }

    /// Copy that records no graph; for inference.
    [[nodiscard]] ModelParams<T> frozen() const { return cast<T>(false); }
};

enum class Init { Kaiming, Zero };

/// Kaiming-normal weights for leaky ReLU (slope 0.2), RRDB convolutions scaled
/// by 0.1, zero biases, and a zero final convolution so a fresh model equals
/// the bicubic upsample.
template <typename T>
ModelParams<T> make_params(const ModelSpec& spec, Rng& rng, Init init = Init::Kaiming) {
    ModelParams<T> p;
    p.spec = spec;
    const double gain = std::sqrt(2.0 / (1.0 + 0.2 * 0.2));
    for (const auto& d : conv_layout(spec)) {
        std::vector<T> w(static_cast<std::size_t>(d.out_channels) * d.in_channels * 9, T(0));
        const bool last = d.name == "tail1";
        if (init == Init::Kaiming && !last) {
            const double sd = gain / std::sqrt(9.0 * d.in_channels) * (d.residual_branch ? 0.1 : 1.0);
            for (auto& v : w) v = static_cast<T>(sd * rng.normal());
        }
        p.add(d.name + ".weight", make_leaf<T>({d.out_channels, d.in_channels, 3, 3}, std::move(w), true));
        p.add(d.name + ".bias", make_leaf<T>({d.out_channels, 1, 1, 1}, std::vector<T>(static_cast<std::size_t>(d.out_channels), T(0)), true));
    }
    return p;
}

template <typename T>
Var<T> conv(const ModelParams<T>& p, const std::string& name, const Var<T>& x) {
    return conv2d(x, p.get(name + ".weight"), p.get(name + ".bias"));
}

/// Residual dense block: five convolutions with dense concatenation,
/// out = x + beta * conv4(...).
template <typename T>
Var<T> rdb_forward(const Var<T>& x, const ModelParams<T>& p, const std::string& prefix, T beta) {
    std::vector<Var<T>> feats{x};
    Var<T> y;
    for (int k = 0; k < 5; ++k) {
        const Var<T> in = feats.size() == 1 ? feats[0] : concat(feats);
        y = conv(p, prefix + ".conv" + std::to_string(k), in);
        if (k < 4) {
            y = leaky_relu(y, T(0.2));
            feats.push_back(y);
        }
    }
    return add(x, scale(y, beta));
}

/// Residual-in-residual dense block: out = x + beta * D(x), where D is what
/// the three chained RDBs add on top of their input. Zero weights or beta = 0
/// give the identity.
template <typename T>
Var<T> rrdb_forward(const Var<T>& x, const ModelParams<T>& p, int block, T beta) {
    if (x->shape.c != p.spec.features) throw DataError("rrdb_forward: input channels must equal feature width");
    const std::string prefix = "rrdb" + std::to_string(block);
    Var<T> h = x;
    for (int d = 0; d < 3; ++d) h = rdb_forward(h, p, prefix + ".rdb" + std::to_string(d), beta);
    return add(x, scale(add(h, scale(x, T(-1))), beta));
}

/// Nearest 2x then a 3x3 convolution.
template <typename T>
Var<T> upsample_x2(const Var<T>& x, const ModelParams<T>& p) {
    return conv(p, "up", upsample_nearest2(x));
}

/// The learned part of the network: head -> RRDBs -> trunk (+ head skip) ->
/// upsample -> two tail convolutions. Output is 2x the input size.
template <typename T>
Var<T> model_residual(const Var<T>& lr, const ModelParams<T>& p) {
    const ModelSpec& s = p.spec;
    if (lr->shape.c != s.in_bands)
        throw DataError("model expects " + std::to_string(s.in_bands) + " bands, got " + std::to_string(lr->shape.c));
    const auto beta = static_cast<T>(s.residual_scale);
    const Var<T> fea = conv(p, "head", lr);
    Var<T> body = fea;
    for (int b = 0; b < s.num_rrdb; ++b) body = rrdb_forward(body, p, b, beta);
    const Var<T> trunk = add(fea, conv(p, "trunk", body));
    Var<T> h = leaky_relu(upsample_x2(trunk, p), T(0.2));
    h = leaky_relu(conv(p, "tail0", h), T(0.2));
    return conv(p, "tail1", h);
}

/// Full model: learned residual plus a global bicubic skip of the input.
template <typename T>
Var<T> model_forward(const Var<T>& lr, const ModelParams<T>& p) {
    return add(model_residual(lr, p), bicubic_up2(lr));
}

// ---------------------------------------------------------------------------
// Raster <-> tensor

template <typename T>
Var<T> batch_from_rasters(const std::vector<const Raster*>& rs, double scale_by = 1.0 / kPeakDN) {
    if (rs.empty()) throw DataError("empty batch");
    const Raster& r0 = *rs[0];
    Shape s{static_cast<int>(rs.size()), r0.bands, r0.height, r0.width};
    std::vector<T> v;
    v.reserve(s.numel());
    for (const Raster* r : rs) {
        if (r->bands != r0.bands || r->height != r0.height || r->width != r0.width) throw DataError("batch rasters differ in shape");
        for (float x : r->data) v.push_back(static_cast<T>(x * scale_by));
    }
    return make_leaf<T>(s, std::move(v));
}

template <typename T>
Raster raster_from_batch(const Node<T>& t, int index, double scale_by = kPeakDN) {
    Raster r(t.shape.c, t.shape.h, t.shape.w);
    const std::size_t len = static_cast<std::size_t>(t.shape.c) * t.shape.plane();
    for (std::size_t i = 0; i < len; ++i) r.data[i] = static_cast<float>(t.value[static_cast<std::size_t>(index) * len + i] * scale_by);
    return r;
}

/// Bicubic 2x of a raster through the same operator the network skip uses.
inline Raster bicubic_upsample(const Raster& lr) {
    const auto x = batch_from_rasters<float>({&lr}, 1.0);
    return raster_from_batch(*bicubic_up2(x), 0, 1.0);
}

}  // namespace s2sr::nn
