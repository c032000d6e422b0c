#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "s2sr/nn/model.hpp"
#include "s2sr/nn/ops.hpp"

namespace test {

using s2sr::Rng;
using s2sr::nn::make_leaf;
using s2sr::nn::make_result;
using s2sr::nn::ModelParams;
using s2sr::nn::ModelSpec;
using s2sr::nn::Node;
using s2sr::nn::Shape;
using s2sr::nn::Var;

template <typename T>
Var<T> random_leaf(Shape s, Rng& rng, double sd = 1.0, bool grad = true) {
    std::vector<T> v(s.numel());
    for (auto& x : v) x = static_cast<T>(sd * rng.normal());
    return make_leaf<T>(s, std::move(v), grad);
}

// sum(x * w) for a fixed random w: a smooth scalar probe of x.
inline Var<double> dot_probe(const Var<double>& x, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> w(x->numel());
    for (auto& v : w) v = rng.normal();
    auto out = make_result<double>(Shape{}, "dot", {x}, [w](Node<double>& self) {
        auto& p = self.parents[0];
        for (std::size_t i = 0; i < w.size(); ++i) p->grad[i] += self.grad[0] * w[i];
    });
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) acc += x->value[i] * w[i];
    out->value[0] = acc;
    return out;
}

// Central differences at random elements of each input; returns the worst
// relative error against the analytic gradient. A probe whose one-sided
// differences disagree straddles a leaky-ReLU kink, where no finite difference
// is meaningful; it is replaced by another draw and counted in *kinks.
inline double gradcheck(const std::function<Var<double>()>& loss, const std::vector<Var<double>>& inputs, int probes,
                        std::uint64_t seed, int* kinks = nullptr) {
    for (const auto& in : inputs) in->grad.clear();
    s2sr::nn::backward(loss());
    const double f0 = loss()->value[0];
    Rng rng(seed);
    double worst = 0.0;
    int skipped = 0;
    for (const auto& in : inputs) {
        const std::vector<double> analytic = in->grad;
        int k = 0;
        for (int draws = 0; k < probes && draws < 20 * probes; ++draws) {
            const std::size_t i = rng.below(in->numel());
            const double h = 1e-5 * std::max(1.0, std::abs(in->value[i]));
            const double orig = in->value[i];
            in->value[i] = orig + h;
            const double up = loss()->value[0];
            in->value[i] = orig - h;
            const double dn = loss()->value[0];
            in->value[i] = orig;
            const double fwd = (up - f0) / h;
            const double bwd = (f0 - dn) / h;
            if (std::abs(fwd - bwd) > 1e-3 * std::max(1e-3, std::abs(fwd) + std::abs(bwd))) {
                ++skipped;
                continue;
            }
            const double num = (up - dn) / (2.0 * h);
            const double rel = std::abs(num - analytic[i]) / std::max(1e-6, std::abs(num) + std::abs(analytic[i]));
            worst = std::max(worst, rel);
            ++k;
        }
        if (k < probes) worst = std::numeric_limits<double>::infinity();
    }
    if (kinks) *kinks += skipped;
    return worst;
}

// Small random weights everywhere, including the zero-initialized tail and biases.
inline ModelParams<double> random_model(const ModelSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    auto p = s2sr::nn::make_params<double>(spec, rng);
    for (auto& [name, t] : p.tensors)
        if (name.rfind("tail1", 0) == 0 || name.find(".bias") != std::string::npos)
            for (auto& v : t->value) v = 0.1 * rng.normal();
    return p;
}

}  // namespace test
