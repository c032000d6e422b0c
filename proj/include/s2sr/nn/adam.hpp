#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "s2sr/error.hpp"
#include "s2sr/nn/model.hpp"

namespace s2sr::nn {

struct AdamConfig {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// First and second moments, one pair of buffers per parameter tensor.
template <typename T>
struct AdamState {
    long step = 0;
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;

    explicit AdamState(const ModelParams<T>& p) {
        for (const auto& [name, t] : p.tensors) {
            m.emplace_back(t->numel(), T(0));
            v.emplace_back(t->numel(), T(0));
        }
    }
};

/// One bias-corrected Adam update from the gradients currently held by params.
template <typename T>
void adam_step(ModelParams<T>& params, AdamState<T>& state, const AdamConfig& cfg) {
    if (state.m.size() != params.tensors.size()) throw DataError("adam: state does not match parameter list");
    ++state.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t k = 0; k < params.tensors.size(); ++k) {
        auto& t = *params.tensors[k].second;
        auto& m = state.m[k];
        auto& v = state.v[k];
        if (m.size() != t.numel() || v.size() != t.numel()) throw DataError("adam: moment shape mismatch for " + params.tensors[k].first);
        if (t.grad.size() != t.numel()) continue;  // never touched by backward
        for (std::size_t i = 0; i < t.numel(); ++i) {
            const double g = t.grad[i];
            const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            const double mhat = mi / c1;
            const double vhat = vi / c2;
            t.value[i] = static_cast<T>(t.value[i] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
    }
}

}  // namespace s2sr::nn
