#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "s2sr/dataset.hpp"
#include "s2sr/error.hpp"
#include "s2sr/nn/adam.hpp"
#include "s2sr/nn/checkpoint.hpp"
#include "s2sr/nn/model.hpp"
#include "s2sr/raster.hpp"

namespace s2sr {

/// Training budget and optimizer settings. The loss is always L1.
struct TrainConfig {
    nn::AdamConfig adam;
    int batch = 4;
    int iterations = 1000;
    int patch = 32;  // LR side of the random training patches
    std::uint64_t seed = 0;
    int checkpoint_every = 0;  // 0: final checkpoint only
};

inline nlohmann::json to_json(const TrainConfig& c) {
    return {{"lr", c.adam.lr},     {"beta1", c.adam.beta1},       {"beta2", c.adam.beta2}, {"eps", c.adam.eps},
            {"batch", c.batch},    {"iterations", c.iterations}, {"patch", c.patch},      {"seed", c.seed},
            {"loss", "l1"}};
}

struct TrainResult {
    nn::ModelParams<float> params;
    std::vector<double> loss_history;
};

/// Minimizes L1 over seeded random patches of the given pairs. Values are
/// normalized to [0, 1] (DN / 4095). Deterministic in (pairs, spec, cfg).
/// on_checkpoint, when set, receives (iteration, params) every
/// cfg.checkpoint_every iterations.
inline TrainResult train(const std::vector<LoadedPair>& pairs, const nn::ModelSpec& spec, const TrainConfig& cfg,
                         const std::function<void(int, const nn::ModelParams<float>&)>& on_checkpoint = {}) {
    if (pairs.empty()) throw DataError("empty training set");
    for (const auto& p : pairs) {
        if (p.hr.height != 2 * p.lr.height || p.hr.width != 2 * p.lr.width) throw DataError("training pair is not x2");
        if (p.lr.bands != spec.in_bands) throw DataError("training data band count does not match model spec");
    }
    if (cfg.batch < 1 || cfg.iterations < 0 || cfg.patch < 1) throw UsageError("invalid training configuration");

    Rng rng(cfg.seed);
    TrainResult res;
    res.params = nn::make_params<float>(spec, rng);
    nn::AdamState<float> state(res.params);
    res.loss_history.reserve(static_cast<std::size_t>(cfg.iterations));

    std::vector<Raster> lr_patches(static_cast<std::size_t>(cfg.batch));
    std::vector<Raster> hr_patches(static_cast<std::size_t>(cfg.batch));
    for (int it = 0; it < cfg.iterations; ++it) {
        std::vector<const Raster*> lr_ptrs;
        std::vector<const Raster*> hr_ptrs;
        std::optional<int> side;
        for (int b = 0; b < cfg.batch; ++b) {
            const auto& p = pairs[rng.below(pairs.size())];
            const int ps = std::min({cfg.patch, p.lr.height, p.lr.width});
            if (side && *side != ps) throw DataError("training pairs too small for a uniform patch size");
            side = ps;
            const int r0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(p.lr.height - ps + 1)));
            const int c0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(p.lr.width - ps + 1)));
            lr_patches[static_cast<std::size_t>(b)] = window(p.lr, r0, c0, ps, ps);
            hr_patches[static_cast<std::size_t>(b)] = window(p.hr, 2 * r0, 2 * c0, 2 * ps, 2 * ps);
            lr_ptrs.push_back(&lr_patches[static_cast<std::size_t>(b)]);
            hr_ptrs.push_back(&hr_patches[static_cast<std::size_t>(b)]);
        }
        const auto x = nn::batch_from_rasters<float>(lr_ptrs);
        const auto y = nn::batch_from_rasters<float>(hr_ptrs);
        res.params.zero_grad();
        const auto loss = nn::l1_loss(nn::model_forward(x, res.params), y);
        const double lv = loss->value[0];
        if (!std::isfinite(lv)) throw DivergenceError("non-finite loss at iteration " + std::to_string(it));
        res.loss_history.push_back(lv);
        nn::backward(loss);
        nn::adam_step(res.params, state, cfg.adam);
        if (on_checkpoint && cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0) on_checkpoint(it + 1, res.params);
    }
    return res;
}

inline std::string loss_csv(const std::vector<double>& history) {
    std::ostringstream os;
    os.precision(9);
    os << "iteration,loss\n";
    for (std::size_t i = 0; i < history.size(); ++i) os << i << "," << history[i] << "\n";
    return os.str();
}

}  // namespace s2sr
