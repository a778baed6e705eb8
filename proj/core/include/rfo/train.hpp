// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rfo/mixture.hpp"
#include "rfo/mlp.hpp"

namespace rfo {

enum class Optimizer {
    sgd,      // fixed-rate gradient descent
    rmsprop,  // per-parameter adaptive step, no momentum, bias-corrected
};

enum class LearningRateSchedule {
    constant,
    cosine,  // lr * 0.5 * (1 + cos(pi * step / steps))
};

struct TrainConfig {
    std::size_t batch_size = 512;
    std::size_t steps = 4000;
    double learning_rate = 3e-3;
    Optimizer optimizer = Optimizer::rmsprop;
    LearningRateSchedule schedule = LearningRateSchedule::cosine;
    double rms_decay = 0.999;
    double rms_epsilon = 1e-8;
    std::uint64_t seed = 0;
    std::vector<std::size_t> hidden{64, 64};
    /// Only "uniform" (t ~ U[0, 1]) is supported.
    std::string time_law = "uniform";

    void validate() const;
};

std::string to_string(Optimizer optimizer);
Optimizer optimizer_from_string(const std::string& name);
std::string to_string(LearningRateSchedule schedule);
LearningRateSchedule schedule_from_string(const std::string& name);

struct TrainResult {
    MlpVelocity model;
    std::vector<double> losses;  // minibatch loss before each update
};

/// Called with (steps completed, current model).
using TrainObserver = std::function<void(std::size_t, const MlpVelocity&)>;

/// Trains the default velocity model on pairs (X_0, X_1) ~ N(0, I) x gm.
///
/// Model init draws from NoiseSource::derive(seed, 0); minibatches from
/// NoiseSource::derive(seed, 1) in the order: X_0 normals, X_1 draws via
/// sample_target, then one uniform per row for t. Throws TrainingDiverged
/// when a minibatch loss is non-finite.
TrainResult train(const GaussianMixture& gm, const TrainConfig& cfg,
                  const TrainObserver& observer = {}, std::size_t observe_every = 0);

}  // namespace rfo
