// SPDX-License-Identifier: Apache-2.0
#include "rfo/train.hpp"

#include <cmath>
#include <numbers>

#include "rfo/error.hpp"

namespace rfo {

void TrainConfig::validate() const {
    if (batch_size == 0) {
        throw ConfigError("train: batch_size must be positive");
    }
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("train: learning_rate must be positive");
    }
    if (!(rms_decay > 0.0 && rms_decay < 1.0)) {
        throw ConfigError("train: rms_decay must lie in (0, 1)");
    }
    if (!(rms_epsilon > 0.0)) {
        throw ConfigError("train: rms_epsilon must be positive");
    }
    for (std::size_t h : hidden) {
        if (h == 0) {
            throw ConfigError("train: hidden widths must be positive");
        }
    }
    if (time_law != "uniform") {
        throw ConfigError("train: unsupported time_law '" + time_law + "'");
    }
}

std::string to_string(Optimizer optimizer) {
    return optimizer == Optimizer::sgd ? "sgd" : "rmsprop";
}

Optimizer optimizer_from_string(const std::string& name) {
    if (name == "sgd") {
        return Optimizer::sgd;
    }
    if (name == "rmsprop") {
        return Optimizer::rmsprop;
    }
    throw ConfigError("unknown optimizer '" + name + "'");
}

std::string to_string(LearningRateSchedule schedule) {
    return schedule == LearningRateSchedule::constant ? "constant" : "cosine";
}

LearningRateSchedule schedule_from_string(const std::string& name) {
    if (name == "constant") {
        return LearningRateSchedule::constant;
    }
    if (name == "cosine") {
        return LearningRateSchedule::cosine;
    }
    throw ConfigError("unknown learning-rate schedule '" + name + "'");
}

TrainResult train(const GaussianMixture& gm, const TrainConfig& cfg, const TrainObserver& observer,
                  std::size_t observe_every) {
    cfg.validate();
    const std::size_t d = gm.dim();
    std::vector<std::size_t> widths{d + 1};
    widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
    widths.push_back(d);

    NoiseSource init_rng = NoiseSource::derive(cfg.seed, 0);
    NoiseSource data_rng = NoiseSource::derive(cfg.seed, 1);
    TrainResult result{MlpVelocity::initialized(widths, init_rng), {}};
    MlpVelocity& model = result.model;
    result.losses.reserve(cfg.steps);

    std::vector<double> second_moment(model.parameter_count(), 0.0);
    std::vector<double> times(cfg.batch_size);
    double decay_power = 1.0;

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        StateBatch x0 = data_rng.normal_batch(cfg.batch_size, d);
        StateBatch x1 = sample_target(gm, cfg.batch_size, data_rng);
        for (double& t : times) {
            t = data_rng.uniform();
        }
        LossGradient lg = grad_rf_loss(model, x0, x1, times);
        if (!std::isfinite(lg.loss)) {
            throw TrainingDiverged("training loss became non-finite", step);
        }
        result.losses.push_back(lg.loss);

        double lr = cfg.learning_rate;
        if (cfg.schedule == LearningRateSchedule::cosine) {
            lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) /
                                        static_cast<double>(cfg.steps)));
        }
        auto params = model.parameters();
        if (cfg.optimizer == Optimizer::sgd) {
            for (std::size_t p = 0; p < params.size(); ++p) {
                params[p] -= lr * lg.gradient[p];
            }
        } else {
            decay_power *= cfg.rms_decay;
            const double correction = 1.0 - decay_power;
            for (std::size_t p = 0; p < params.size(); ++p) {
                const double g = lg.gradient[p];
                second_moment[p] = cfg.rms_decay * second_moment[p] + (1.0 - cfg.rms_decay) * g * g;
                params[p] -= lr * g / (std::sqrt(second_moment[p] / correction) + cfg.rms_epsilon);
            }
        }
        if (!model.parameters_finite()) {
            throw TrainingDiverged("model parameters became non-finite", step);
        }
        if (observer && observe_every > 0 && (step + 1) % observe_every == 0) {
            observer(step + 1, model);
        }
    }
    return result;
}

}  // namespace rfo
