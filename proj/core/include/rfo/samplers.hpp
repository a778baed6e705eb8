// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rfo/attention.hpp"
#include "rfo/flow.hpp"
#include "rfo/noise.hpp"
#include "rfo/state_batch.hpp"
#include "rfo/time_grid.hpp"

namespace rfo {

struct OvershootConfig {
    /// Overshoot strength; c = 0 is the Euler sampler.
    double c = 0.0;
    /// Cap the overshoot time at 1. Unclamped steps are only meaningful for
    /// studying the small-step limit.
    bool clamp = true;
    /// Diagnostic: when false the step returns the overshot state without the
    /// a/b re-noising, which does not preserve marginals.
    bool noise_compensation = true;

    void validate() const;
};

/// Coefficients of one overshoot step from t to s.
struct StepCoefficients {
    double o = 0.0;  // overshoot time
    double a = 1.0;  // s / o
    double b = 0.0;  // sqrt((1 - s)^2 - s^2 (1 - o)^2 / o^2)
};

/// Tolerance below which a negative b^2 is rounded to zero.
inline constexpr double kNoiseVarianceTolerance = 1e-12;

/// o = s + c (s - t) m, clamped to 1 when requested; then a and b.
StepCoefficients overshoot_coefficients(double t, double s, double c, bool clamp, double modulation = 1.0);

/// Snapshots (time, state) of a sampler run. Step k of the grid is kept when
/// k % keep_every == 0; the final state is always kept.
class Trajectory {
public:
    struct Snapshot {
        std::size_t step;
        double time;
        StateBatch state;
    };

    void push(std::size_t step, double time, StateBatch state);

    const std::vector<Snapshot>& snapshots() const noexcept { return m_snapshots; }
    std::size_t size() const noexcept { return m_snapshots.size(); }
    const Snapshot& operator[](std::size_t i) const noexcept { return m_snapshots[i]; }
    const StateBatch& final_state() const;
    double final_time() const;

    /// Snapshot at time t exactly; throws DomainError if not recorded.
    const StateBatch& at_time(double t) const;

private:
    std::vector<Snapshot> m_snapshots;
};

struct SampleOptions {
    std::size_t keep_every = 1;
};

StateBatch euler_step(const VelocityField& v, const StateBatch& z, double t, double s);

/// Deterministic Euler integration over the grid.
Trajectory euler_sample(const VelocityField& v, const TimeGrid& grid, const StateBatch& z0,
                        const SampleOptions& options = {});

/// One overshoot step: advance to o along v(z_t, t), then rescale by a and add b * xi.
/// Draws exactly B*d normals from `rng` even when b = 0.
StateBatch overshoot_step(const VelocityField& v, const StateBatch& z, double t, double s,
                          const OvershootConfig& cfg, NoiseSource& rng);

/// Same step with caller-supplied noise xi (shape of z).
StateBatch overshoot_step(const VelocityField& v, const StateBatch& z, double t, double s,
                          const OvershootConfig& cfg, const StateBatch& noise);

Trajectory overshoot_sample(const VelocityField& v, const TimeGrid& grid, const StateBatch& z0,
                            const OvershootConfig& cfg, NoiseSource& rng, const SampleOptions& options = {});

/// Euler-Maruyama on dZ = ((1 + c) v - (c / t) Z) dt + sqrt(2 c (1 - t) / t) dW.
/// The step leaving t = 0 is a plain Euler step. Every step draws B*d normals.
StateBatch sde_step(const VelocityField& v, const StateBatch& z, double t, double s, double c,
                    NoiseSource& rng);

Trajectory sde_sample(const VelocityField& v, const TimeGrid& grid, const StateBatch& z0,
                      const OvershootConfig& cfg, NoiseSource& rng, const SampleOptions& options = {});

/// z + alpha * score(z, t) + sqrt(2 alpha) * xi with the score taken from v.
StateBatch langevin_corrector(const VelocityField& v, const StateBatch& z, double t, double alpha,
                              NoiseSource& rng);

/// z + (overshoot_step(z) - euler_step(z)): the stochastic part of an overshoot
/// step applied in place at time t. Consumes B*d normals.
StateBatch overshoot_correction(const VelocityField& v, const StateBatch& z, double t, double s,
                                const OvershootConfig& cfg, NoiseSource& rng);

/// Per outer step: `inner` corrections with strength c / inner at time t, then
/// one Euler step to the next grid time.
Trajectory multistep_overshoot_sample(const VelocityField& v, const TimeGrid& grid, const StateBatch& z0,
                                      const OvershootConfig& cfg, std::size_t inner, NoiseSource& rng,
                                      const SampleOptions& options = {});

/// Attention-modulated step: coordinate i overshoots to o_i = min(s + c (s - t) m_i, 1)
/// and is re-noised with its own a_i, b_i. The mask length must equal d.
StateBatch amo_step(const VelocityField& v, const StateBatch& z, double t, double s,
                    const OvershootConfig& cfg, const AttentionMask& mask, NoiseSource& rng);

/// Supplies the mask for grid step k (starting at time t_k).
using MaskProvider = std::function<AttentionMask(std::size_t step, double t)>;

MaskProvider static_mask(AttentionMask mask);

Trajectory amo_sample(const VelocityField& v, const TimeGrid& grid, const StateBatch& z0,
                      const OvershootConfig& cfg, const MaskProvider& masks, NoiseSource& rng,
                      const SampleOptions& options = {});

/// CSV with header path_id,step,time,x_0,...,x_{d-1}; one line per path per
/// kept snapshot, snapshots thinned by `thin`.
std::string trajectory_to_csv(const Trajectory& trajectory, std::size_t thin = 1);

}  // namespace rfo
