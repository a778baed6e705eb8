// SPDX-License-Identifier: Apache-2.0
#include "rfo/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rfo/error.hpp"
#include "rfo/io.hpp"

namespace rfo {

void OvershootConfig::validate() const {
    if (!(c >= 0.0) || !std::isfinite(c)) {
        throw DomainError("overshoot strength c must be finite and >= 0");
    }
}

StepCoefficients overshoot_coefficients(double t, double s, double c, bool clamp, double modulation) {
    if (!(t >= 0.0 && t < s && s <= 1.0)) {
        throw DomainError("overshoot step requires 0 <= t < s <= 1 (t = " + std::to_string(t) +
                          ", s = " + std::to_string(s) + ")");
    }
    if (!(c >= 0.0)) {
        throw DomainError("overshoot strength c must be >= 0");
    }
    if (!(modulation >= 0.0 && modulation <= 1.0)) {
        throw DomainError("mask value must lie in [0, 1]");
    }
    StepCoefficients k;
    k.o = s + c * (s - t) * modulation;
    if (clamp) {
        k.o = std::min(k.o, 1.0);
    }
    k.a = s / k.o;
    if (k.o == s) {
        // (1 - s)^2 - s^2 ((1 - s) / s)^2 is zero analytically but not always in floating point.
        k.b = 0.0;
        return k;
    }
    const double ratio = (1.0 - k.o) / k.o;
    const double b2 = (1.0 - s) * (1.0 - s) - s * s * ratio * ratio;
    if (b2 < -kNoiseVarianceTolerance) {
        throw InvariantError("negative noise variance b^2 = " + std::to_string(b2) + " (o = " +
                             std::to_string(k.o) + ", s = " + std::to_string(s) + ")");
    }
    k.b = b2 > 0.0 ? std::sqrt(b2) : 0.0;
    return k;
}

// ---------------------------------------------------------------- Trajectory

void Trajectory::push(std::size_t step, double time, StateBatch state) {
    if (!m_snapshots.empty() && !state.same_shape(m_snapshots.front().state)) {
        throw ShapeError("Trajectory: snapshot shape changed");
    }
    m_snapshots.push_back({step, time, std::move(state)});
}

const StateBatch& Trajectory::final_state() const {
    if (m_snapshots.empty()) {
        throw DomainError("Trajectory is empty");
    }
    return m_snapshots.back().state;
}

double Trajectory::final_time() const {
    if (m_snapshots.empty()) {
        throw DomainError("Trajectory is empty");
    }
    return m_snapshots.back().time;
}

const StateBatch& Trajectory::at_time(double t) const {
    for (const auto& snap : m_snapshots) {
        if (snap.time == t) {
            return snap.state;
        }
    }
    throw DomainError("Trajectory has no snapshot at t = " + std::to_string(t));
}

namespace {

class Recorder {
public:
    Recorder(Trajectory& out, const TimeGrid& grid, const SampleOptions& options)
        : m_out(out), m_grid(grid), m_every(std::max<std::size_t>(options.keep_every, 1)) {}

    void record(std::size_t step, const StateBatch& state) {
        if (step % m_every == 0 || step == m_grid.steps()) {
            m_out.push(step, m_grid[step], state);
        }
    }

private:
    Trajectory& m_out;
    const TimeGrid& m_grid;
    std::size_t m_every;
};

void require_dim(const VelocityField& v, const StateBatch& z, const char* context) {
    if (v.dim() != z.dim()) {
        throw ShapeError(std::string(context) + ": velocity field dimension " + std::to_string(v.dim()) +
                         " != state dimension " + std::to_string(z.dim()));
    }
}

/// Per-coordinate coefficient table; a single entry broadcast when unmodulated.
std::vector<StepCoefficients> coefficient_table(double t, double s, const OvershootConfig& cfg,
                                                std::span<const double> modulation) {
    if (modulation.empty()) {
        return {overshoot_coefficients(t, s, cfg.c, cfg.clamp, 1.0)};
    }
    std::vector<StepCoefficients> table(modulation.size());
    for (std::size_t j = 0; j < modulation.size(); ++j) {
        table[j] = overshoot_coefficients(t, s, cfg.c, cfg.clamp, modulation[j]);
    }
    return table;
}

/// out = a (z + (o - t) vel) + b xi, coordinate-wise.
StateBatch apply_overshoot(const StateBatch& z, const StateBatch& vel, double t, const OvershootConfig& cfg,
                           const std::vector<StepCoefficients>& table, const StateBatch& noise) {
    StateBatch out(z.batch(), z.dim());
    const std::size_t d = z.dim();
    const bool broadcast = table.size() == 1;
    for (std::size_t i = 0; i < z.batch(); ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            const StepCoefficients& k = broadcast ? table[0] : table[j];
            const double overshot = z(i, j) + (k.o - t) * vel(i, j);
            if (!cfg.noise_compensation) {
                out(i, j) = overshot;
            } else if (k.b == 0.0) {
                out(i, j) = k.a * overshot;
            } else {
                out(i, j) = k.a * overshot + k.b * noise(i, j);
            }
        }
    }
    return out;
}

StateBatch overshoot_impl(const VelocityField& v, const StateBatch& z, double t, double s,
                          const OvershootConfig& cfg, std::span<const double> modulation, const StateBatch& noise) {
    cfg.validate();
    require_dim(v, z, "overshoot_step");
    require_same_shape(z, noise, "overshoot_step noise");
    const auto table = coefficient_table(t, s, cfg, modulation);
    const StateBatch vel = v(z, t);
    return apply_overshoot(z, vel, t, cfg, table, noise);
}

void require_finite(const StateBatch& x, const char* what, std::size_t step) {
    if (!x.all_finite()) {
        throw NonFiniteError(what, step);
    }
}

}  // namespace

// ---------------------------------------------------------------- Euler

StateBatch euler_step(const VelocityField& v, const StateBatch& z, double t, double s) {
    require_dim(v, z, "euler_step");
    StateBatch out = v(z, t);
    const double eps = s - t;
    auto zv = z.values();
    auto o = out.values();
    for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] = zv[i] + eps * o[i];
    }
    return out;
}

Trajectory euler_sample(const VelocityField& v, const TimeGrid& grid, const StateBatch& z0,
                        const SampleOptions& options) {
    require_dim(v, z0, "euler_sample");
    require_finite(z0, "euler_sample: non-finite initial state", 0);
    Trajectory traj;
    Recorder rec(traj, grid, options);
    rec.record(0, z0);
    StateBatch z = z0;
    StateBatch vel(z0.batch(), z0.dim());
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        v.evaluate(z, grid[k], vel);
        require_finite(vel, "euler_sample: non-finite velocity", k);
        const double eps = grid[k + 1] - grid[k];
        auto zv = z.values();
        auto vv = vel.values();
        for (std::size_t i = 0; i < zv.size(); ++i) {
            zv[i] = zv[i] + eps * vv[i];
        }
        rec.record(k + 1, z);
    }
    return traj;
}

// ---------------------------------------------------------------- overshoot

StateBatch overshoot_step(const VelocityField& v, const StateBatch& z, double t, double s,
                          const OvershootConfig& cfg, const StateBatch& noise) {
    return overshoot_impl(v, z, t, s, cfg, {}, noise);
}

StateBatch overshoot_step(const VelocityField& v, const StateBatch& z, double t, double s,
                          const OvershootConfig& cfg, NoiseSource& rng) {
    const StateBatch noise = rng.normal_batch(z.batch(), z.dim());
    return overshoot_impl(v, z, t, s, cfg, {}, noise);
}

Trajectory overshoot_sample(const VelocityField& v, const TimeGrid& grid, const StateBatch& z0,
                            const OvershootConfig& cfg, NoiseSource& rng, const SampleOptions& options) {
    cfg.validate();
    require_dim(v, z0, "overshoot_sample");
    require_finite(z0, "overshoot_sample: non-finite initial state", 0);
    Trajectory traj;
    Recorder rec(traj, grid, options);
    rec.record(0, z0);
    StateBatch z = z0;
    StateBatch noise(z0.batch(), z0.dim());
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        rng.fill_normal(noise);
        z = overshoot_impl(v, z, grid[k], grid[k + 1], cfg, {}, noise);
        require_finite(z, "overshoot_sample: non-finite state", k);
        rec.record(k + 1, z);
    }
    return traj;
}

// ---------------------------------------------------------------- SDE

StateBatch sde_step(const VelocityField& v, const StateBatch& z, double t, double s, double c, NoiseSource& rng) {
    require_dim(v, z, "sde_step");
    if (!(t >= 0.0 && t < s && s <= 1.0)) {
        throw DomainError("sde_step requires 0 <= t < s <= 1");
    }
    if (!(c >= 0.0)) {
        throw DomainError("sde_step: c must be >= 0");
    }
    const StateBatch noise = rng.normal_batch(z.batch(), z.dim());
    if (t == 0.0 || c == 0.0) {
        // Drift c/t and diffusion sqrt(2c(1-t)/t) are singular at t = 0; take a plain Euler step.
        return euler_step(v, z, t, s);
    }
    const double eps = s - t;
    const double diffusion = std::sqrt(2.0 * (1.0 - t) * c / t) * std::sqrt(eps);
    StateBatch out = v(z, t);
    auto zv = z.values();
    auto nv = noise.values();
    auto o = out.values();
    for (std::size_t i = 0; i < o.size(); ++i) {
        const double drift = (1.0 + c) * o[i] - (c / t) * zv[i];
        o[i] = zv[i] + drift * eps + diffusion * nv[i];
    }
    return out;
}

Trajectory sde_sample(const VelocityField& v, const TimeGrid& grid, const StateBatch& z0,
                      const OvershootConfig& cfg, NoiseSource& rng, const SampleOptions& options) {
    cfg.validate();
    require_dim(v, z0, "sde_sample");
    require_finite(z0, "sde_sample: non-finite initial state", 0);
    Trajectory traj;
    Recorder rec(traj, grid, options);
    rec.record(0, z0);
    StateBatch z = z0;
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        z = sde_step(v, z, grid[k], grid[k + 1], cfg.c, rng);
        require_finite(z, "sde_sample: non-finite state", k);
        rec.record(k + 1, z);
    }
    return traj;
}

// ---------------------------------------------------------------- Langevin

StateBatch langevin_corrector(const VelocityField& v, const StateBatch& z, double t, double alpha, NoiseSource& rng) {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw DomainError("langevin_corrector: alpha must be finite and >= 0");
    }
    const StateBatch score = score_from_velocity(v, z, t);
    const StateBatch noise = rng.normal_batch(z.batch(), z.dim());
    if (alpha == 0.0) {
        return z;
    }
    const double amplitude = std::sqrt(2.0 * alpha);
    StateBatch out(z.batch(), z.dim());
    auto zv = z.values();
    auto sv = score.values();
    auto nv = noise.values();
    auto o = out.values();
    for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] = zv[i] + alpha * sv[i] + amplitude * nv[i];
    }
    return out;
}

StateBatch overshoot_correction(const VelocityField& v, const StateBatch& z, double t, double s,
                                const OvershootConfig& cfg, NoiseSource& rng) {
    cfg.validate();
    require_dim(v, z, "overshoot_correction");
    const StepCoefficients k = overshoot_coefficients(t, s, cfg.c, cfg.clamp, 1.0);
    const StateBatch noise = rng.normal_batch(z.batch(), z.dim());
    if (k.o == s) {
        return z;
    }
    const StateBatch vel = v(z, t);
    const double eps = s - t;
    StateBatch out(z.batch(), z.dim());
    auto zv = z.values();
    auto vv = vel.values();
    auto nv = noise.values();
    auto o = out.values();
    for (std::size_t i = 0; i < o.size(); ++i) {
        const double overshoot = cfg.noise_compensation ? k.a * (zv[i] + (k.o - t) * vv[i]) + k.b * nv[i]
                                                        : zv[i] + (k.o - t) * vv[i];
        const double euler = zv[i] + eps * vv[i];
        o[i] = zv[i] + (overshoot - euler);
    }
    return out;
}

Trajectory multistep_overshoot_sample(const VelocityField& v, const TimeGrid& grid, const StateBatch& z0,
                                      const OvershootConfig& cfg, std::size_t inner, NoiseSource& rng,
                                      const SampleOptions& options) {
    cfg.validate();
    if (inner == 0) {
        throw DomainError("multistep_overshoot_sample: inner steps must be >= 1");
    }
    require_dim(v, z0, "multistep_overshoot_sample");
    OvershootConfig local = cfg;
    local.c = cfg.c / static_cast<double>(inner);
    Trajectory traj;
    Recorder rec(traj, grid, options);
    rec.record(0, z0);
    StateBatch z = z0;
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        for (std::size_t j = 0; j < inner; ++j) {
            z = overshoot_correction(v, z, grid[k], grid[k + 1], local, rng);
        }
        z = euler_step(v, z, grid[k], grid[k + 1]);
        require_finite(z, "multistep_overshoot_sample: non-finite state", k);
        rec.record(k + 1, z);
    }
    return traj;
}

// ---------------------------------------------------------------- AMO

StateBatch amo_step(const VelocityField& v, const StateBatch& z, double t, double s, const OvershootConfig& cfg,
                    const AttentionMask& mask, NoiseSource& rng) {
    if (mask.size() != z.dim()) {
        throw ShapeError("amo_step: mask has " + std::to_string(mask.size()) + " entries, state dimension is " +
                         std::to_string(z.dim()));
    }
    const StateBatch noise = rng.normal_batch(z.batch(), z.dim());
    return overshoot_impl(v, z, t, s, cfg, mask.values(), noise);
}

MaskProvider static_mask(AttentionMask mask) {
    return [mask = std::move(mask)](std::size_t, double) { return mask; };
}

Trajectory amo_sample(const VelocityField& v, const TimeGrid& grid, const StateBatch& z0, const OvershootConfig& cfg,
                      const MaskProvider& masks, NoiseSource& rng, const SampleOptions& options) {
    cfg.validate();
    require_dim(v, z0, "amo_sample");
    Trajectory traj;
    Recorder rec(traj, grid, options);
    rec.record(0, z0);
    StateBatch z = z0;
    StateBatch noise(z0.batch(), z0.dim());
    for (std::size_t k = 0; k < grid.steps(); ++k) {
        const AttentionMask mask = masks(k, grid[k]);
        if (mask.size() != z.dim()) {
            throw ShapeError("amo_sample: mask for step " + std::to_string(k) + " has wrong size");
        }
        rng.fill_normal(noise);
        z = overshoot_impl(v, z, grid[k], grid[k + 1], cfg, mask.values(), noise);
        require_finite(z, "amo_sample: non-finite state", k);
        rec.record(k + 1, z);
    }
    return traj;
}

// ---------------------------------------------------------------- export

std::string trajectory_to_csv(const Trajectory& trajectory, std::size_t thin) {
    thin = std::max<std::size_t>(thin, 1);
    std::string out = "path_id,step,time";
    if (trajectory.size() == 0) {
        return out + "\n";
    }
    const std::size_t d = trajectory[0].state.dim();
    for (std::size_t j = 0; j < d; ++j) {
        out += ",x_" + std::to_string(j);
    }
    out += '\n';
    for (std::size_t s = 0; s < trajectory.size(); ++s) {
        if (s % thin != 0 && s + 1 != trajectory.size()) {
            continue;
        }
        const auto& snap = trajectory[s];
        const std::string prefix = "," + std::to_string(snap.step) + "," + format_double(snap.time);
        for (std::size_t i = 0; i < snap.state.batch(); ++i) {
            out += std::to_string(i);
            out += prefix;
            for (std::size_t j = 0; j < d; ++j) {
                out += ',';
                out += format_double(snap.state(i, j));
            }
            out += '\n';
        }
    }
    return out;
}

}  // namespace rfo
