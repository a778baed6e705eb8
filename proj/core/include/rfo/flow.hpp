// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

#include "rfo/state_batch.hpp"

namespace rfo {

/// Score evaluation is refused for t > 1 - kScoreGuard, where (1 - t) in the
/// denominator of the score identity makes it singular.
inline constexpr double kScoreGuard = 1e-3;

/// A velocity field v(x, t) on R^d, evaluated for a whole batch at one time.
///
/// Implementations must be deterministic and must not keep mutable state, so a
/// single field can be shared by concurrent samplers.
class VelocityField {
public:
    virtual ~VelocityField() = default;

    virtual std::size_t dim() const noexcept = 0;

    /// Writes v(x_i, t) into row i of `out`; `out` has the shape of `x`.
    virtual void evaluate(const StateBatch& x, double t, StateBatch& out) const = 0;

    StateBatch operator()(const StateBatch& x, double t) const;
};

/// Adapts a per-point callable `(std::span<const double> x, double t, std::span<double> out)`.
class PointwiseVelocity final : public VelocityField {
public:
    using Fn = std::function<void(std::span<const double>, double, std::span<double>)>;

    PointwiseVelocity(std::size_t dim, Fn fn);

    std::size_t dim() const noexcept override { return m_dim; }
    void evaluate(const StateBatch& x, double t, StateBatch& out) const override;

private:
    std::size_t m_dim;
    Fn m_fn;
};

/// X_t = t * x1 + (1 - t) * x0.
StateBatch interpolate(const StateBatch& x0, const StateBatch& x1, double t);

/// Regression target of the flow objective: x1 - x0.
StateBatch velocity_target(const StateBatch& x0, const StateBatch& x1);

/// Score of the time-t marginal recovered from the velocity field:
/// grad log rho_t(x) = (t * v(x, t) - x) / (1 - t). Requires 0 < t <= 1 - delta.
StateBatch score_from_velocity(const VelocityField& v, const StateBatch& x, double t,
                               double delta = kScoreGuard);

}  // namespace rfo
