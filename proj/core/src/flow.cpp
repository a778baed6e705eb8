// SPDX-License-Identifier: Apache-2.0
#include "rfo/flow.hpp"

#include <string>

#include "rfo/error.hpp"

namespace rfo {

StateBatch VelocityField::operator()(const StateBatch& x, double t) const {
    StateBatch out(x.batch(), x.dim());
    evaluate(x, t, out);
    return out;
}

PointwiseVelocity::PointwiseVelocity(std::size_t dim, Fn fn) : m_dim(dim), m_fn(std::move(fn)) {}

void PointwiseVelocity::evaluate(const StateBatch& x, double t, StateBatch& out) const {
    if (x.dim() != m_dim) {
        throw ShapeError("PointwiseVelocity: input dimension mismatch");
    }
    require_same_shape(x, out, "PointwiseVelocity");
    for (std::size_t i = 0; i < x.batch(); ++i) {
        m_fn(x.row(i), t, out.row(i));
    }
}

StateBatch interpolate(const StateBatch& x0, const StateBatch& x1, double t) {
    require_same_shape(x0, x1, "interpolate");
    if (!(t >= 0.0 && t <= 1.0)) {
        throw DomainError("interpolate: t must lie in [0, 1], got " + std::to_string(t));
    }
    // The endpoint cases are returned verbatim so that t = 0 and t = 1 are exact.
    if (t == 0.0) {
        return x0;
    }
    if (t == 1.0) {
        return x1;
    }
    StateBatch out(x0.batch(), x0.dim());
    auto a = x0.values();
    auto b = x1.values();
    auto o = out.values();
    for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] = t * b[i] + (1.0 - t) * a[i];
    }
    return out;
}

StateBatch velocity_target(const StateBatch& x0, const StateBatch& x1) {
    require_same_shape(x0, x1, "velocity_target");
    StateBatch out(x0.batch(), x0.dim());
    auto a = x0.values();
    auto b = x1.values();
    auto o = out.values();
    for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] = b[i] - a[i];
    }
    return out;
}

StateBatch score_from_velocity(const VelocityField& v, const StateBatch& x, double t, double delta) {
    if (!(t > 0.0 && t <= 1.0 - delta)) {
        throw DomainError("score_from_velocity: t = " + std::to_string(t) + " outside (0, 1 - " +
                          std::to_string(delta) + "]");
    }
    StateBatch out = v(x, t);
    auto xv = x.values();
    auto o = out.values();
    const double denom = 1.0 - t;
    for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] = (t * o[i] - xv[i]) / denom;
    }
    return out;
}

}  // namespace rfo
