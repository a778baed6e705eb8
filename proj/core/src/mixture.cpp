// SPDX-License-Identifier: Apache-2.0
#include "rfo/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <nlohmann/json.hpp>

#include "rfo/error.hpp"
#include "rfo/io.hpp"

namespace rfo {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double squared_distance(std::span<const double> x, std::span<const double> mu, double scale) {
    double acc = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double d = x[j] - scale * mu[j];
        acc += d * d;
    }
    return acc;
}

/// Normalises `logp` in place to log responsibilities and returns log-sum-exp.
double normalise_log(std::span<double> logp) {
    const double peak = *std::max_element(logp.begin(), logp.end());
    if (peak == kNegInf) {
        throw InvariantError("mixture has no component with positive weight");
    }
    double total = 0.0;
    for (double lp : logp) {
        total += std::exp(lp - peak);
    }
    const double lse = peak + std::log(total);
    for (double& lp : logp) {
        lp -= lse;
    }
    return lse;
}

/// Per-time quantities of the marginal mixture shared by all rows.
struct TimeSlice {
    double t = 0.0;
    std::vector<double> log_weight;  // log w_k
    std::vector<double> variance;    // s_k = t^2 var_k + (1 - t)^2
    std::vector<double> log_norm;    // -(d/2) log(2 pi s_k)
    std::vector<double> gain;        // (t var_k - (1 - t)) / s_k
};

TimeSlice make_slice(const GaussianMixture& gm, double t) {
    const std::size_t k_count = gm.components();
    const double d = static_cast<double>(gm.dim());
    TimeSlice slice;
    slice.t = t;
    slice.log_weight.resize(k_count);
    slice.variance.resize(k_count);
    slice.log_norm.resize(k_count);
    slice.gain.resize(k_count);
    for (std::size_t k = 0; k < k_count; ++k) {
        const double var = gm.variances()[k];
        const double s = t * t * var + (1.0 - t) * (1.0 - t);
        slice.log_weight[k] = gm.weights()[k] > 0.0 ? std::log(gm.weights()[k]) : kNegInf;
        slice.variance[k] = s;
        slice.log_norm[k] = -0.5 * d * std::log(2.0 * std::numbers::pi * s);
        slice.gain[k] = (t * var - (1.0 - t)) / s;
    }
    return slice;
}

/// v(x, t) = sum_k r_k [mu_k + gain_k (x - t mu_k)].
void velocity_at(const GaussianMixture& gm, const TimeSlice& slice, std::span<const double> x,
                 std::span<double> out, std::span<double> scratch) {
    const std::size_t k_count = gm.components();
    for (std::size_t k = 0; k < k_count; ++k) {
        scratch[k] = slice.log_weight[k] + slice.log_norm[k] -
                     0.5 * squared_distance(x, gm.means().row(k), slice.t) / slice.variance[k];
    }
    normalise_log(scratch.first(k_count));
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t k = 0; k < k_count; ++k) {
        const double r = std::exp(scratch[k]);
        if (r == 0.0) {
            continue;
        }
        const auto mu = gm.means().row(k);
        for (std::size_t j = 0; j < x.size(); ++j) {
            out[j] += r * (mu[j] + slice.gain[k] * (x[j] - slice.t * mu[j]));
        }
    }
}

void require_time(double t, const char* context) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw DomainError(std::string(context) + ": t must lie in [0, 1], got " + std::to_string(t));
    }
}

}  // namespace

GaussianMixture::GaussianMixture(std::vector<double> weights, StateBatch means, std::vector<double> variances)
    : m_weights(std::move(weights)), m_means(std::move(means)), m_variances(std::move(variances)) {
    if (m_weights.size() != m_means.batch() || m_variances.size() != m_means.batch()) {
        throw ShapeError("GaussianMixture: weights, means and variances disagree on K");
    }
    double total = 0.0;
    for (double w : m_weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw InvariantError("GaussianMixture: weights must be finite and nonnegative");
        }
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw InvariantError("GaussianMixture: weights sum to " + std::to_string(total) + ", expected 1");
    }
    for (double v : m_variances) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw InvariantError("GaussianMixture: variances must be positive");
        }
    }
    if (!m_means.all_finite()) {
        throw InvariantError("GaussianMixture: means must be finite");
    }
}

std::vector<double> GaussianMixture::mean() const {
    std::vector<double> m(dim(), 0.0);
    for (std::size_t k = 0; k < components(); ++k) {
        for (std::size_t j = 0; j < dim(); ++j) {
            m[j] += m_weights[k] * m_means(k, j);
        }
    }
    return m;
}

std::vector<double> GaussianMixture::covariance() const {
    const std::size_t d = dim();
    const std::vector<double> m = mean();
    std::vector<double> cov(d * d, 0.0);
    for (std::size_t k = 0; k < components(); ++k) {
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                const double di = m_means(k, i) - m[i];
                const double dj = m_means(k, j) - m[j];
                cov[i * d + j] += m_weights[k] * (di * dj + (i == j ? m_variances[k] : 0.0));
            }
        }
    }
    return cov;
}

void GaussianMixture::log_responsibilities(std::span<const double> x, std::span<double> out) const {
    const double d = static_cast<double>(dim());
    for (std::size_t k = 0; k < components(); ++k) {
        const double var = m_variances[k];
        out[k] = (m_weights[k] > 0.0 ? std::log(m_weights[k]) : kNegInf) -
                 0.5 * d * std::log(2.0 * std::numbers::pi * var) -
                 0.5 * squared_distance(x, m_means.row(k), 1.0) / var;
    }
    normalise_log(out.first(components()));
}

double GaussianMixture::log_density(std::span<const double> x) const {
    if (x.size() != dim()) {
        throw ShapeError("GaussianMixture::log_density: dimension mismatch");
    }
    const double d = static_cast<double>(dim());
    std::vector<double> logp(components());
    for (std::size_t k = 0; k < components(); ++k) {
        const double var = m_variances[k];
        logp[k] = (m_weights[k] > 0.0 ? std::log(m_weights[k]) : kNegInf) -
                  0.5 * d * std::log(2.0 * std::numbers::pi * var) -
                  0.5 * squared_distance(x, m_means.row(k), 1.0) / var;
    }
    return normalise_log(logp);
}

void GaussianMixture::score(std::span<const double> x, std::span<double> out) const {
    if (x.size() != dim() || out.size() != dim()) {
        throw ShapeError("GaussianMixture::score: dimension mismatch");
    }
    std::vector<double> logr(components());
    log_responsibilities(x, logr);
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t k = 0; k < components(); ++k) {
        const double r = std::exp(logr[k]);
        if (r == 0.0) {
            continue;
        }
        const auto mu = m_means.row(k);
        for (std::size_t j = 0; j < dim(); ++j) {
            out[j] -= r * (x[j] - mu[j]) / m_variances[k];
        }
    }
}

MarginalLaw marginal_at(const GaussianMixture& gm, double t) {
    require_time(t, "marginal_at");
    StateBatch means = gm.means();
    for (double& m : means.values()) {
        m *= t;
    }
    std::vector<double> variances(gm.components());
    for (std::size_t k = 0; k < gm.components(); ++k) {
        variances[k] = t * t * gm.variances()[k] + (1.0 - t) * (1.0 - t);
    }
    return MarginalLaw(gm.weights(), std::move(means), std::move(variances));
}

StateBatch analytic_score(const GaussianMixture& gm, const StateBatch& x, double t) {
    require_time(t, "analytic_score");
    if (x.dim() != gm.dim()) {
        throw ShapeError("analytic_score: dimension mismatch");
    }
    const MarginalLaw law = marginal_at(gm, t);
    StateBatch out(x.batch(), x.dim());
    for (std::size_t i = 0; i < x.batch(); ++i) {
        law.score(x.row(i), out.row(i));
    }
    return out;
}

MixtureVelocity::MixtureVelocity(GaussianMixture gm) : m_gm(std::move(gm)) {}

void MixtureVelocity::evaluate(const StateBatch& x, double t, StateBatch& out) const {
    require_time(t, "MixtureVelocity");
    if (x.dim() != m_gm.dim()) {
        throw ShapeError("MixtureVelocity: dimension mismatch");
    }
    require_same_shape(x, out, "MixtureVelocity");
    const TimeSlice slice = make_slice(m_gm, t);
    std::vector<double> scratch(m_gm.components());
    for (std::size_t i = 0; i < x.batch(); ++i) {
        velocity_at(m_gm, slice, x.row(i), out.row(i), scratch);
    }
}

MixtureVelocity analytic_velocity(const GaussianMixture& gm) {
    return MixtureVelocity(gm);
}

namespace {

std::size_t pick_component(const std::vector<double>& weights, double u) {
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (weights[k] <= 0.0) {
            continue;
        }
        last_positive = k;
        cumulative += weights[k];
        if (u < cumulative) {
            return k;
        }
    }
    return last_positive;
}

}  // namespace

StateBatch sample_target(const GaussianMixture& gm, std::size_t n, NoiseSource& rng) {
    if (n == 0) {
        throw DomainError("sample_target: n must be >= 1");
    }
    StateBatch out(n, gm.dim());
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = pick_component(gm.weights(), rng.uniform());
        const double sd = std::sqrt(gm.variances()[k]);
        for (std::size_t j = 0; j < gm.dim(); ++j) {
            out(i, j) = gm.means()(k, j) + sd * rng.normal();
        }
    }
    return out;
}

ProductMixture::ProductMixture(GaussianMixture marginal, std::size_t dim)
    : m_marginal(std::move(marginal)), m_dim(dim) {
    if (m_marginal.dim() != 1) {
        throw ShapeError("ProductMixture: coordinate marginal must be one-dimensional");
    }
    if (dim == 0) {
        throw ShapeError("ProductMixture: dim must be >= 1");
    }
}

StateBatch ProductMixture::sample(std::size_t n, NoiseSource& rng) const {
    if (n == 0) {
        throw DomainError("ProductMixture::sample: n must be >= 1");
    }
    StateBatch out(n, m_dim);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m_dim; ++j) {
            const std::size_t k = pick_component(m_marginal.weights(), rng.uniform());
            out(i, j) = m_marginal.means()(k, 0) + std::sqrt(m_marginal.variances()[k]) * rng.normal();
        }
    }
    return out;
}

ProductVelocity::ProductVelocity(const ProductMixture& target)
    : m_coordinate(target.marginal()), m_dim(target.dim()) {}

void ProductVelocity::evaluate(const StateBatch& x, double t, StateBatch& out) const {
    require_time(t, "ProductVelocity");
    if (x.dim() != m_dim) {
        throw ShapeError("ProductVelocity: dimension mismatch");
    }
    require_same_shape(x, out, "ProductVelocity");
    const GaussianMixture& gm = m_coordinate.mixture();
    const TimeSlice slice = make_slice(gm, t);
    std::vector<double> scratch(gm.components());
    const auto xv = x.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < xv.size(); ++i) {
        velocity_at(gm, slice, xv.subspan(i, 1), ov.subspan(i, 1), scratch);
    }
}

// ---------------------------------------------------------------- presets

namespace {

constexpr double kMoonsScale = 2.0;
constexpr double kMoonsShiftX = -0.5;
constexpr double kMoonsShiftY = -0.25;

std::vector<double> uniform_weights(std::size_t k) {
    return std::vector<double>(k, 1.0 / static_cast<double>(k));
}

GaussianMixture moons_preset() {
    constexpr std::size_t per_moon = 8;
    std::vector<double> means;
    for (std::size_t moon = 0; moon < 2; ++moon) {
        for (std::size_t j = 0; j < per_moon; ++j) {
            const double theta = std::numbers::pi * (static_cast<double>(j) + 0.5) / per_moon;
            double x = std::cos(theta);
            double y = std::sin(theta);
            if (moon == 1) {
                x = 1.0 - x;
                y = 0.5 - y;
            }
            means.push_back(kMoonsScale * (x + kMoonsShiftX));
            means.push_back(kMoonsScale * (y + kMoonsShiftY));
        }
    }
    return GaussianMixture(uniform_weights(2 * per_moon), StateBatch(2 * per_moon, 2, std::move(means)),
                           std::vector<double>(2 * per_moon, 0.06));
}

}  // namespace

std::vector<std::string> mixture_preset_names() {
    return {"gaussian", "two-modes", "eight-gaussians", "checkerboard", "moons", "bimodal-1d"};
}

GaussianMixture mixture_preset(std::string_view name) {
    if (name == "gaussian") {
        return GaussianMixture({1.0}, StateBatch::from_rows({{2.0, 0.0}}), {1.0});
    }
    if (name == "two-modes") {
        return GaussianMixture({0.5, 0.5}, StateBatch::from_rows({{-2.0, 0.0}, {2.0, 0.0}}), {0.25, 0.25});
    }
    if (name == "eight-gaussians") {
        std::vector<double> means;
        for (std::size_t k = 0; k < 8; ++k) {
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / 8.0;
            means.push_back(3.0 * std::cos(angle));
            means.push_back(3.0 * std::sin(angle));
        }
        return GaussianMixture(uniform_weights(8), StateBatch(8, 2, std::move(means)),
                               std::vector<double>(8, 0.05));
    }
    if (name == "checkerboard") {
        std::vector<double> means;
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) {
                if ((i + j) % 2 == 0) {
                    means.push_back(-1.5 + i);
                    means.push_back(-1.5 + j);
                }
            }
        }
        return GaussianMixture(uniform_weights(8), StateBatch(8, 2, std::move(means)),
                               std::vector<double>(8, 0.06));
    }
    if (name == "moons") {
        return moons_preset();
    }
    if (name == "bimodal-1d") {
        return GaussianMixture({0.5, 0.5}, StateBatch::from_rows({{-1.5}, {1.5}}), {0.1, 0.1});
    }
    throw ConfigError("unknown mixture preset '" + std::string(name) + "'");
}

StateBatch two_moons_samples(std::size_t n, double noise, NoiseSource& rng) {
    if (n == 0) {
        throw DomainError("two_moons_samples: n must be >= 1");
    }
    StateBatch out(n, 2);
    const std::size_t upper = (n + 1) / 2;
    for (std::size_t i = 0; i < n; ++i) {
        const double theta = std::numbers::pi * rng.uniform();
        double x = std::cos(theta);
        double y = std::sin(theta);
        if (i >= upper) {
            x = 1.0 - x;
            y = 0.5 - y;
        }
        x += noise * rng.normal();
        y += noise * rng.normal();
        out(i, 0) = kMoonsScale * (x + kMoonsShiftX);
        out(i, 1) = kMoonsScale * (y + kMoonsShiftY);
    }
    return out;
}

// ---------------------------------------------------------------- JSON

GaussianMixture mixture_from_json(const nlohmann::json& doc) {
    try {
        const auto weights = doc.at("weights").get<std::vector<double>>();
        const auto rows = doc.at("means").get<std::vector<std::vector<double>>>();
        const auto variances = doc.at("variances").get<std::vector<double>>();
        if (rows.empty() || rows.front().empty()) {
            throw ConfigError("mixture JSON: 'means' must be a non-empty list of non-empty points");
        }
        const std::size_t d = rows.front().size();
        std::vector<double> flat;
        flat.reserve(rows.size() * d);
        for (const auto& r : rows) {
            if (r.size() != d) {
                throw ConfigError("mixture JSON: ragged 'means'");
            }
            flat.insert(flat.end(), r.begin(), r.end());
        }
        return GaussianMixture(weights, StateBatch(rows.size(), d, std::move(flat)), variances);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("mixture JSON: ") + e.what());
    }
}

nlohmann::json mixture_to_json(const GaussianMixture& gm) {
    nlohmann::json means = nlohmann::json::array();
    for (std::size_t k = 0; k < gm.components(); ++k) {
        const auto row = gm.means().row(k);
        means.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return {{"weights", gm.weights()}, {"means", std::move(means)}, {"variances", gm.variances()}};
}

GaussianMixture load_mixture(const std::string& path) {
    return mixture_from_json(read_json_file(path));
}

}  // namespace rfo
