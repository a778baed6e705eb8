// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rfo/flow.hpp"
#include "rfo/noise.hpp"
#include "rfo/state_batch.hpp"

namespace rfo {

/// Isotropic Gaussian mixture sum_k w_k N(mu_k, var_k I) in R^d.
///
/// Serves as the target pi_1; the source pi_0 is always N(0, I).
class GaussianMixture {
public:
    /// `means` holds K rows of dimension d. Weights must be nonnegative and sum
    /// to one within 1e-12; variances must be positive.
    GaussianMixture(std::vector<double> weights, StateBatch means, std::vector<double> variances);

    std::size_t components() const noexcept { return m_weights.size(); }
    std::size_t dim() const noexcept { return m_means.dim(); }

    const std::vector<double>& weights() const noexcept { return m_weights; }
    const StateBatch& means() const noexcept { return m_means; }
    const std::vector<double>& variances() const noexcept { return m_variances; }

    /// Mixture mean and full covariance (d x d, row-major).
    std::vector<double> mean() const;
    std::vector<double> covariance() const;

    double log_density(std::span<const double> x) const;

    /// grad_x log density, responsibilities computed in log space.
    void score(std::span<const double> x, std::span<double> out) const;

    /// Log responsibilities log p(k | x), normalised.
    void log_responsibilities(std::span<const double> x, std::span<double> out) const;

private:
    std::vector<double> m_weights;
    StateBatch m_means;
    std::vector<double> m_variances;
};

/// The law of X_t = t X_1 + (1 - t) X_0 for X_1 ~ mixture, X_0 ~ N(0, I):
/// same weights, means t * mu_k, variances t^2 var_k + (1 - t)^2.
using MarginalLaw = GaussianMixture;

MarginalLaw marginal_at(const GaussianMixture& gm, double t);

/// Score of the time-t marginal, evaluated row-wise.
StateBatch analytic_score(const GaussianMixture& gm, const StateBatch& x, double t);

/// Exact conditional-expectation velocity E[X_1 - X_0 | X_t = x] of a mixture target.
class MixtureVelocity final : public VelocityField {
public:
    explicit MixtureVelocity(GaussianMixture gm);

    std::size_t dim() const noexcept override { return m_gm.dim(); }
    void evaluate(const StateBatch& x, double t, StateBatch& out) const override;

    const GaussianMixture& mixture() const noexcept { return m_gm; }

private:
    GaussianMixture m_gm;
};

MixtureVelocity analytic_velocity(const GaussianMixture& gm);

/// n i.i.d. draws. Per draw: one uniform selects the component, then d normals.
StateBatch sample_target(const GaussianMixture& gm, std::size_t n, NoiseSource& rng);

/// Product target on a d-coordinate grid state: coordinate j follows the
/// one-dimensional mixture `marginal`, independently of all others. Its
/// velocity field acts coordinate-wise, so each coordinate's trajectory depends
/// only on its own history and noise.
class ProductMixture {
public:
    ProductMixture(GaussianMixture marginal, std::size_t dim);

    std::size_t dim() const noexcept { return m_dim; }
    const GaussianMixture& marginal() const noexcept { return m_marginal; }

    StateBatch sample(std::size_t n, NoiseSource& rng) const;

private:
    GaussianMixture m_marginal;
    std::size_t m_dim;
};

class ProductVelocity final : public VelocityField {
public:
    explicit ProductVelocity(const ProductMixture& target);

    std::size_t dim() const noexcept override { return m_dim; }
    void evaluate(const StateBatch& x, double t, StateBatch& out) const override;

private:
    MixtureVelocity m_coordinate;
    std::size_t m_dim;
};

/// Names accepted by `mixture_preset`.
std::vector<std::string> mixture_preset_names();

/// Named 2-D toy targets ("gaussian", "two-modes", "eight-gaussians",
/// "checkerboard", "moons") and the 1-D "bimodal-1d" used for grid states.
GaussianMixture mixture_preset(std::string_view name);

/// JSON document {weights: [], means: [[]], variances: []}.
GaussianMixture mixture_from_json(const nlohmann::json& doc);
nlohmann::json mixture_to_json(const GaussianMixture& gm);
GaussianMixture load_mixture(const std::string& path);

/// Noisy two-moons point cloud (upper arc, then lower arc), scaled like the "moons" preset.
StateBatch two_moons_samples(std::size_t n, double noise, NoiseSource& rng);

struct MixtureFitOptions {
    std::size_t components = 16;
    std::size_t iterations = 200;
    double variance_floor = 1e-4;
    double tolerance = 1e-9;
};

/// Expectation-maximisation for an isotropic mixture. Means are initialised on
/// distinct data points chosen with `rng`, variances to the data variance.
GaussianMixture fit_isotropic_mixture(const StateBatch& data, const MixtureFitOptions& options,
                                      NoiseSource& rng);

}  // namespace rfo
