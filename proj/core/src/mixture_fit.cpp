// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <unordered_set>

#include "rfo/error.hpp"
#include "rfo/mixture.hpp"

namespace rfo {

GaussianMixture fit_isotropic_mixture(const StateBatch& data, const MixtureFitOptions& options, NoiseSource& rng) {
    const std::size_t n = data.batch();
    const std::size_t d = data.dim();
    const std::size_t k_count = options.components;
    if (k_count == 0 || k_count > n) {
        throw DomainError("fit_isotropic_mixture: need 1 <= components <= data rows");
    }

    const std::vector<double> data_mean = column_means(data);
    double data_var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            const double c = data(i, j) - data_mean[j];
            data_var += c * c;
        }
    }
    data_var = std::max(data_var / static_cast<double>(n * d), options.variance_floor);

    StateBatch means(k_count, d);
    std::unordered_set<std::uint64_t> chosen;
    for (std::size_t k = 0; k < k_count; ++k) {
        std::uint64_t idx = rng.uniform_index(n);
        while (!chosen.insert(idx).second) {
            idx = rng.uniform_index(n);
        }
        for (std::size_t j = 0; j < d; ++j) {
            means(k, j) = data(idx, j);
        }
    }
    std::vector<double> weights(k_count, 1.0 / static_cast<double>(k_count));
    std::vector<double> variances(k_count, data_var);

    StateBatch resp(n, k_count);
    double previous = -std::numeric_limits<double>::infinity();
    const double half_d = 0.5 * static_cast<double>(d);

    for (std::size_t iter = 0; iter < options.iterations; ++iter) {
        // E-step in log space.
        double loglik = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            auto r = resp.row(i);
            double peak = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < k_count; ++k) {
                double sq = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double c = data(i, j) - means(k, j);
                    sq += c * c;
                }
                r[k] = (weights[k] > 0.0 ? std::log(weights[k]) : -std::numeric_limits<double>::infinity()) -
                       half_d * std::log(2.0 * std::numbers::pi * variances[k]) - 0.5 * sq / variances[k];
                peak = std::max(peak, r[k]);
            }
            double total = 0.0;
            for (std::size_t k = 0; k < k_count; ++k) {
                r[k] = std::exp(r[k] - peak);
                total += r[k];
            }
            for (std::size_t k = 0; k < k_count; ++k) {
                r[k] /= total;
            }
            loglik += peak + std::log(total);
        }

        // M-step.
        for (std::size_t k = 0; k < k_count; ++k) {
            double mass = 0.0;
            std::vector<double> centre(d, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double r = resp(i, k);
                mass += r;
                for (std::size_t j = 0; j < d; ++j) {
                    centre[j] += r * data(i, j);
                }
            }
            weights[k] = mass / static_cast<double>(n);
            if (mass < 1e-10) {
                continue;  // starved component keeps its mean and variance
            }
            double spread = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                centre[j] /= mass;
            }
            for (std::size_t i = 0; i < n; ++i) {
                double sq = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double c = data(i, j) - centre[j];
                    sq += c * c;
                }
                spread += resp(i, k) * sq;
            }
            for (std::size_t j = 0; j < d; ++j) {
                means(k, j) = centre[j];
            }
            variances[k] = std::max(spread / (mass * static_cast<double>(d)), options.variance_floor);
        }
        const double total_weight = std::accumulate(weights.begin(), weights.end(), 0.0);
        for (double& w : weights) {
            w /= total_weight;
        }

        if (std::abs(loglik - previous) <= options.tolerance * static_cast<double>(n)) {
            break;
        }
        previous = loglik;
    }

    return GaussianMixture(std::move(weights), std::move(means), std::move(variances));
}

}  // namespace rfo
