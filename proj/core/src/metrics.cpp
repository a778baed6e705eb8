// SPDX-License-Identifier: Apache-2.0
#include "rfo/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

#include <nlohmann/json.hpp>

#include "rfo/error.hpp"

namespace rfo {

std::string to_string(Verdict verdict) {
    switch (verdict) {
        case Verdict::none: return "none";
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "none";
}

nlohmann::json report_to_json(const MetricReport& report) {
    nlohmann::json doc;
    doc["metric"] = report.metric;
    doc["value"] = report.value;
    doc["std_error"] = report.std_error ? nlohmann::json(*report.std_error) : nlohmann::json(nullptr);
    doc["n_a"] = report.n_a;
    doc["n_b"] = report.n_b;
    doc["seed"] = report.seed ? nlohmann::json(*report.seed) : nlohmann::json(nullptr);
    doc["verdict"] = to_string(report.verdict);
    doc["details"] = nlohmann::json::object();
    for (const auto& [key, value] : report.details) {
        doc["details"][key] = value;
    }
    return doc;
}

namespace {

double distance(std::span<const double> x, std::span<const double> y) noexcept {
    double acc = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double diff = x[j] - y[j];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

double mean_distance(const StateBatch& a, const StateBatch& b) {
    double total = 0.0;
    for (std::size_t i = 0; i < a.batch(); ++i) {
        const auto ai = a.row(i);
        double row_total = 0.0;
        for (std::size_t j = 0; j < b.batch(); ++j) {
            row_total += distance(ai, b.row(j));
        }
        total += row_total;
    }
    return total / (static_cast<double>(a.batch()) * static_cast<double>(b.batch()));
}

void require_same_dim(const StateBatch& a, const StateBatch& b, const char* context) {
    if (a.dim() != b.dim()) {
        throw ShapeError(std::string(context) + ": dimension mismatch " + std::to_string(a.dim()) + " vs " +
                         std::to_string(b.dim()));
    }
}

}  // namespace

MetricReport energy_distance(const StateBatch& a, const StateBatch& b) {
    require_same_dim(a, b, "energy_distance");
    const double xy = mean_distance(a, b);
    const double xx = mean_distance(a, a);
    const double yy = mean_distance(b, b);
    MetricReport report;
    report.metric = "energy_distance";
    report.value = std::max(0.0, 2.0 * xy - xx - yy);
    report.n_a = a.batch();
    report.n_b = b.batch();
    return report;
}

MetricReport energy_test(const StateBatch& a, const StateBatch& b, std::size_t permutations, double alpha,
                         NoiseSource& rng) {
    require_same_dim(a, b, "energy_test");
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw DomainError("energy_test: alpha must lie in (0, 1)");
    }
    const std::size_t na = a.batch();
    const std::size_t nb = b.batch();
    const std::size_t n = na + nb;
    std::vector<const double*> rows(n);
    for (std::size_t i = 0; i < na; ++i) {
        rows[i] = a.row(i).data();
    }
    for (std::size_t i = 0; i < nb; ++i) {
        rows[na + i] = b.row(i).data();
    }
    const std::size_t d = a.dim();
    // Upper triangle of the pooled distance matrix, row by row.
    std::vector<double> dist(n * (n - 1) / 2);
    {
        std::size_t k = 0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                dist[k++] = distance({rows[i], d}, {rows[j], d});
            }
        }
    }
    const double fa = static_cast<double>(na);
    const double fb = static_cast<double>(nb);
    auto statistic = [&](const std::vector<unsigned char>& label) {
        // sums[0]: both in a, sums[1]: across, sums[2]: both in b.
        std::array<double, 3> sums{0.0, 0.0, 0.0};
        std::size_t k = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const unsigned li = label[i];
            for (std::size_t j = i + 1; j < n; ++j) {
                sums[li + label[j]] += dist[k++];
            }
        }
        return std::max(0.0, 2.0 * sums[1] / (fa * fb) - 2.0 * sums[0] / (fa * fa) - 2.0 * sums[2] / (fb * fb));
    };

    std::vector<unsigned char> label(n, 0);
    std::fill(label.begin() + static_cast<std::ptrdiff_t>(na), label.end(), 1);
    const double observed = statistic(label);
    std::size_t at_least = 0;
    for (std::size_t p = 0; p < permutations; ++p) {
        for (std::size_t i = n - 1; i > 0; --i) {
            std::swap(label[i], label[rng.uniform_index(i + 1)]);
        }
        if (statistic(label) >= observed) {
            ++at_least;
        }
    }
    const double p_value = static_cast<double>(at_least + 1) / static_cast<double>(permutations + 1);

    MetricReport report;
    report.metric = "energy_test";
    report.value = observed;
    report.n_a = na;
    report.n_b = nb;
    report.seed = rng.seed();
    report.details["p_value"] = p_value;
    report.details["alpha"] = alpha;
    report.details["permutations"] = static_cast<double>(permutations);
    report.verdict = p_value < alpha ? Verdict::fail : Verdict::pass;
    return report;
}

double wasserstein2_1d(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) {
        throw ShapeError("wasserstein2_1d: empty sample");
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    // Integrate (F_a^{-1}(u) - F_b^{-1}(u))^2 over u; both quantile functions are step functions.
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double u = 0.0;
    double total = 0.0;
    while (i < a.size() && j < b.size()) {
        const double next_a = static_cast<double>(i + 1) / na;
        const double next_b = static_cast<double>(j + 1) / nb;
        const double next = std::min(next_a, next_b);
        const double diff = a[i] - b[j];
        total += (next - u) * diff * diff;
        u = next;
        if (next_a <= next) {
            ++i;
        }
        if (next_b <= next) {
            ++j;
        }
    }
    return std::sqrt(std::max(total, 0.0));
}

MetricReport sliced_wasserstein(const StateBatch& a, const StateBatch& b, std::size_t projections, NoiseSource& rng) {
    require_same_dim(a, b, "sliced_wasserstein");
    if (projections == 0) {
        throw DomainError("sliced_wasserstein: at least one projection is required");
    }
    const std::size_t d = a.dim();
    std::vector<double> direction(d);
    std::vector<double> pa(a.batch());
    std::vector<double> pb(b.batch());
    std::vector<double> values;
    values.reserve(projections);
    for (std::size_t p = 0; p < projections; ++p) {
        double norm = 0.0;
        do {
            norm = 0.0;
            for (double& x : direction) {
                x = rng.normal();
                norm += x * x;
            }
        } while (norm == 0.0);
        norm = std::sqrt(norm);
        for (double& x : direction) {
            x /= norm;
        }
        auto project = [&](const StateBatch& s, std::vector<double>& out) {
            for (std::size_t i = 0; i < s.batch(); ++i) {
                const auto r = s.row(i);
                out[i] = std::inner_product(r.begin(), r.end(), direction.begin(), 0.0);
            }
        };
        project(a, pa);
        project(b, pb);
        values.push_back(wasserstein2_1d(pa, pb));
    }
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(projections);
    MetricReport report;
    report.metric = "sliced_wasserstein";
    report.value = mean;
    report.n_a = a.batch();
    report.n_b = b.batch();
    report.seed = rng.seed();
    report.details["projections"] = static_cast<double>(projections);
    if (projections > 1) {
        double ss = 0.0;
        for (double v : values) {
            ss += (v - mean) * (v - mean);
        }
        report.std_error = std::sqrt(ss / static_cast<double>(projections - 1) / static_cast<double>(projections));
    }
    return report;
}

MetricReport moment_test(const StateBatch& batch, const MarginalLaw& law, double z_threshold) {
    if (batch.dim() != law.dim()) {
        throw ShapeError("moment_test: batch dimension " + std::to_string(batch.dim()) + " != law dimension " +
                         std::to_string(law.dim()));
    }
    MetricReport report;
    report.metric = "moment_test";
    report.n_a = batch.batch();
    report.details["z_threshold"] = z_threshold;
    const std::size_t n = batch.batch();
    if (n < 2) {
        report.verdict = Verdict::inconclusive;
        return report;
    }
    const std::size_t d = batch.dim();
    const double fn = static_cast<double>(n);
    const std::vector<double> mu = law.mean();
    const std::vector<double> sigma = law.covariance();
    const std::vector<double> xbar = column_means(batch);

    auto z_score = [](double diff, double se) {
        if (se > 0.0) {
            return std::abs(diff) / se;
        }
        return diff == 0.0 ? 0.0 : INFINITY;
    };

    double max_mean_z = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        const double z = z_score(xbar[j] - mu[j], std::sqrt(sigma[j * d + j] / fn));
        report.details["mean_z_" + std::to_string(j)] = z;
        max_mean_z = std::max(max_mean_z, z);
    }
    double max_cov_z = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t k = j; k < d; ++k) {
            double sum = 0.0;
            double sum_sq = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double prod = (batch(i, j) - xbar[j]) * (batch(i, k) - xbar[k]);
                sum += prod;
                sum_sq += prod * prod;
            }
            const double c = sum / fn;
            const double var = std::max(0.0, (sum_sq - fn * c * c) / (fn - 1.0));
            const double z = z_score(c - sigma[j * d + k], std::sqrt(var / fn));
            report.details["cov_z_" + std::to_string(j) + "_" + std::to_string(k)] = z;
            max_cov_z = std::max(max_cov_z, z);
        }
    }
    report.details["max_mean_z"] = max_mean_z;
    report.details["max_cov_z"] = max_cov_z;
    report.value = std::max(max_mean_z, max_cov_z);
    report.verdict = report.value <= z_threshold ? Verdict::pass : Verdict::fail;
    return report;
}

}  // namespace rfo
