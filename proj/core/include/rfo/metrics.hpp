// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "rfo/mixture.hpp"
#include "rfo/noise.hpp"
#include "rfo/state_batch.hpp"

namespace rfo {

enum class Verdict {
    none,
    pass,
    fail,
    inconclusive,
};

std::string to_string(Verdict verdict);

struct MetricReport {
    std::string metric;
    double value = 0.0;
    std::optional<double> std_error;
    std::size_t n_a = 0;
    std::size_t n_b = 0;
    std::optional<std::uint64_t> seed;
    Verdict verdict = Verdict::none;
    std::map<std::string, double> details;
};

/// One JSON object per report (keys sorted).
nlohmann::json report_to_json(const MetricReport& report);

/// V-statistic 2 E|X - Y| - E|X - X'| - E|Y - Y'| over all ordered pairs,
/// clamped at zero.
MetricReport energy_distance(const StateBatch& a, const StateBatch& b);

/// Permutation test of equal distributions using the energy statistic.
/// value = energy distance, details["p_value"], verdict fail iff p < alpha.
MetricReport energy_test(const StateBatch& a, const StateBatch& b, std::size_t permutations, double alpha,
                         NoiseSource& rng);

/// 1-D Wasserstein-2 distance between two empirical distributions.
double wasserstein2_1d(std::vector<double> a, std::vector<double> b);

/// Mean over random unit directions of the 1-D Wasserstein-2 distance between projections.
MetricReport sliced_wasserstein(const StateBatch& a, const StateBatch& b, std::size_t projections,
                                NoiseSource& rng);

/// z-scores of the sample mean and covariance against the law's moments.
/// Mean SEs use the law's variances; covariance SEs the sample variance of
/// centred products. value = max |z|; verdict pass iff value <= z_threshold,
/// inconclusive for n < 2.
MetricReport moment_test(const StateBatch& batch, const MarginalLaw& law, double z_threshold = 4.0);

}  // namespace rfo
