// SPDX-License-Identifier: Apache-2.0
//
// Acceptance checks A1-A12. Each criterion prints one line:
//   PASS A4 marginal preservation -- <measurements>
// Run with criterion names as arguments to select a subset; the exit status
// is 0 only if every selected criterion passes.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "rfo/attention.hpp"
#include "rfo/flow.hpp"
#include "rfo/harness.hpp"
#include "rfo/metrics.hpp"
#include "rfo/mixture.hpp"
#include "rfo/mlp.hpp"
#include "rfo/noise.hpp"
#include "rfo/samplers.hpp"
#include "rfo/train.hpp"

namespace {

namespace fs = std::filesystem;
namespace h = rfo::harness;
using rfo::AttentionMask;
using rfo::NoiseSource;
using rfo::OvershootConfig;
using rfo::StateBatch;
using rfo::TimeGrid;

struct Outcome {
    bool passed = false;
    std::string detail;
};

struct Criterion {
    std::string id;
    std::string title;
    std::function<Outcome()> run;
};

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

OvershootConfig strength(double c) {
    OvershootConfig cfg;
    cfg.c = c;
    return cfg;
}

bool same_trajectory(const rfo::Trajectory& a, const rfo::Trajectory& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (!rfo::bitwise_equal(a[k].state.values(), b[k].state.values())) return false;
    }
    return true;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "rfo_acceptance" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

h::ExperimentConfig shipped_config(const std::string& file, const std::vector<std::string>& overrides = {}) {
    auto doc = h::load_config_document(fs::path(RFO_SOURCE_DIR) / "configs" / file);
    for (const auto& o : overrides) h::apply_override(doc, o);
    return h::parse_config(doc);
}

const h::Gate* find_gate(const h::RunResult& run, const std::string& prefix) {
    for (const auto& g : run.gates) {
        if (g.name.rfind(prefix, 0) == 0) return &g;
    }
    return nullptr;
}

// ---------------------------------------------------------------- A1

Outcome degeneration() {
    std::size_t compared = 0;
    std::vector<std::string> broken;
    for (const char* preset : {"gaussian", "two-modes", "moons"}) {
        const rfo::MixtureVelocity v(rfo::mixture_preset(preset));
        const StateBatch z0 = NoiseSource::derive(1, 0).normal_batch(256, 2);
        for (std::size_t n : {5u, 20u, 50u}) {
            const TimeGrid grid = TimeGrid::uniform(n);
            const auto euler = rfo::euler_sample(v, grid, z0);
            auto rng = [] { return NoiseSource::derive(1, 1); };
            std::vector<std::pair<std::string, rfo::Trajectory>> runs;
            {
                auto r = rng();
                runs.emplace_back("overshoot", rfo::overshoot_sample(v, grid, z0, strength(0.0), r));
            }
            {
                auto r = rng();
                runs.emplace_back("sde", rfo::sde_sample(v, grid, z0, strength(0.0), r));
            }
            {
                auto r = rng();
                runs.emplace_back("multistep", rfo::multistep_overshoot_sample(v, grid, z0, strength(0.0), 5, r));
            }
            {
                auto r = rng();
                runs.emplace_back("amo c=0", rfo::amo_sample(v, grid, z0, strength(0.0),
                                                             rfo::static_mask(AttentionMask::constant(1, 2, 1.0)), r));
            }
            {
                auto r = rng();
                runs.emplace_back("amo mask=0", rfo::amo_sample(v, grid, z0, strength(2.0),
                                                                rfo::static_mask(AttentionMask::constant(1, 2, 0.0)), r));
            }
            for (const auto& [name, traj] : runs) {
                ++compared;
                if (!same_trajectory(euler, traj)) {
                    broken.push_back(std::string(preset) + "/N=" + std::to_string(n) + "/" + name);
                }
            }
        }
    }
    std::string detail = std::to_string(compared - broken.size()) + "/" + std::to_string(compared) +
                         " sampler runs bitwise equal to Euler at every step";
    for (const auto& b : broken) detail += "; differs: " + b;
    return {broken.empty(), detail};
}

// ---------------------------------------------------------------- A2

Outcome coefficient_algebra() {
    // Read a and b off the step itself: v = 0, row 0 is (z = 1, xi = 0), row 1 is (z = 0, xi = 1).
    const rfo::PointwiseVelocity zero(1, [](std::span<const double>, double, std::span<double> out) { out[0] = 0.0; });
    const StateBatch z = StateBatch::from_rows({{1.0}, {0.0}});
    const StateBatch xi = StateBatch::from_rows({{0.0}, {1.0}});
    auto step_ab = [&](double t, double s, double c) {
        const StateBatch out = rfo::overshoot_step(zero, z, t, s, strength(c), xi);
        return std::pair{out(0, 0), out(1, 0)};
    };

    NoiseSource rng(2024);
    double max_a = 0.0, max_b2 = 0.0, min_b2 = 1.0;
    std::size_t monotone_violations = 0;
    const std::size_t triples = 1000;
    for (std::size_t i = 0; i < triples; ++i) {
        const double t = 0.98 * rng.uniform();
        const double eps = (1.0 - t) * (0.001 + 0.999 * rng.uniform());
        const double s = std::min(t + eps, 1.0);
        const double c = 4.0 * rng.uniform();

        // Matching X_1 and noise coefficients of a (X_o + ...) + b xi against X_s:
        // a o = s and a^2 (1 - o)^2 + b^2 = (1 - s)^2.
        const double o = std::min(s + c * (s - t), 1.0);
        const double a = s / o;
        const double b2 = (1.0 - s) * (1.0 - s) - a * a * (1.0 - o) * (1.0 - o);

        const auto [sa, sb] = step_ab(t, s, c);
        max_a = std::max(max_a, std::abs(sa - a));
        max_b2 = std::max(max_b2, std::abs(sb * sb - std::max(b2, 0.0)));
        min_b2 = std::min(min_b2, b2);

        // b as a function of o: a larger c pushes o further.
        const double c2 = c * 1.25 + 0.05;
        const auto [sa2, sb2] = step_ab(t, s, c2);
        (void)sa2;
        if (sb2 < sb) ++monotone_violations;
    }
    const bool ok = max_a <= 1e-12 && max_b2 <= 1e-12 && min_b2 >= -1e-15 && monotone_violations == 0;
    return {ok, std::to_string(triples) + " triples; max |a - s/o| " + fmt(max_a) + ", max |b^2 - ref| " + fmt(max_b2) +
                    ", min ref b^2 " + fmt(min_b2) + ", monotonicity violations " +
                    std::to_string(monotone_violations)};
}

// ---------------------------------------------------------------- A3

Outcome score_identity() {
    double worst = 0.0;
    std::size_t probes = 0;
    for (const char* preset : {"two-modes", "eight-gaussians", "moons"}) {
        const auto gm = rfo::mixture_preset(preset);
        const auto v = rfo::analytic_velocity(gm);
        NoiseSource rng = NoiseSource::derive(3, 0);
        for (double t : {0.1, 0.3, 0.5, 0.7, 0.9}) {
            const StateBatch x = rfo::sample_target(rfo::marginal_at(gm, t), 100, rng);
            const StateBatch a = rfo::score_from_velocity(v, x, t);
            const StateBatch b = rfo::analytic_score(gm, x, t);
            for (std::size_t i = 0; i < x.batch(); ++i) {
                double num = 0.0, den = 0.0;
                for (std::size_t j = 0; j < x.dim(); ++j) {
                    num += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
                    den += b(i, j) * b(i, j);
                }
                worst = std::max(worst, std::sqrt(num / den));
                ++probes;
            }
        }
    }
    return {worst < 1e-8, std::to_string(probes) + " probes (3 mixtures x 5 times x 100); max relative error " +
                              fmt(worst)};
}

// ---------------------------------------------------------------- A4

Outcome marginal_preservation() {
    const auto gm = rfo::mixture_preset("gaussian");
    const rfo::MixtureVelocity v(gm);
    const std::size_t paths = 10000;
    const std::size_t test_n = 1000;
    const StateBatch z0 = NoiseSource::derive(0, 0).normal_batch(paths, 2);
    std::size_t moment_gates = 0, moment_fail = 0, energy_gates = 0, energy_fail = 0;
    double worst_z = 0.0;
    std::string worst_at;
    double min_p = 1.0;
    for (double c : {0.5, 1.0, 2.0}) {
        for (std::size_t n : {20u, 50u}) {
            const TimeGrid grid = TimeGrid::uniform(n);
            NoiseSource rng = NoiseSource::derive(0, 1);
            const auto traj = rfo::overshoot_sample(v, grid, z0, strength(c), rng);
            for (std::size_t k = 1; k <= n; ++k) {
                const auto law = rfo::marginal_at(gm, grid[k]);
                const auto m = rfo::moment_test(traj[k].state, law, 4.0);
                ++moment_gates;
                if (m.verdict != rfo::Verdict::pass) ++moment_fail;
                if (m.value > worst_z) {
                    worst_z = m.value;
                    worst_at = "c=" + fmt(c) + " N=" + std::to_string(n) + " t=" + fmt(grid[k]);
                }
                const bool quarter = k == static_cast<std::size_t>(std::lround(0.25 * n)) ||
                                     k == static_cast<std::size_t>(std::lround(0.5 * n)) ||
                                     k == static_cast<std::size_t>(std::lround(0.75 * n)) || k == n;
                if (quarter) {
                    NoiseSource ref_rng = NoiseSource::derive(0, 1000 + k);
                    NoiseSource perm_rng = NoiseSource::derive(0, 2000 + k);
                    const StateBatch ref = rfo::sample_target(law, test_n, ref_rng);
                    const auto e = rfo::energy_test(traj[k].state.slice_rows(0, test_n), ref, 199, 0.01, perm_rng);
                    ++energy_gates;
                    if (e.verdict == rfo::Verdict::fail) ++energy_fail;
                    min_p = std::min(min_p, e.details.at("p_value"));
                }
            }
        }
    }
    return {moment_fail == 0 && energy_fail == 0,
            "moment gates failed " + std::to_string(moment_fail) + "/" + std::to_string(moment_gates) +
                " (worst |z| " + fmt(worst_z) + " at " + worst_at + "); energy tests rejected " +
                std::to_string(energy_fail) + "/" + std::to_string(energy_gates) + " (min p " + fmt(min_p) + ")"};
}

// ---------------------------------------------------------------- A5

Outcome sde_limit_order() {
    const auto gm = rfo::mixture_preset("gaussian");
    const rfo::MixtureVelocity v(gm);
    const double t = 0.5, c = 1.0;
    const std::vector<double> point{0.3, -0.2};
    const std::size_t half = 250000;  // antithetic pairs; 2 * half rows x 2 coordinates = 1e6 draws
    const std::vector<double> epsilons{0.1, 0.05, 0.025, 0.0125};

    StateBatch z(2 * half, 2);
    for (std::size_t i = 0; i < z.batch(); ++i) {
        z(i, 0) = point[0];
        z(i, 1) = point[1];
    }
    const StateBatch v0 = v(z.slice_rows(0, 1), t);

    std::vector<double> log_eps, log_mean_res, ratios;
    NoiseSource rng = NoiseSource::derive(5, 0);
    for (double eps : epsilons) {
        StateBatch xi(2 * half, 2);
        for (std::size_t i = 0; i < half; ++i) {
            for (std::size_t j = 0; j < 2; ++j) {
                const double g = rng.normal();
                xi(i, j) = g;
                xi(half + i, j) = -g;
            }
        }
        const StateBatch out = rfo::overshoot_step(v, z, t, t + eps, strength(c), xi);
        double res2 = 0.0;
        double worst_ratio_dev = 0.0;
        double ratio_at_worst = 1.0;
        for (std::size_t j = 0; j < 2; ++j) {
            double mean = 0.0;
            for (std::size_t i = 0; i < 2 * half; ++i) mean += out(i, j);
            mean /= static_cast<double>(2 * half);
            double var = 0.0;
            for (std::size_t i = 0; i < 2 * half; ++i) var += (out(i, j) - mean) * (out(i, j) - mean);
            var /= static_cast<double>(2 * half - 1);
            const double drift = (1.0 + c) * v0(0, j) - (c / t) * point[j];
            const double sde_mean = point[j] + eps * drift;
            const double sde_var = 2.0 * (1.0 - t) * c / t * eps;
            res2 += (mean - sde_mean) * (mean - sde_mean);
            const double ratio = var / sde_var;
            if (std::abs(ratio - 1.0) >= worst_ratio_dev) {
                worst_ratio_dev = std::abs(ratio - 1.0);
                ratio_at_worst = ratio;
            }
        }
        log_eps.push_back(std::log(eps));
        log_mean_res.push_back(0.5 * std::log(res2));
        ratios.push_back(ratio_at_worst);
    }
    // Least-squares slope of log residual against log eps.
    const double n = static_cast<double>(log_eps.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < log_eps.size(); ++i) {
        sx += log_eps[i];
        sy += log_mean_res[i];
        sxx += log_eps[i] * log_eps[i];
        sxy += log_eps[i] * log_mean_res[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    bool converging = true;
    for (std::size_t i = 1; i < ratios.size(); ++i) {
        converging = converging && std::abs(ratios[i] - 1.0) < std::abs(ratios[i - 1] - 1.0);
    }
    const double final_dev = std::abs(ratios.back() - 1.0);
    const double var_decay =
        std::log(std::abs(ratios.front() - 1.0) / final_dev) / std::log(epsilons.front() / epsilons.back());
    std::string ratio_text;
    for (std::size_t i = 0; i < ratios.size(); ++i) ratio_text += (i ? ", " : "") + fmt(ratios[i]);
    const bool ok = slope >= 1.8 && converging && final_dev <= 0.05;
    return {ok, "t=0.5 c=1; mean residual slope " + fmt(slope) + " (need >= 1.8); variance ratio at eps " +
                    "0.1..0.0125: " + ratio_text + " (need within 5% at 0.0125); variance residual decay order " + fmt(var_decay)};
}

// ---------------------------------------------------------------- A6, A7

Outcome low_step_ordering() {
    const auto cfg = shipped_config("step_ablation_moons.json");
    const auto run = h::run_experiment(cfg, {scratch("a6"), 0, {"acceptance", "A6"}});
    std::string detail;
    for (const auto& g : run.gates) detail += (detail.empty() ? "" : "; ") + g.name + ": " + g.detail;
    return {run.passed() && !run.gates.empty(), detail};
}

Outcome langevin_correction() {
    const auto cfg = shipped_config("figure3_moons.json");
    const auto run = h::run_experiment(cfg, {scratch("a7"), 0, {"acceptance", "A7"}});
    const h::Gate* gate = find_gate(run, "figure3 bottom");
    if (!gate) return {false, "figure3 bottom gate missing"};
    return {gate->passed, gate->detail + " (c=" + fmt(cfg.figure3.correction_c) + ", " +
                              std::to_string(cfg.figure3.applications) + " applications at t=" +
                              fmt(cfg.figure3.correction_time) + ")"};
}

// ---------------------------------------------------------------- A8

Outcome attention_selectivity() {
    const std::size_t hgt = 8, wid = 8, d = hgt * wid;
    const rfo::ProductMixture target(rfo::mixture_preset("bimodal-1d"), d);
    const rfo::ProductVelocity v(target);
    NoiseSource mask_rng = NoiseSource::derive(8, 3);
    const AttentionMask mask = rfo::build_mask(rfo::synthetic_attention("focused-block", hgt, wid, 8, mask_rng));
    const StateBatch z0 = NoiseSource::derive(8, 0).normal_batch(512, d);
    const TimeGrid grid = TimeGrid::uniform(20);
    const double c = 2.0;

    NoiseSource r_amo = NoiseSource::derive(8, 1);
    NoiseSource r_over = NoiseSource::derive(8, 1);
    const auto amo = rfo::amo_sample(v, grid, z0, strength(c), rfo::static_mask(mask), r_amo);
    const auto over = rfo::overshoot_sample(v, grid, z0, strength(c), r_over);
    const auto euler = rfo::euler_sample(v, grid, z0);

    std::size_t zeros = 0, ones = 0, zero_ok = 0, one_ok = 0, partial = 0, partial_differs = 0;
    for (std::size_t j = 0; j < d; ++j) {
        bool same_euler = true, same_over = true;
        for (std::size_t k = 0; k < amo.size(); ++k) {
            for (std::size_t i = 0; i < z0.batch(); ++i) {
                const double a[1] = {amo[k].state(i, j)};
                const double e[1] = {euler[k].state(i, j)};
                const double o[1] = {over[k].state(i, j)};
                same_euler = same_euler && rfo::bitwise_equal(a, e);
                same_over = same_over && rfo::bitwise_equal(a, o);
            }
        }
        if (mask[j] == 0.0) {
            ++zeros;
            zero_ok += same_euler;
        } else if (mask[j] == 1.0) {
            ++ones;
            one_ok += same_over;
        } else {
            ++partial;
            partial_differs += !same_euler && !same_over;
        }
    }
    const bool ok = zeros > 0 && ones > 0 && zero_ok == zeros && one_ok == ones;
    return {ok, "8x8 focused-block mask, c=2, N=20, 512 paths: m=0 cells equal to Euler " + std::to_string(zero_ok) +
                    "/" + std::to_string(zeros) + ", m=1 cells equal to overshoot " + std::to_string(one_ok) + "/" +
                    std::to_string(ones) + ", intermediate cells distinct from both " +
                    std::to_string(partial_differs) + "/" + std::to_string(partial)};
}

// ---------------------------------------------------------------- A9

Outcome gradient_correctness() {
    const std::vector<std::vector<std::size_t>> archs{{3, 2}, {3, 32, 2}, {3, 24, 24, 24, 2}};
    double worst = 0.0;
    std::size_t probes = 0;
    for (std::size_t a = 0; a < archs.size(); ++a) {
        for (std::uint64_t p = 0; p < 5; ++p) {
            NoiseSource rng = NoiseSource::derive(9, 100 * a + p);
            rfo::MlpVelocity m = rfo::MlpVelocity::initialized(archs[a], rng);
            const StateBatch x0 = rng.normal_batch(32, 2);
            const StateBatch x1 = rfo::sample_target(rfo::mixture_preset("eight-gaussians"), 32, rng);
            std::vector<double> t(32);
            for (double& x : t) x = rng.uniform();
            const auto g = rfo::grad_rf_loss(m, x0, x1, t);
            double num = 0.0, den = 0.0;
            const double step = 1e-6;
            for (std::size_t k = 0; k < m.parameter_count(); ++k) {
                const double keep = m.parameters()[k];
                m.parameters()[k] = keep + step;
                const double up = rfo::rf_loss(m, x0, x1, t);
                m.parameters()[k] = keep - step;
                const double down = rfo::rf_loss(m, x0, x1, t);
                m.parameters()[k] = keep;
                const double fd = (up - down) / (2.0 * step);
                num += (g.gradient[k] - fd) * (g.gradient[k] - fd);
                den += fd * fd;
            }
            worst = std::max(worst, std::sqrt(num / den));
            ++probes;
        }
    }
    return {worst < 1e-4, std::to_string(probes) + " probes over 3 architectures; max relative error " + fmt(worst)};
}

// ---------------------------------------------------------------- A10

Outcome training_sanity() {
    const auto cfg = shipped_config("train_constant_velocity.json");
    const auto gm = rfo::mixture_preset("gaussian");
    const auto result = rfo::train(gm, cfg.train.config);
    const rfo::MixtureVelocity exact(gm);
    double sup_const = 0.0, sup_exact = 0.0, sup_field = 0.0;
    for (double t : {0.25, 0.5, 0.75}) {
        const StateBatch probe = h::probe_grid(gm, t);
        const StateBatch vm = result.model(probe, t);
        const StateBatch ve = exact(probe, t);
        for (std::size_t i = 0; i < probe.batch(); ++i) {
            const double dc = std::hypot(vm(i, 0) - 2.0, vm(i, 1));
            const double de = std::hypot(vm(i, 0) - ve(i, 0), vm(i, 1) - ve(i, 1));
            sup_const = std::max(sup_const, dc);
            sup_exact = std::max(sup_exact, de);
            sup_field = std::max(sup_field, std::hypot(ve(i, 0) - 2.0, ve(i, 1)));
        }
    }
    return {sup_const <= 0.1, "sup |v_model - (2,0)| = " + fmt(sup_const) +
                                  " (need <= 0.1); for reference sup |v_model - v_exact| = " + fmt(sup_exact) +
                                  " and sup |v_exact - (2,0)| = " + fmt(sup_field) + " on the same probes (" +
                                  std::to_string(cfg.train.config.steps) + " training steps)"};
}

// ---------------------------------------------------------------- A11

Outcome mask_construction() {
    double worst_row = 0.0;
    NoiseSource rng = NoiseSource::derive(11, 0);
    for (int trial = 0; trial < 20; ++trial) {
        rfo::AttentionPair pair{rfo::TokenMatrix(6, 8), rfo::TokenMatrix(64, 8)};
        const double scale = trial < 10 ? 1.0 : 20.0;
        for (double& q : pair.queries.values) q = scale * rng.normal();
        for (double& k : pair.keys.values) k = scale * rng.normal();
        const auto p = rfo::attention_probabilities(pair);
        for (std::size_t i = 0; i < p.rows; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < p.cols; ++j) row += p(i, j);
            worst_row = std::max(worst_row, std::abs(row - 1.0));
        }
    }

    bool bounds = true;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<rfo::AttentionMap> maps;
        for (int m = 0; m < 3; ++m) {
            rfo::AttentionMap map{4, 5, std::vector<double>(20)};
            for (double& x : map.values) x = std::exp(rng.normal());
            maps.push_back(std::move(map));
        }
        const AttentionMask mask = rfo::aggregate_and_rescale(maps);
        const auto [lo, hi] = std::minmax_element(mask.values().begin(), mask.values().end());
        bounds = bounds && *lo == 0.0 && *hi == 1.0;
    }

    double worst_mass = 1.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        NoiseSource mrng = NoiseSource::derive(11, 100 + seed);
        const AttentionMask mask = rfo::build_mask(rfo::synthetic_attention("focused-block", 8, 8, 8, mrng));
        const auto block = rfo::default_focus_block(8, 8);
        double inside = 0.0, total = 0.0;
        for (std::size_t r = 0; r < 8; ++r)
            for (std::size_t c = 0; c < 8; ++c) {
                total += mask[r * 8 + c];
                if (block.contains(r, c)) inside += mask[r * 8 + c];
            }
        worst_mass = std::min(worst_mass, inside / total);
    }
    const bool ok = worst_row <= 1e-12 && bounds && worst_mass >= 0.9;
    return {ok, "max |row sum - 1| " + fmt(worst_row) + "; rescale hits [0, 1]: " + (bounds ? "yes" : "no") +
                    "; min focused-block mass fraction " + fmt(worst_mass) + " over 10 masks"};
}

// ---------------------------------------------------------------- A12

Outcome reproducibility() {
    struct Case {
        std::string file;
        std::vector<std::string> overrides;
    };
    const std::vector<Case> cases{
        {"marginal_check_gaussian.json", {"paths=2000", "metrics.test_samples=500", "seeds=[0]"}},
        {"figure3_moons.json", {"seeds=[2]", "paths=1000", "metrics.energy_samples=500"}},
        {"step_ablation_moons.json", {"seeds=[4]", "paths=1000", "metrics.energy_samples=500"}},
        {"amo_grid_focused.json", {}},
        {"amo_grid_per_step.json", {}},
        {"train_moons.json", {"train.steps=300"}},
    };
    std::size_t files = 0;
    std::vector<std::string> problems;
    for (const auto& c : cases) {
        const auto cfg = shipped_config(c.file, c.overrides);
        const fs::path first = scratch("a12_" + c.file);
        const fs::path second = scratch("a12_replay_" + c.file);
        const auto run = h::run_experiment(cfg, {first, 0, {"acceptance", "A12"}});
        for (const auto& seed : run.seeds) {
            const auto replayed = h::replay(seed.directory / "manifest.json", second);
            files += replayed.compared.size();
            if (!replayed.identical()) {
                problems.push_back(c.file + ":" + (replayed.mismatched.empty() ? std::string("no csv outputs")
                                                                               : replayed.mismatched.front()));
            }
        }
    }
    std::string detail = std::to_string(files) + " CSV files replayed from manifests across " +
                         std::to_string(cases.size()) + " runs";
    for (const auto& p : problems) detail += "; mismatch " + p;
    return {problems.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {"A1", "degeneration", degeneration},
        {"A2", "coefficient algebra", coefficient_algebra},
        {"A3", "score identity", score_identity},
        {"A4", "marginal preservation", marginal_preservation},
        {"A5", "SDE-limit order", sde_limit_order},
        {"A6", "low-step ordering", low_step_ordering},
        {"A7", "Langevin correction", langevin_correction},
        {"A8", "attention modulation selectivity", attention_selectivity},
        {"A9", "gradient correctness", gradient_correctness},
        {"A10", "training sanity", training_sanity},
        {"A11", "mask construction", mask_construction},
        {"A12", "reproducibility", reproducibility},
    };
    std::vector<std::string> wanted(argv + 1, argv + argc);
    for (const auto& w : wanted) {
        if (std::none_of(all.begin(), all.end(), [&](const Criterion& c) { return c.id == w; })) {
            std::cerr << "unknown criterion " << w << "\n";
            return 2;
        }
    }
    bool all_passed = true;
    for (const auto& c : all) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cout << (o.passed ? "PASS " : "FAIL ") << c.id << " " << c.title << " -- " << o.detail << " ["
                  << fmt(secs) << " s]" << std::endl;
        all_passed = all_passed && o.passed;
    }
    return all_passed ? 0 : 1;
}
