// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>

#include "internal.hpp"
#include "rfo/attention.hpp"
#include "rfo/error.hpp"
#include "rfo/io.hpp"
#include "rfo/metrics.hpp"
#include "rfo/mixture.hpp"
#include "rfo/mlp.hpp"
#include "rfo/samplers.hpp"
#include "rfo/train.hpp"

namespace rfo::harness {

using nlohmann::json;
using detail::SeedOutputs;

// Stream lineage per seed S (worker index of NoiseSource::derive):
//   0 source draws Z_0, 1 sampler noise (shared by every sampler: common random
//   numbers), 2 target reference draws, 3 static attention mask, 4 figure3
//   offset batch, 5 figure3 marginal reference, 6 figure3 corrections,
//   7 training evaluation batch, 1000 + k marginal reference at grid step k,
//   2000 + k permutation test at grid step k, 10000 + k per-step mask.

StateBatch probe_grid(const GaussianMixture& gm, double t, std::size_t per_axis) {
    const std::size_t d = gm.dim();
    if (d > 2) {
        throw DomainError("probe_grid supports d <= 2");
    }
    if (per_axis < 2) {
        throw DomainError("probe_grid needs at least 2 points per axis");
    }
    const MarginalLaw law = marginal_at(gm, t);
    const std::vector<double> mean = law.mean();
    const std::vector<double> cov = law.covariance();
    std::vector<std::vector<double>> axes(d);
    for (std::size_t j = 0; j < d; ++j) {
        const double sd = std::sqrt(cov[j * d + j]);
        const double lo = mean[j] - 2.0 * sd;
        const double hi = mean[j] + 2.0 * sd;
        for (std::size_t k = 0; k < per_axis; ++k) {
            axes[j].push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(per_axis - 1));
        }
    }
    const std::size_t n = d == 1 ? per_axis : per_axis * per_axis;
    StateBatch grid(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        grid(i, 0) = axes[0][d == 1 ? i : i / per_axis];
        if (d == 2) {
            grid(i, 1) = axes[1][i % per_axis];
        }
    }
    return grid;
}

namespace {

struct Setup {
    GaussianMixture target;
    std::shared_ptr<const VelocityField> velocity;
    std::optional<ProductMixture> product;
};

GaussianMixture build_target(const TargetSettings& settings) {
    GaussianMixture base = settings.path.empty() ? mixture_preset(settings.preset) : load_mixture(settings.path);
    if (settings.fit == "direct") {
        return base;
    }
    // EM fit on a fixed data set, independent of the run seeds so every seed sees the same target.
    NoiseSource rng = NoiseSource::derive(0, 0xf17);
    const StateBatch data = (settings.path.empty() && settings.preset == "moons")
                                ? two_moons_samples(settings.fit_samples, 0.1, rng)
                                : sample_target(base, settings.fit_samples, rng);
    MixtureFitOptions options;
    options.components = settings.fit_components;
    options.iterations = settings.fit_iterations;
    return fit_isotropic_mixture(data, options, rng);
}

Setup make_setup(const ExperimentConfig& cfg) {
    Setup setup{build_target(cfg.target), nullptr, std::nullopt};
    if (cfg.experiment == "amo-grid") {
        if (setup.target.dim() != 1) {
            throw ConfigError("amo-grid needs a one-dimensional target (each grid coordinate follows it)");
        }
        if (cfg.velocity.source != "analytic") {
            throw ConfigError("amo-grid uses the analytic product velocity");
        }
        setup.product.emplace(setup.target, cfg.amo.h * cfg.amo.w);
        setup.velocity = std::make_shared<ProductVelocity>(*setup.product);
        return setup;
    }
    if (cfg.velocity.source == "checkpoint") {
        auto model = std::make_shared<MlpVelocity>(load_checkpoint(cfg.velocity.checkpoint));
        if (model->dim() != setup.target.dim()) {
            throw ConfigError("checkpoint dimension " + std::to_string(model->dim()) + " != target dimension " +
                              std::to_string(setup.target.dim()));
        }
        setup.velocity = model;
    } else {
        setup.velocity = std::make_shared<MixtureVelocity>(setup.target);
    }
    if (cfg.experiment == "figure3" && cfg.figure3.offset.size() != setup.target.dim()) {
        throw ConfigError("figure3.offset has " + std::to_string(cfg.figure3.offset.size()) +
                          " entries; the target has dimension " + std::to_string(setup.target.dim()));
    }
    if (cfg.experiment == "train" && setup.target.dim() > 2) {
        throw ConfigError("the train experiment probes velocities on a lattice and supports d <= 2");
    }
    return setup;
}

StateBatch head(const StateBatch& x, std::size_t n) { return x.slice_rows(0, std::min(n, x.batch())); }

OvershootConfig overshoot_config(const ExperimentConfig& cfg, double c) {
    OvershootConfig oc;
    oc.c = c;
    oc.clamp = cfg.clamp;
    oc.noise_compensation = cfg.noise_compensation;
    return oc;
}

Trajectory run_sampler(const std::string& name, const VelocityField& v, const TimeGrid& grid, const StateBatch& z0,
                       double c, const ExperimentConfig& cfg, NoiseSource& rng, const SampleOptions& options) {
    const OvershootConfig oc = overshoot_config(cfg, c);
    if (name == "euler") {
        return euler_sample(v, grid, z0, options);
    }
    if (name == "overshoot") {
        return overshoot_sample(v, grid, z0, oc, rng, options);
    }
    if (name == "sde") {
        return sde_sample(v, grid, z0, oc, rng, options);
    }
    if (name == "multistep") {
        return multistep_overshoot_sample(v, grid, z0, oc, cfg.inner_steps, rng, options);
    }
    throw ConfigError("sampler '" + name + "' is not available here");
}

std::size_t wins_needed(double fraction, std::size_t n) {
    return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
}

std::string key_of(const std::string& prefix, double c, std::size_t steps) {
    return prefix + "_c" + format_double(c) + "_N" + std::to_string(steps);
}

bool column_bitwise_equal(const StateBatch& a, const StateBatch& b, std::size_t col) {
    for (std::size_t i = 0; i < a.batch(); ++i) {
        const double x = a(i, col);
        const double y = b(i, col);
        if (std::memcmp(&x, &y, sizeof x) != 0) {
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------- marginal-check

void marginal_check_seed(const ExperimentConfig& cfg, const Setup& setup, std::uint64_t seed, SeedOutputs& out,
                         SeedRun& run) {
    const GaussianMixture& gm = setup.target;
    const StateBatch z0 = NoiseSource::derive(seed, 0).normal_batch(cfg.paths, gm.dim());
    for (const auto& sampler : cfg.samplers) {
        const std::vector<double> cs = sampler == "euler" ? std::vector<double>{0.0} : cfg.c_values;
        for (double c : cs) {
            for (std::size_t steps : cfg.grid_steps) {
                const TimeGrid grid = TimeGrid::uniform(steps);
                NoiseSource rng = NoiseSource::derive(seed, 1);
                const Trajectory traj = run_sampler(sampler, *setup.velocity, grid, z0, c, cfg, rng, {});
                const std::string series = detail::series_name(sampler, c, steps);
                std::string failures;
                std::size_t failed = 0;
                std::set<std::size_t> seen;
                for (double tau : cfg.times) {
                    const auto k = static_cast<std::size_t>(
                        std::clamp<long long>(std::llround(tau * static_cast<double>(steps)), 1,
                                              static_cast<long long>(steps)));
                    if (!seen.insert(k).second) {
                        continue;
                    }
                    const double t = grid[k];
                    const StateBatch& state = traj[k].state;
                    const MarginalLaw law = marginal_at(gm, t);
                    const json ctx = {{"sampler", sampler}, {"c", c}, {"steps", steps}, {"step", k}, {"time", t}};

                    MetricReport moments = moment_test(state, law, cfg.metrics.z_threshold);
                    moments.seed = seed;
                    const bool moments_ok = moments.verdict == Verdict::pass;
                    out.add_report(moments, ctx, moments_ok);

                    NoiseSource ref_rng = NoiseSource::derive(seed, 1000 + k);
                    const StateBatch reference = sample_target(law, cfg.metrics.test_samples, ref_rng);
                    NoiseSource perm_rng = NoiseSource::derive(seed, 2000 + k);
                    const MetricReport energy = energy_test(head(state, cfg.metrics.test_samples), reference,
                                                            cfg.metrics.permutations, cfg.metrics.alpha, perm_rng);
                    const bool energy_ok = energy.verdict == Verdict::pass;
                    out.add_report(energy, ctx, energy_ok);

                    if (!moments_ok || !energy_ok) {
                        ++failed;
                        failures += " t=" + format_double(t) + (moments_ok ? "" : "[moments z=" +
                                    format_double(moments.value) + "]") +
                                    (energy_ok ? "" : "[energy p=" + format_double(energy.details.at("p_value")) + "]");
                    }
                }
                run.summary[series + "_failed_times"] = static_cast<double>(failed);
                out.add_points(series, traj.final_state(), cfg.points_per_series);
                out.add_gate({"marginal " + series, failed == 0,
                              failed == 0 ? "all checked times consistent with the marginal law"
                                          : "failed at" + failures});
            }
        }
    }
}

// ---------------------------------------------------------------- figure3

void figure3_seed(const ExperimentConfig& cfg, const Setup& setup, std::uint64_t seed, SeedOutputs& out,
                  SeedRun& run) {
    const GaussianMixture& gm = setup.target;
    const VelocityField& v = *setup.velocity;
    const Figure3Settings& f3 = cfg.figure3;
    const std::size_t energy_n = cfg.metrics.energy_samples;
    const std::size_t steps = f3.steps;
    const TimeGrid grid = TimeGrid::uniform(steps);
    const StateBatch z0 = NoiseSource::derive(seed, 0).normal_batch(cfg.paths, gm.dim());
    NoiseSource target_rng = NoiseSource::derive(seed, 2);
    const StateBatch reference = sample_target(gm, cfg.reference_samples, target_rng);
    const StateBatch reference_head = head(reference, energy_n);
    out.add_points("target", reference, cfg.points_per_series);

    // Top panel: final clouds of Euler and overshoot at each c against the target.
    const SampleOptions final_only{steps};
    const StateBatch euler_final = euler_sample(v, grid, z0, final_only).final_state();
    MetricReport euler_ed = energy_distance(head(euler_final, energy_n), reference_head);
    euler_ed.seed = seed;
    out.add_report(euler_ed, {{"panel", "top"}, {"sampler", "euler"}, {"c", 0.0}, {"steps", steps}});
    out.add_points("top_euler", euler_final, cfg.points_per_series);
    run.summary["top_euler"] = euler_ed.value;

    std::vector<double> sweep = f3.c_sweep;
    if (std::find(sweep.begin(), sweep.end(), f3.gate_c) == sweep.end()) {
        sweep.push_back(f3.gate_c);
    }
    double gate_value = 0.0;
    for (double c : sweep) {
        NoiseSource rng = NoiseSource::derive(seed, 1);
        const StateBatch final = overshoot_sample(v, grid, z0, overshoot_config(cfg, c), rng, final_only).final_state();
        MetricReport ed = energy_distance(head(final, energy_n), reference_head);
        ed.seed = seed;
        out.add_report(ed, {{"panel", "top"}, {"sampler", "overshoot"}, {"c", c}, {"steps", steps}});
        out.add_points(detail::series_name("top_overshoot", c, steps), final, cfg.points_per_series);
        run.summary[key_of("top_overshoot", c, steps)] = ed.value;
        if (c == f3.gate_c) {
            gate_value = ed.value;
        }
    }
    run.summary["top_gate_overshoot"] = gate_value;
    run.summary["top_win"] = gate_value <= euler_ed.value ? 1.0 : 0.0;

    // Bottom panel: repeated (overshoot - Euler) corrections at a fixed time.
    double tau = f3.correction_time;
    StateBatch batch(1, gm.dim());
    if (f3.bottom_source == "euler") {
        const auto k = static_cast<std::size_t>(std::clamp<long long>(
            std::llround(tau * static_cast<double>(steps)), 1, static_cast<long long>(steps) - 1));
        tau = grid[k];
        batch = head(euler_sample(v, grid, z0)[k].state, energy_n);
    } else {
        NoiseSource offset_rng = NoiseSource::derive(seed, 4);
        batch = sample_target(marginal_at(gm, tau), energy_n, offset_rng);
        for (std::size_t i = 0; i < batch.batch(); ++i) {
            for (std::size_t j = 0; j < batch.dim(); ++j) {
                batch(i, j) += f3.offset[j];
            }
        }
    }
    const double s = std::min(tau + 1.0 / static_cast<double>(steps), 1.0);
    NoiseSource law_rng = NoiseSource::derive(seed, 5);
    const StateBatch law_reference = sample_target(marginal_at(gm, tau), energy_n, law_rng);
    MetricReport before = energy_distance(batch, law_reference);
    before.seed = seed;
    out.add_report(before, {{"panel", "bottom"}, {"applications", 0}, {"time", tau}, {"c", f3.correction_c}});
    out.add_points("bottom_before", batch, cfg.points_per_series);

    NoiseSource correction_rng = NoiseSource::derive(seed, 6);
    OvershootConfig oc = overshoot_config(cfg, f3.correction_c);
    for (std::size_t a = 0; a < f3.applications; ++a) {
        batch = overshoot_correction(v, batch, tau, s, oc, correction_rng);
    }
    MetricReport after = energy_distance(batch, law_reference);
    after.seed = seed;
    out.add_report(after,
                   {{"panel", "bottom"}, {"applications", f3.applications}, {"time", tau}, {"c", f3.correction_c}});
    out.add_points("bottom_after", batch, cfg.points_per_series);
    run.summary["bottom_before"] = before.value;
    run.summary["bottom_after"] = after.value;
    run.summary["bottom_win"] = after.value < before.value ? 1.0 : 0.0;
}

void figure3_cross(const ExperimentConfig& cfg, RunResult& result) {
    std::size_t top = 0;
    std::size_t bottom = 0;
    for (const auto& s : result.seeds) {
        top += s.summary.at("top_win") > 0.5 ? 1 : 0;
        bottom += s.summary.at("bottom_win") > 0.5 ? 1 : 0;
    }
    const std::size_t n = result.seeds.size();
    const std::size_t top_need = wins_needed(cfg.figure3.top_win_fraction, n);
    const std::size_t bottom_need = wins_needed(cfg.figure3.bottom_win_fraction, n);
    result.gates.push_back({"figure3 top: overshoot c=" + format_double(cfg.figure3.gate_c) + " <= euler",
                            top >= top_need,
                            std::to_string(top) + " of " + std::to_string(n) + " seeds (need " +
                                std::to_string(top_need) + ")"});
    result.gates.push_back({"figure3 bottom: corrections reduce energy distance", bottom >= bottom_need,
                            std::to_string(bottom) + " of " + std::to_string(n) + " seeds (need " +
                                std::to_string(bottom_need) + ")"});
}

// ---------------------------------------------------------------- step-ablation

void step_ablation_seed(const ExperimentConfig& cfg, const Setup& setup, std::uint64_t seed, SeedOutputs& out,
                        SeedRun& run) {
    const GaussianMixture& gm = setup.target;
    const double c = cfg.c_values.front();
    const StateBatch z0 = NoiseSource::derive(seed, 0).normal_batch(cfg.paths, gm.dim());
    NoiseSource target_rng = NoiseSource::derive(seed, 2);
    const StateBatch reference = head(sample_target(gm, cfg.reference_samples, target_rng), cfg.metrics.energy_samples);
    for (std::size_t steps : cfg.grid_steps) {
        const TimeGrid grid = TimeGrid::uniform(steps);
        for (const auto& sampler : cfg.samplers) {
            NoiseSource rng = NoiseSource::derive(seed, 1);
            const StateBatch final =
                run_sampler(sampler, *setup.velocity, grid, z0, c, cfg, rng, SampleOptions{steps}).final_state();
            MetricReport ed = energy_distance(head(final, cfg.metrics.energy_samples), reference);
            ed.seed = seed;
            out.add_report(ed, {{"sampler", sampler}, {"c", c}, {"steps", steps}});
            out.add_points(detail::series_name(sampler, c, steps), final, cfg.points_per_series);
            run.summary[key_of(sampler, c, steps)] = ed.value;
        }
    }
}

void step_ablation_cross(const ExperimentConfig& cfg, RunResult& result) {
    const auto has = [&](const char* name) {
        return std::find(cfg.samplers.begin(), cfg.samplers.end(), name) != cfg.samplers.end();
    };
    if (!has("overshoot") || !has("sde")) {
        return;  // a single sampler only emits its table
    }
    const double c = cfg.c_values.front();
    const std::size_t n = result.seeds.size();
    const auto in_grid = [&](std::size_t steps) {
        return std::find(cfg.grid_steps.begin(), cfg.grid_steps.end(), steps) != cfg.grid_steps.end();
    };
    for (std::size_t steps : cfg.ablation.low_steps) {
        if (!in_grid(steps)) {
            continue;
        }
        std::size_t wins = 0;
        for (const auto& s : result.seeds) {
            wins += s.summary.at(key_of("overshoot", c, steps)) <= s.summary.at(key_of("sde", c, steps)) ? 1 : 0;
        }
        const std::size_t need = wins_needed(cfg.ablation.win_fraction, n);
        result.gates.push_back({"step-ablation N=" + std::to_string(steps) + ": overshoot <= sde", wins >= need,
                                std::to_string(wins) + " of " + std::to_string(n) + " seeds (need " +
                                    std::to_string(need) + ")"});
    }
    const std::size_t big = cfg.ablation.converged_steps;
    if (in_grid(big)) {
        double over = 0.0;
        double sde = 0.0;
        for (const auto& s : result.seeds) {
            over += s.summary.at(key_of("overshoot", c, big));
            sde += s.summary.at(key_of("sde", c, big));
        }
        const double ratio = std::max(over, sde) / std::max(std::min(over, sde), 1e-300);
        result.gates.push_back({"step-ablation N=" + std::to_string(big) + ": distances within " +
                                    format_double(cfg.ablation.converged_ratio) + "x",
                                ratio <= cfg.ablation.converged_ratio,
                                "mean overshoot " + format_double(over / static_cast<double>(n)) + ", mean sde " +
                                    format_double(sde / static_cast<double>(n)) + ", ratio " + format_double(ratio)});
    }
}

// ---------------------------------------------------------------- amo-grid

void amo_grid_seed(const ExperimentConfig& cfg, const Setup& setup, std::uint64_t seed, SeedOutputs& out,
                   SeedRun& run) {
    const AmoSettings& settings = cfg.amo;
    const std::size_t d = settings.h * settings.w;
    const VelocityField& v = *setup.velocity;
    const std::size_t steps = cfg.grid_steps.front();
    const double c = cfg.c_values.front();
    const TimeGrid grid = TimeGrid::uniform(steps);
    const OvershootConfig oc = overshoot_config(cfg, c);
    const StateBatch z0 = NoiseSource::derive(seed, 0).normal_batch(cfg.paths, d);

    auto make_mask = [&](NoiseSource rng) {
        if (settings.scenario == "zeros") {
            return AttentionMask::constant(settings.h, settings.w, 0.0);
        }
        if (settings.scenario == "ones") {
            return AttentionMask::constant(settings.h, settings.w, 1.0);
        }
        return build_mask(synthetic_attention(settings.scenario, settings.h, settings.w, settings.tokens, rng), settings.temperature);
    };
    MaskProvider provider;
    if (settings.mask_mode == "static") {
        provider = static_mask(make_mask(NoiseSource::derive(seed, 3)));
    } else {
        provider = [&](std::size_t k, double) { return make_mask(NoiseSource::derive(seed, 10000 + k)); };
    }
    std::vector<AttentionMask> used;
    const MaskProvider recording = [&](std::size_t k, double t) {
        used.push_back(provider(k, t));
        return used.back();
    };

    const SampleOptions final_only{steps};
    const StateBatch euler = euler_sample(v, grid, z0, final_only).final_state();
    NoiseSource over_rng = NoiseSource::derive(seed, 1);
    const StateBatch over = overshoot_sample(v, grid, z0, oc, over_rng, final_only).final_state();
    NoiseSource amo_rng = NoiseSource::derive(seed, 1);
    const StateBatch amo = amo_sample(v, grid, z0, oc, recording, amo_rng, final_only).final_state();

    std::vector<std::size_t> zero_cells;
    std::vector<std::size_t> one_cells;
    std::vector<std::size_t> touched_cells;
    for (std::size_t j = 0; j < d; ++j) {
        bool always_zero = true;
        bool always_one = true;
        for (const auto& m : used) {
            always_zero = always_zero && m[j] == 0.0;
            always_one = always_one && m[j] == 1.0;
        }
        if (always_zero) {
            zero_cells.push_back(j);
        } else {
            touched_cells.push_back(j);
        }
        if (always_one) {
            one_cells.push_back(j);
        }
    }
    std::size_t zero_equal = 0;
    for (std::size_t j : zero_cells) {
        zero_equal += column_bitwise_equal(amo, euler, j) ? 1 : 0;
    }
    std::size_t one_equal = 0;
    for (std::size_t j : one_cells) {
        one_equal += column_bitwise_equal(amo, over, j) ? 1 : 0;
    }
    std::size_t touched_differ = 0;
    for (std::size_t j : touched_cells) {
        touched_differ += column_bitwise_equal(amo, euler, j) ? 0 : 1;
    }
    const std::string mode = settings.scenario + "/" + settings.mask_mode;
    out.add_gate({"amo " + mode + ": m=0 coordinates byte-identical to euler", zero_equal == zero_cells.size(),
                  std::to_string(zero_equal) + " of " + std::to_string(zero_cells.size()) + " cells"});
    out.add_gate({"amo " + mode + ": m=1 coordinates byte-identical to overshoot", one_equal == one_cells.size(),
                  std::to_string(one_equal) + " of " + std::to_string(one_cells.size()) + " cells"});
    if (c > 0.0) {
        out.add_gate({"amo " + mode + ": masked coordinates differ from euler",
                      touched_differ == touched_cells.size(),
                      std::to_string(touched_differ) + " of " + std::to_string(touched_cells.size()) + " cells"});
    }
    if (settings.scenario == "zeros") {
        out.add_gate({"amo zeros: whole batch byte-identical to euler",
                      bitwise_equal(amo.values(), euler.values()), ""});
    }
    run.summary["cells_zero"] = static_cast<double>(zero_cells.size());
    run.summary["cells_one"] = static_cast<double>(one_cells.size());
    run.summary["cells_masked"] = static_cast<double>(touched_cells.size());

    // Per-region marginals: pooled coordinate values against the 1-D target.
    NoiseSource target_rng = NoiseSource::derive(seed, 2);
    const std::size_t energy_n = cfg.metrics.energy_samples;
    const StateBatch reference = sample_target(setup.target, energy_n, target_rng);
    auto pooled = [&](const StateBatch& x, const std::vector<std::size_t>& cells) {
        std::vector<double> values;
        for (std::size_t i = 0; i < x.batch() && values.size() < energy_n; ++i) {
            for (std::size_t j : cells) {
                if (values.size() == energy_n) {
                    break;
                }
                values.push_back(x(i, j));
            }
        }
        const std::size_t n = values.size();
        return StateBatch(n, 1, std::move(values));
    };
    const std::pair<const char*, const std::vector<std::size_t>*> regions[] = {{"masked", &touched_cells},
                                                                               {"unmasked", &zero_cells}};
    const std::pair<const char*, const StateBatch*> samplers[] = {{"euler", &euler}, {"overshoot", &over},
                                                                  {"amo", &amo}};
    for (const auto& [region, cells] : regions) {
        if (cells->empty()) {
            continue;
        }
        for (const auto& [name, final] : samplers) {
            MetricReport ed = energy_distance(pooled(*final, *cells), reference);
            ed.seed = seed;
            out.add_report(ed, {{"region", region}, {"sampler", name}, {"cells", cells->size()}, {"c", c},
                                {"steps", steps}, {"scenario", settings.scenario}, {"mask_mode", settings.mask_mode}});
        }
    }

    out.add_file("mask.json", mask_to_json(used.front()).dump() + "\n");
    out.add_file("mask.csv", mask_to_csv(used.front()));
    out.add_points("euler", euler, cfg.points_per_series);
    out.add_points("overshoot", over, cfg.points_per_series);
    out.add_points("amo", amo, cfg.points_per_series);
}

// ---------------------------------------------------------------- train

void train_seed(const ExperimentConfig& cfg, const Setup& setup, std::uint64_t seed, SeedOutputs& out,
                SeedRun& run) {
    const GaussianMixture& gm = setup.target;
    const std::size_t d = gm.dim();
    TrainConfig tc = cfg.train.config;
    tc.seed = seed;

    NoiseSource eval_rng = NoiseSource::derive(seed, 7);
    const std::size_t n_eval = cfg.train.eval_samples;
    const StateBatch x0 = eval_rng.normal_batch(n_eval, d);
    const StateBatch x1 = sample_target(gm, n_eval, eval_rng);
    std::vector<double> t_eval(n_eval);
    for (double& t : t_eval) {
        t = eval_rng.uniform();
    }

    TrainConfig init_cfg = tc;
    init_cfg.steps = 0;
    const double initial_loss = rf_loss(train(gm, init_cfg).model, x0, x1, t_eval);

    const StateBatch score_probe = probe_grid(gm, 0.5);
    const StateBatch score_ref = analytic_score(gm, score_probe, 0.5);
    auto score_rms = [&](const MlpVelocity& model) {
        const StateBatch est = score_from_velocity(model, score_probe, 0.5);
        double ss = 0.0;
        for (std::size_t i = 0; i < est.size(); ++i) {
            const double diff = est.values()[i] - score_ref.values()[i];
            ss += diff * diff;
        }
        return std::sqrt(ss / static_cast<double>(score_probe.batch()));
    };
    const std::size_t every = cfg.train.checkpoints > 0 ? std::max<std::size_t>(1, tc.steps / cfg.train.checkpoints) : 0;
    const TrainObserver observer = [&](std::size_t step, const MlpVelocity& model) {
        MetricReport r;
        r.metric = "score_rms_error";
        r.value = score_rms(model);
        r.n_a = score_probe.batch();
        r.seed = seed;
        out.add_report(r, {{"step", step}, {"time", 0.5}});
    };
    const TrainResult result = train(gm, tc, observer, every);
    const double final_loss = rf_loss(result.model, x0, x1, t_eval);

    MetricReport loss0;
    loss0.metric = "rf_loss";
    loss0.value = initial_loss;
    loss0.n_a = n_eval;
    loss0.seed = seed;
    out.add_report(loss0, {{"stage", "initial"}});
    MetricReport loss1 = loss0;
    loss1.value = final_loss;
    out.add_report(loss1, {{"stage", "final"}});
    // Loss of the exact conditional-mean velocity on the same batch: the floor no model can beat.
    const MixtureVelocity exact_field(gm);
    double floor_loss = 0.0;
    for (std::size_t i = 0; i < n_eval; ++i) {
        const StateBatch a = x0.slice_rows(i, 1);
        const StateBatch b = x1.slice_rows(i, 1);
        const StateBatch v = exact_field(interpolate(a, b, t_eval[i]), t_eval[i]);
        for (std::size_t j = 0; j < d; ++j) {
            const double r = v(0, j) - (b(0, j) - a(0, j));
            floor_loss += r * r;
        }
    }
    floor_loss /= static_cast<double>(n_eval);
    MetricReport loss_floor = loss0;
    loss_floor.value = floor_loss;
    out.add_report(loss_floor, {{"stage", "analytic velocity"}});
    run.summary["loss_analytic"] = floor_loss;
    const double reduction = initial_loss > 0.0 ? (initial_loss - final_loss) / initial_loss : 0.0;
    MetricReport red;
    red.metric = "loss_reduction";
    red.value = reduction;
    red.n_a = n_eval;
    red.seed = seed;
    const std::optional<bool> red_gate =
        cfg.train.min_loss_reduction ? std::optional<bool>(reduction >= *cfg.train.min_loss_reduction) : std::nullopt;
    out.add_report(red, {{"optimizer", to_string(tc.optimizer)}, {"schedule", to_string(tc.schedule)}}, red_gate);
    if (red_gate) {
        out.add_gate({"train: loss reduced by >= " + format_double(*cfg.train.min_loss_reduction), *red_gate,
                      "reduction " + format_double(reduction)});
    }
    run.summary["loss_initial"] = initial_loss;
    run.summary["loss_final"] = final_loss;

    // Probe lattice: trained versus analytic velocity.
    const MixtureVelocity exact(gm);
    std::string header = "t";
    for (std::size_t j = 0; j < d; ++j) header += ",x_" + std::to_string(j);
    for (std::size_t j = 0; j < d; ++j) header += ",v_" + std::to_string(j);
    for (std::size_t j = 0; j < d; ++j) header += ",v_ref_" + std::to_string(j);
    out.set_points_header(header);
    double sup = 0.0;
    for (double t : {0.25, 0.5, 0.75}) {
        const StateBatch probe = probe_grid(gm, t);
        const StateBatch vm = result.model(probe, t);
        const StateBatch ve = exact(probe, t);
        for (std::size_t i = 0; i < probe.batch(); ++i) {
            std::string line = format_double(t);
            double norm = 0.0;
            for (std::size_t j = 0; j < d; ++j) line += "," + format_double(probe(i, j));
            for (std::size_t j = 0; j < d; ++j) line += "," + format_double(vm(i, j));
            for (std::size_t j = 0; j < d; ++j) {
                line += "," + format_double(ve(i, j));
                norm += (vm(i, j) - ve(i, j)) * (vm(i, j) - ve(i, j));
            }
            sup = std::max(sup, std::sqrt(norm));
            out.add_points_line(line);
        }
    }
    MetricReport vel;
    vel.metric = "velocity_sup_error";
    vel.value = sup;
    vel.seed = seed;
    const std::optional<bool> vel_gate =
        cfg.train.velocity_tolerance ? std::optional<bool>(sup <= *cfg.train.velocity_tolerance) : std::nullopt;
    out.add_report(vel, {{"times", {0.25, 0.5, 0.75}}, {"probe", "10x10 lattice, marginal mean +- 2 sd"}}, vel_gate);
    if (vel_gate) {
        out.add_gate({"train: velocity within " + format_double(*cfg.train.velocity_tolerance) + " of analytic",
                      *vel_gate, "sup error " + format_double(sup)});
    }
    run.summary["velocity_sup_error"] = sup;

    std::string loss_csv = "step,loss\n";
    for (std::size_t k = 0; k < result.losses.size(); ++k) {
        loss_csv += std::to_string(k) + "," + format_double(result.losses[k]) + "\n";
    }
    out.add_file("loss.csv", std::move(loss_csv));
    out.add_file("checkpoint.json", checkpoint_to_json(result.model).dump() + "\n");
}

using SeedFn = void (*)(const ExperimentConfig&, const Setup&, std::uint64_t, SeedOutputs&, SeedRun&);
using CrossFn = void (*)(const ExperimentConfig&, RunResult&);

struct Experiment {
    SeedFn seed;
    CrossFn cross;
};

Experiment lookup(const std::string& name) {
    if (name == "marginal-check") return {marginal_check_seed, nullptr};
    if (name == "figure3") return {figure3_seed, figure3_cross};
    if (name == "step-ablation") return {step_ablation_seed, step_ablation_cross};
    if (name == "amo-grid") return {amo_grid_seed, nullptr};
    if (name == "train") return {train_seed, nullptr};
    throw ConfigError("unknown experiment '" + name + "'");
}

json gates_to_json(const std::vector<Gate>& gates) {
    json out = json::array();
    for (const auto& g : gates) {
        out.push_back({{"name", g.name}, {"passed", g.passed}, {"detail", g.detail}});
    }
    return out;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
    const Experiment experiment = lookup(cfg.experiment);
    const Setup setup = make_setup(cfg);
    const std::filesystem::path outdir = options.outdir.empty() ? std::filesystem::path(cfg.output_dir) : options.outdir;

    RunResult result;
    result.experiment = cfg.experiment;
    result.root = outdir / cfg.experiment;
    const std::size_t n = cfg.seeds.size();
    const std::size_t threads = std::min(options.threads > 0 ? options.threads : thread_cap(), n);
    result.seeds.resize(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) {
                return;
            }
            try {
                const auto start = std::chrono::steady_clock::now();
                SeedRun& run = result.seeds[i];
                run.seed = cfg.seeds[i];
                run.directory = result.root / std::to_string(run.seed);
                SeedOutputs outputs;
                experiment.seed(cfg, setup, run.seed, outputs, run);
                run.gates = outputs.gates();
                const double wall =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                detail::write_seed_outputs(cfg, options, threads, run, outputs, wall);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    if (experiment.cross) {
        experiment.cross(cfg, result);
    }

    json summary;
    summary["experiment"] = cfg.experiment;
    summary["seeds"] = cfg.seeds;
    json per_seed = json::array();
    for (const auto& s : result.seeds) {
        per_seed.push_back({{"seed", s.seed}, {"gates", gates_to_json(s.gates)}, {"summary", s.summary}});
    }
    summary["per_seed"] = per_seed;
    summary["cross_seed_gates"] = gates_to_json(result.gates);
    summary["passed"] = result.passed();
    write_file_atomic(result.root / "summary.json", summary.dump(2) + "\n");
    return result;
}

ReplayResult replay(const std::filesystem::path& manifest_path, const std::filesystem::path& outdir) {
    namespace fs = std::filesystem;
    const json manifest = read_json_file(manifest_path);
    if (manifest.value("format", std::string()) != "rf-overshoot-manifest" || !manifest.contains("config")) {
        throw ConfigError(manifest_path.string() + " is not a run manifest");
    }
    const ExperimentConfig cfg = parse_config(manifest["config"]);
    if (cfg.seeds.size() != 1) {
        throw ConfigError("a manifest describes exactly one seed");
    }
    const fs::path original = manifest_path.parent_path();
    const fs::path target_dir = outdir / cfg.experiment / std::to_string(cfg.seeds.front());
    if (fs::exists(target_dir) && fs::equivalent(target_dir, original)) {
        throw ConfigError("replay output directory must differ from the recorded run");
    }
    RunOptions options;
    options.outdir = outdir;
    options.threads = 1;
    options.command = {"rf-overshoot", "replay", "--manifest", manifest_path.string()};

    ReplayResult result;
    result.run = run_experiment(cfg, options);
    const fs::path fresh = result.run.seeds.front().directory;
    for (const auto& [name, info] : manifest.at("outputs").items()) {
        if (fs::path(name).extension() != ".csv") {
            continue;
        }
        result.compared.push_back(name);
        const std::string recorded = fs::exists(original / name) ? read_file(original / name) : std::string();
        const std::string rerun = read_file(fresh / name);
        const bool same = recorded == rerun && fingerprint(rerun) == info.at("fnv1a64").get<std::string>();
        if (!same) {
            result.mismatched.push_back(name);
        }
    }
    return result;
}

}  // namespace rfo::harness
