// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rfo/mixture.hpp"
#include "rfo/state_batch.hpp"
#include "rfo/train.hpp"

namespace rfo::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitGateFailure = 1;
inline constexpr int kExitConfigInvalid = 2;

// ---------------------------------------------------------------- schema

/// The experiment-config schema compiled into the library.
const nlohmann::json& config_schema();

/// Validates `doc` against a JSON-schema document. Supported keywords: type,
/// enum, properties, required, additionalProperties (boolean), items,
/// minItems, maxItems, minLength, minimum, maximum, exclusiveMinimum,
/// exclusiveMaximum. Annotation keywords are ignored. Returns one message per
/// violation, prefixed with its JSON pointer; empty means valid.
std::vector<std::string> validate_schema(const nlohmann::json& doc, const nlohmann::json& schema);

// ---------------------------------------------------------------- config

struct TargetSettings {
    std::string preset = "gaussian";
    std::string path;  // mixture JSON; overrides preset when set
    std::string fit = "direct";
    std::size_t fit_components = 16;
    std::size_t fit_iterations = 200;
    std::size_t fit_samples = 20000;
};

struct VelocitySettings {
    std::string source = "analytic";
    std::string checkpoint;
};

struct MetricSettings {
    std::size_t energy_samples = 2000;
    std::size_t test_samples = 1000;
    std::size_t permutations = 199;
    double alpha = 0.01;
    double z_threshold = 4.0;
};

struct Figure3Settings {
    std::size_t steps = 20;
    std::vector<double> c_sweep{0.0, 0.5, 1.0, 2.0, 4.0};
    double gate_c = 1.0;
    double top_win_fraction = 0.7;
    double correction_time = 0.5;
    double correction_c = 2.0;
    std::size_t applications = 5;
    std::vector<double> offset{0.5, 0.5};
    std::string bottom_source = "offset";
    double bottom_win_fraction = 0.8;
};

struct AblationSettings {
    std::vector<std::size_t> low_steps{10, 20};
    std::size_t converged_steps = 100;
    double converged_ratio = 2.0;
    double win_fraction = 0.7;
};

struct AmoSettings {
    std::size_t h = 8;
    std::size_t w = 8;
    std::string scenario = "focused-block";
    std::size_t tokens = 8;
    std::string mask_mode = "static";
    double temperature = 1.0;
};

struct TrainSettings {
    TrainConfig config;
    std::size_t checkpoints = 3;
    std::size_t eval_samples = 4096;
    std::optional<double> min_loss_reduction;
    std::optional<double> velocity_tolerance;
};

struct ExperimentConfig {
    std::string experiment;
    std::string output_dir = "runs";
    TargetSettings target;
    VelocitySettings velocity;
    std::vector<std::size_t> grid_steps{20};
    std::vector<double> c_values{1.0};
    std::vector<std::string> samplers{"euler", "overshoot"};
    std::vector<std::uint64_t> seeds{0};
    std::size_t paths = 10000;
    std::size_t reference_samples = 10000;
    std::vector<double> times{0.25, 0.5, 0.75, 1.0};
    bool clamp = true;
    bool noise_compensation = true;
    std::size_t inner_steps = 5;
    std::size_t points_per_series = 1000;
    MetricSettings metrics;
    Figure3Settings figure3;
    AblationSettings ablation;
    AmoSettings amo;
    TrainSettings train;

    /// The validated document the fields were read from (after overrides).
    nlohmann::json document;
};

/// Reads a config file. A run manifest is accepted too; its embedded config is returned.
nlohmann::json load_config_document(const std::filesystem::path& path);

/// Applies `key=value`, where key is a dotted path (`metrics.alpha`) and value
/// is parsed as JSON, falling back to a plain string.
void apply_override(nlohmann::json& doc, std::string_view assignment);

/// Schema validation followed by semantic checks; throws ConfigError listing every problem.
ExperimentConfig parse_config(const nlohmann::json& doc);

// ---------------------------------------------------------------- running

struct Gate {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct SeedRun {
    std::uint64_t seed = 0;
    std::filesystem::path directory;
    std::vector<Gate> gates;
    /// Experiment-specific numbers the cross-seed gates are computed from.
    std::map<std::string, double> summary;
};

struct RunResult {
    std::string experiment;
    std::filesystem::path root;  // <outdir>/<experiment>
    std::vector<SeedRun> seeds;
    std::vector<Gate> gates;     // cross-seed gates

    bool passed() const;
};

struct RunOptions {
    /// Output root; empty means ExperimentConfig::output_dir.
    std::filesystem::path outdir;
    /// Maximum concurrent seeds; 0 means thread_cap().
    std::size_t threads = 0;
    /// Command line echoed into manifests.
    std::vector<std::string> command;
};

/// Worker cap from RF_OVERSHOOT_THREADS (a positive integer), else the hardware concurrency.
std::size_t thread_cap();

/// Runs every configured seed and writes <outdir>/<experiment>/<seed>/{results.jsonl,
/// points.csv, manifest.json} plus <outdir>/<experiment>/summary.json.
RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

struct ReplayResult {
    RunResult run;
    std::vector<std::string> compared;    // file names checked
    std::vector<std::string> mismatched;  // file names whose bytes differ

    bool identical() const { return mismatched.empty() && !compared.empty(); }
};

/// Re-runs the seed recorded in `manifest` into `outdir` and byte-compares every
/// CSV output against the files next to the manifest.
ReplayResult replay(const std::filesystem::path& manifest, const std::filesystem::path& outdir);

/// Probe points for velocity checks at time t: a per_axis^d lattice (d <= 2)
/// spanning the marginal mean +- 2 standard deviations in each coordinate.
StateBatch probe_grid(const GaussianMixture& gm, double t, std::size_t per_axis = 10);

/// 64-bit FNV-1a, hex encoded; used for output fingerprints in manifests.
std::string fingerprint(std::string_view bytes);

}  // namespace rfo::harness
