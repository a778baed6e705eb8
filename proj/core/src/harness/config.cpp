// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <set>
#include <sstream>
#include <string>

#include "rfo/error.hpp"
#include "rfo/harness.hpp"
#include "rfo/io.hpp"

namespace rfo::harness {

using nlohmann::json;

nlohmann::json load_config_document(const std::filesystem::path& path) {
    json doc = read_json_file(path);
    if (doc.is_object() && doc.value("format", std::string()) == "rf-overshoot-manifest") {
        if (!doc.contains("config")) {
            throw ConfigError(path.string() + ": manifest has no config");
        }
        return doc["config"];
    }
    return doc;
}

void apply_override(nlohmann::json& doc, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
    }
    const std::string key(assignment.substr(0, eq));
    const std::string text(assignment.substr(eq + 1));
    json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (value.is_discarded()) {
        value = text;
    }

    json* node = &doc;
    std::stringstream parts(key);
    std::string token;
    std::vector<std::string> tokens;
    while (std::getline(parts, token, '.')) {
        if (token.empty()) {
            throw ConfigError("override key '" + key + "' has an empty component");
        }
        tokens.push_back(token);
    }
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const bool last = i + 1 == tokens.size();
        if (node->is_array()) {
            std::size_t index = 0;
            try {
                index = std::stoul(tokens[i]);
            } catch (const std::exception&) {
                throw ConfigError("override key '" + key + "': '" + tokens[i] + "' is not an array index");
            }
            if (index >= node->size()) {
                throw ConfigError("override key '" + key + "': index " + tokens[i] + " out of range");
            }
            node = &(*node)[index];
        } else {
            if (node->is_null()) {
                *node = json::object();
            }
            if (!node->is_object()) {
                throw ConfigError("override key '" + key + "': '" + tokens[i - 1] + "' is not an object");
            }
            node = &(*node)[tokens[i]];
        }
        if (last) {
            *node = value;
        }
    }
}

namespace {

template <typename T>
void read(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) {
        out = obj[key].get<T>();
    }
}

template <typename T>
void read_optional(const json& obj, const char* key, std::optional<T>& out) {
    if (obj.contains(key)) {
        if (obj[key].is_null()) {
            out.reset();
        } else {
            out = obj[key].get<T>();
        }
    }
}

const json& section(const json& doc, const char* key) {
    static const json empty = json::object();
    return doc.contains(key) ? doc[key] : empty;
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& doc) {
    std::vector<std::string> problems = validate_schema(doc, config_schema());
    if (!problems.empty()) {
        std::string message = "configuration does not match the schema:";
        for (const auto& p : problems) {
            message += "\n  " + p;
        }
        throw ConfigError(message);
    }

    ExperimentConfig cfg;
    cfg.document = doc;
    read(doc, "experiment", cfg.experiment);
    read(doc, "output_dir", cfg.output_dir);
    read(doc, "grid_steps", cfg.grid_steps);
    read(doc, "c_values", cfg.c_values);
    read(doc, "samplers", cfg.samplers);
    read(doc, "seeds", cfg.seeds);
    read(doc, "paths", cfg.paths);
    read(doc, "reference_samples", cfg.reference_samples);
    read(doc, "times", cfg.times);
    read(doc, "clamp", cfg.clamp);
    read(doc, "noise_compensation", cfg.noise_compensation);
    read(doc, "inner_steps", cfg.inner_steps);
    read(doc, "points_per_series", cfg.points_per_series);

    const json& target = section(doc, "target");
    read(target, "preset", cfg.target.preset);
    read(target, "path", cfg.target.path);
    read(target, "fit", cfg.target.fit);
    read(target, "fit_components", cfg.target.fit_components);
    read(target, "fit_iterations", cfg.target.fit_iterations);
    read(target, "fit_samples", cfg.target.fit_samples);

    const json& velocity = section(doc, "velocity");
    read(velocity, "source", cfg.velocity.source);
    read(velocity, "checkpoint", cfg.velocity.checkpoint);

    const json& metrics = section(doc, "metrics");
    read(metrics, "energy_samples", cfg.metrics.energy_samples);
    read(metrics, "test_samples", cfg.metrics.test_samples);
    read(metrics, "permutations", cfg.metrics.permutations);
    read(metrics, "alpha", cfg.metrics.alpha);
    read(metrics, "z_threshold", cfg.metrics.z_threshold);

    const json& f3 = section(doc, "figure3");
    read(f3, "steps", cfg.figure3.steps);
    read(f3, "c_sweep", cfg.figure3.c_sweep);
    read(f3, "gate_c", cfg.figure3.gate_c);
    read(f3, "top_win_fraction", cfg.figure3.top_win_fraction);
    read(f3, "correction_time", cfg.figure3.correction_time);
    read(f3, "correction_c", cfg.figure3.correction_c);
    read(f3, "applications", cfg.figure3.applications);
    read(f3, "offset", cfg.figure3.offset);
    read(f3, "bottom_source", cfg.figure3.bottom_source);
    read(f3, "bottom_win_fraction", cfg.figure3.bottom_win_fraction);

    const json& ab = section(doc, "ablation");
    read(ab, "low_steps", cfg.ablation.low_steps);
    read(ab, "converged_steps", cfg.ablation.converged_steps);
    read(ab, "converged_ratio", cfg.ablation.converged_ratio);
    read(ab, "win_fraction", cfg.ablation.win_fraction);

    const json& amo = section(doc, "amo");
    read(amo, "h", cfg.amo.h);
    read(amo, "w", cfg.amo.w);
    read(amo, "scenario", cfg.amo.scenario);
    read(amo, "tokens", cfg.amo.tokens);
    read(amo, "mask_mode", cfg.amo.mask_mode);
    read(amo, "temperature", cfg.amo.temperature);

    const json& tr = section(doc, "train");
    TrainConfig& tc = cfg.train.config;
    read(tr, "batch_size", tc.batch_size);
    read(tr, "steps", tc.steps);
    read(tr, "learning_rate", tc.learning_rate);
    if (tr.contains("optimizer")) {
        tc.optimizer = optimizer_from_string(tr["optimizer"].get<std::string>());
    }
    if (tr.contains("schedule")) {
        tc.schedule = schedule_from_string(tr["schedule"].get<std::string>());
    }
    read(tr, "rms_decay", tc.rms_decay);
    read(tr, "hidden", tc.hidden);
    read(tr, "time_law", tc.time_law);
    read(tr, "checkpoints", cfg.train.checkpoints);
    read(tr, "eval_samples", cfg.train.eval_samples);
    read_optional(tr, "min_loss_reduction", cfg.train.min_loss_reduction);
    read_optional(tr, "velocity_tolerance", cfg.train.velocity_tolerance);

    // Semantic checks the schema cannot express.
    if (target.contains("preset") && target.contains("path")) {
        problems.push_back("/target: set either 'preset' or 'path', not both");
    }
    if (cfg.velocity.source == "checkpoint" && cfg.velocity.checkpoint.empty()) {
        problems.push_back("/velocity: source 'checkpoint' needs a 'checkpoint' path");
    }
    if (cfg.experiment == "train" && cfg.velocity.source != "analytic") {
        problems.push_back("/velocity: the train experiment fits its own model; use source 'analytic'");
    }
    if (std::set<std::uint64_t>(cfg.seeds.begin(), cfg.seeds.end()).size() != cfg.seeds.size()) {
        problems.push_back("/seeds: seeds must be distinct");
    }
    for (const auto& name : cfg.samplers) {
        if (name == "amo" && cfg.experiment != "amo-grid") {
            problems.push_back("/samplers: 'amo' needs a grid state and is only available in amo-grid");
        }
    }
    if (cfg.experiment == "step-ablation") {
        for (const auto& name : cfg.samplers) {
            if (name != "overshoot" && name != "sde") {
                problems.push_back("/samplers: step-ablation compares 'overshoot' and 'sde' only");
            }
        }
    }
    for (double t : cfg.times) {
        if (!(t > 0.0)) {
            problems.push_back("/times: check times must be > 0 (the t = 0 state is the source draw)");
        }
    }
    if (cfg.experiment == "marginal-check" && cfg.metrics.test_samples > cfg.paths) {
        problems.push_back("/metrics/test_samples: cannot exceed 'paths'");
    }
    try {
        tc.validate();
    } catch (const ConfigError& e) {
        problems.push_back(std::string("/train: ") + e.what());
    }
    if (!problems.empty()) {
        std::string message = "invalid configuration:";
        for (const auto& p : problems) {
            message += "\n  " + p;
        }
        throw ConfigError(message);
    }
    return cfg;
}

}  // namespace rfo::harness
