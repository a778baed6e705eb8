// SPDX-License-Identifier: Apache-2.0
// rf-overshoot: experiment runner for the overshooting sampler lab.
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rfo/embedded_schema.hpp"
#include "rfo/error.hpp"
#include "rfo/harness.hpp"
#include "rfo/version.hpp"

namespace {

namespace harness = rfo::harness;

constexpr int kExitRuntimeError = 3;

struct RunArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string outdir;
    std::vector<std::string> overrides;
};

void print_gates(const harness::RunResult& result) {
    for (const auto& seed : result.seeds) {
        for (const auto& g : seed.gates) {
            std::cout << (g.passed ? "PASS " : "FAIL ") << "[seed " << seed.seed << "] " << g.name;
            if (!g.detail.empty()) {
                std::cout << " -- " << g.detail;
            }
            std::cout << '\n';
        }
    }
    for (const auto& g : result.gates) {
        std::cout << (g.passed ? "PASS " : "FAIL ") << "[all seeds] " << g.name;
        if (!g.detail.empty()) {
            std::cout << " -- " << g.detail;
        }
        std::cout << '\n';
    }
    std::cout << "outputs: " << result.root.string() << '\n';
}

int run_subcommand(const std::string& experiment, const RunArgs& args, const std::vector<std::string>& argv) {
    nlohmann::json doc = harness::load_config_document(args.config);
    if (!doc.is_object()) {
        throw rfo::ConfigError(args.config + ": configuration must be a JSON object");
    }
    for (const auto& o : args.overrides) {
        harness::apply_override(doc, o);
    }
    if (args.seed) {
        doc["seeds"] = nlohmann::json::array({*args.seed});
    }
    if (doc.contains("experiment") && doc["experiment"] != experiment) {
        throw rfo::ConfigError("config is for experiment " + doc["experiment"].dump() + ", not '" + experiment + "'");
    }
    doc["experiment"] = experiment;
    const harness::ExperimentConfig cfg = harness::parse_config(doc);

    harness::RunOptions options;
    options.outdir = args.outdir;
    options.command = argv;
    const harness::RunResult result = harness::run_experiment(cfg, options);
    print_gates(result);
    return result.passed() ? harness::kExitOk : harness::kExitGateFailure;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::string> command(argv, argv + argc);
    CLI::App app{"Rectified-flow overshooting sampler lab"};
    app.set_version_flag("--version", std::string(rfo::kVersion));
    app.require_subcommand(1);

    RunArgs args;
    std::string selected;
    for (const char* name : {"marginal-check", "figure3", "step-ablation", "amo-grid", "train"}) {
        CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " experiment");
        sub->add_option("--config", args.config, "experiment config (JSON) or a run manifest")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--seed", args.seed, "run only this seed");
        sub->add_option("--outdir", args.outdir, "output root (default: output_dir from the config)");
        sub->add_option("--override", args.overrides, "key=value, dotted key, JSON value")->take_all();
        sub->callback([&selected, name] { selected = name; });
    }

    std::string manifest;
    std::string replay_outdir = (std::filesystem::temp_directory_path() / "rf-overshoot-replay").string();
    CLI::App* replay_cmd = app.add_subcommand("replay", "re-run a seed from its manifest and byte-compare CSV outputs");
    replay_cmd->add_option("--manifest", manifest, "manifest.json of a previous run")
        ->required()
        ->check(CLI::ExistingFile);
    replay_cmd->add_option("--outdir", replay_outdir, "where the re-run writes its outputs");

    std::string validate_path;
    CLI::App* validate_cmd = app.add_subcommand("validate", "check a config against the schema and exit");
    validate_cmd->add_option("--config", validate_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);

    app.add_subcommand("schema", "print the experiment config schema");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : harness::kExitConfigInvalid;
    }

    try {
        if (app.got_subcommand("schema")) {
            std::cout << rfo::harness::kEmbeddedConfigSchema;
            return harness::kExitOk;
        }
        if (app.got_subcommand("validate")) {
            harness::parse_config(harness::load_config_document(validate_path));
            std::cout << validate_path << ": valid\n";
            return harness::kExitOk;
        }
        if (app.got_subcommand("replay")) {
            const harness::ReplayResult r = harness::replay(manifest, replay_outdir);
            for (const auto& name : r.compared) {
                const bool bad = std::find(r.mismatched.begin(), r.mismatched.end(), name) != r.mismatched.end();
                std::cout << (bad ? "DIFFERS   " : "IDENTICAL ") << name << '\n';
            }
            std::cout << "replayed into " << r.run.root.string() << '\n';
            return r.identical() ? harness::kExitOk : harness::kExitGateFailure;
        }
        return run_subcommand(selected, args, command);
    } catch (const rfo::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return harness::kExitConfigInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntimeError;
    }
}
