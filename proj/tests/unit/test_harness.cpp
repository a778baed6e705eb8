// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "rfo/error.hpp"
#include "rfo/harness.hpp"
#include "rfo/io.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
namespace h = rfo::harness;

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("rfo_harness_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

json small_marginal() {
    return json::parse(R"({
        "experiment": "marginal-check",
        "target": {"preset": "two-modes"},
        "samplers": ["euler", "overshoot"],
        "c_values": [1.0],
        "grid_steps": [8],
        "paths": 300,
        "reference_samples": 300,
        "seeds": [3, 4],
        "points_per_series": 20,
        "metrics": {"test_samples": 100, "permutations": 19}
    })");
}

json small_amo() {
    return json::parse(R"({
        "experiment": "amo-grid",
        "target": {"preset": "bimodal-1d"},
        "c_values": [2.0],
        "grid_steps": [10],
        "paths": 64,
        "seeds": [1],
        "points_per_series": 16,
        "amo": {"h": 6, "w": 6, "scenario": "focused-block", "tokens": 4}
    })");
}

TEST(Schema, AcceptsShippedConfigs) {
    for (const auto& entry : fs::directory_iterator(fs::path(RFO_SOURCE_DIR) / "configs")) {
        const json doc = rfo::read_json_file(entry.path());
        EXPECT_TRUE(h::validate_schema(doc, h::config_schema()).empty()) << entry.path();
        EXPECT_NO_THROW((void)h::parse_config(doc)) << entry.path();
    }
}

TEST(Schema, ReportsEveryViolationWithPointer) {
    json doc = small_marginal();
    doc["paths"] = -4;
    doc["samplers"] = json::array({"euler", "rk4"});
    doc["bogus"] = true;
    const auto errors = h::validate_schema(doc, h::config_schema());
    ASSERT_EQ(errors.size(), 3u);
    bool saw_paths = false, saw_sampler = false, saw_extra = false;
    for (const auto& e : errors) {
        saw_paths = saw_paths || e.rfind("/paths", 0) == 0;
        saw_sampler = saw_sampler || e.rfind("/samplers/1", 0) == 0;
        saw_extra = saw_extra || e.find("bogus") != std::string::npos;
    }
    EXPECT_TRUE(saw_paths && saw_sampler && saw_extra);
}

TEST(Schema, ValidatorKeywords) {
    const json schema = json::parse(R"({
        "type": "object", "required": ["a"], "additionalProperties": false,
        "properties": {
            "a": {"type": "integer", "minimum": 1, "maximum": 3},
            "b": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1, "maxItems": 2},
            "c": {"type": ["string", "null"], "minLength": 2},
            "d": {"enum": ["x", "y"]}
        }})");
    EXPECT_TRUE(h::validate_schema(json::parse(R"({"a": 2, "b": [0.5], "c": null, "d": "x"})"), schema).empty());
    EXPECT_EQ(h::validate_schema(json::parse(R"({"b": []})"), schema).size(), 2u);
    EXPECT_EQ(h::validate_schema(json::parse(R"({"a": 2.5})"), schema).size(), 1u);
    EXPECT_EQ(h::validate_schema(json::parse(R"({"a": 4, "b": [0, 1, 2]})"), schema).size(), 3u);
    EXPECT_EQ(h::validate_schema(json::parse(R"({"a": 1, "c": "q", "d": "z"})"), schema).size(), 2u);
}

TEST(Config, SemanticChecks) {
    json doc = small_marginal();
    doc["seeds"] = json::array({1, 1});
    EXPECT_THROW((void)h::parse_config(doc), rfo::ConfigError);

    doc = small_marginal();
    doc["target"]["path"] = "x.json";
    EXPECT_THROW((void)h::parse_config(doc), rfo::ConfigError);

    doc = small_marginal();
    doc["velocity"] = {{"source", "checkpoint"}};
    EXPECT_THROW((void)h::parse_config(doc), rfo::ConfigError);

    doc = small_marginal();
    doc["samplers"] = json::array({"amo"});
    EXPECT_THROW((void)h::parse_config(doc), rfo::ConfigError);

    doc = small_marginal();
    doc["metrics"]["test_samples"] = 1000;
    EXPECT_THROW((void)h::parse_config(doc), rfo::ConfigError);

    const auto cfg = h::parse_config(small_marginal());
    EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{3, 4}));
    EXPECT_EQ(cfg.grid_steps, std::vector<std::size_t>{8});
    EXPECT_EQ(cfg.metrics.permutations, 19u);
    EXPECT_EQ(cfg.metrics.alpha, 0.01);
}

TEST(Config, OverridesUseDottedPathsAndJsonValues) {
    json doc = small_marginal();
    h::apply_override(doc, "metrics.alpha=0.05");
    h::apply_override(doc, "target.preset=moons");
    h::apply_override(doc, "c_values=[0.5,2]");
    h::apply_override(doc, "c_values.1=3");
    h::apply_override(doc, "figure3.offset=[1,1]");
    EXPECT_EQ(doc["metrics"]["alpha"], 0.05);
    EXPECT_EQ(doc["target"]["preset"], "moons");
    EXPECT_EQ(doc["c_values"], json::parse("[0.5, 3]"));
    EXPECT_EQ(doc["figure3"]["offset"], json::parse("[1, 1]"));
    EXPECT_THROW(h::apply_override(doc, "noequals"), rfo::ConfigError);
    EXPECT_THROW(h::apply_override(doc, "c_values.7=1"), rfo::ConfigError);
    EXPECT_THROW(h::apply_override(doc, "metrics..alpha=1"), rfo::ConfigError);
}

TEST(Harness, ThreadCapReadsEnvironment) {
    ::setenv("RF_OVERSHOOT_THREADS", "3", 1);
    EXPECT_EQ(h::thread_cap(), 3u);
    ::setenv("RF_OVERSHOOT_THREADS", "zero", 1);
    EXPECT_THROW((void)h::thread_cap(), rfo::ConfigError);
    ::unsetenv("RF_OVERSHOOT_THREADS");
    EXPECT_GE(h::thread_cap(), 1u);
}

TEST(Harness, FingerprintIsFnv1a64) {
    EXPECT_EQ(h::fingerprint(""), "cbf29ce484222325");
    EXPECT_EQ(h::fingerprint("a"), "af63dc4c8601ec8c");
}

TEST(Harness, ProbeGridCoversMarginalSpread) {
    const auto gm = rfo::mixture_preset("gaussian");
    const auto grid = h::probe_grid(gm, 0.5);
    ASSERT_EQ(grid.batch(), 100u);
    // Marginal at t = 0.5: mean (1, 0), variance 0.5.
    const double sd = std::sqrt(0.5);
    EXPECT_NEAR(grid(0, 0), 1.0 - 2 * sd, 1e-12);
    EXPECT_NEAR(grid(99, 0), 1.0 + 2 * sd, 1e-12);
    EXPECT_NEAR(grid(1, 1), -2 * sd + 4 * sd / 9, 1e-12);
}

TEST(Harness, RunWritesLayoutAndParallelMatchesSerial) {
    const fs::path a = scratch("layout_a");
    const fs::path b = scratch("layout_b");
    const auto cfg = h::parse_config(small_marginal());
    const auto serial = h::run_experiment(cfg, {a, 1, {}});
    const auto parallel = h::run_experiment(cfg, {b, 2, {}});
    for (std::uint64_t seed : {3u, 4u}) {
        const fs::path dir = a / "marginal-check" / std::to_string(seed);
        for (const char* f : {"results.jsonl", "points.csv", "manifest.json"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
        EXPECT_EQ(rfo::read_file(dir / "points.csv"),
                  rfo::read_file(b / "marginal-check" / std::to_string(seed) / "points.csv"));
        EXPECT_EQ(rfo::read_file(dir / "results.jsonl"),
                  rfo::read_file(b / "marginal-check" / std::to_string(seed) / "results.jsonl"));
        const json m = rfo::read_json_file(dir / "manifest.json");
        EXPECT_EQ(m.at("format"), "rf-overshoot-manifest");
        EXPECT_EQ(m.at("seed"), seed);
        EXPECT_EQ(m.at("config").at("seeds"), json::array({seed}));
        EXPECT_EQ(m.at("outputs").at("points.csv").at("fnv1a64"),
                  h::fingerprint(rfo::read_file(dir / "points.csv")));
        std::ifstream in(dir / "results.jsonl");
        std::string line;
        std::size_t records = 0;
        while (std::getline(in, line)) {
            const json rec = json::parse(line);
            EXPECT_TRUE(rec.contains("metric"));
            ++records;
        }
        EXPECT_GT(records, 0u);
    }
    EXPECT_TRUE(fs::exists(a / "marginal-check" / "summary.json"));
    EXPECT_EQ(serial.seeds.size(), 2u);
    EXPECT_EQ(serial.passed(), parallel.passed());
}

TEST(Harness, ReplayReproducesCsvBytes) {
    const fs::path out = scratch("replay_src");
    const fs::path again = scratch("replay_dst");
    const auto cfg = h::parse_config(small_amo());
    const auto run = h::run_experiment(cfg, {out, 0, {"test"}});
    EXPECT_TRUE(run.passed());
    const fs::path manifest = out / "amo-grid" / "1" / "manifest.json";
    const auto replayed = h::replay(manifest, again);
    EXPECT_TRUE(replayed.identical());
    EXPECT_GE(replayed.compared.size(), 2u);  // points.csv and mask.csv
    EXPECT_THROW((void)h::replay(manifest, out), rfo::ConfigError);

    // A tampered output is detected.
    rfo::write_file_atomic(out / "amo-grid" / "1" / "points.csv", "tampered\n");
    const auto broken = h::replay(manifest, scratch("replay_dst2"));
    EXPECT_FALSE(broken.identical());
    EXPECT_EQ(broken.mismatched, std::vector<std::string>{"points.csv"});
}

TEST(Harness, ManifestDoublesAsConfig) {
    const fs::path out = scratch("manifest_cfg");
    (void)h::run_experiment(h::parse_config(small_amo()), {out, 1, {}});
    const json doc = h::load_config_document(out / "amo-grid" / "1" / "manifest.json");
    EXPECT_EQ(doc.at("experiment"), "amo-grid");
    EXPECT_NO_THROW((void)h::parse_config(doc));
}

#ifdef RFO_CLI_PATH
int run_cli(const std::string& args) {
    const std::string cmd = std::string(RFO_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
    const fs::path dir = scratch("cli");
    rfo::write_file_atomic(dir / "amo.json", small_amo().dump());
    json bad = small_amo();
    bad["paths"] = "many";
    rfo::write_file_atomic(dir / "bad.json", bad.dump());

    EXPECT_EQ(run_cli("amo-grid --config " + (dir / "amo.json").string() + " --outdir " + (dir / "out").string()),
              h::kExitOk);
    EXPECT_TRUE(fs::exists(dir / "out" / "amo-grid" / "1" / "manifest.json"));
    EXPECT_EQ(run_cli("amo-grid --config " + (dir / "amo.json").string() + " --seed 9 --outdir " +
                      (dir / "out").string()),
              h::kExitOk);
    EXPECT_TRUE(fs::exists(dir / "out" / "amo-grid" / "9" / "points.csv"));
    EXPECT_EQ(run_cli("amo-grid --config " + (dir / "bad.json").string() + " --outdir " + (dir / "out").string()),
              h::kExitConfigInvalid);
    EXPECT_EQ(run_cli("amo-grid --config " + (dir / "amo.json").string() + " --override paths=-1 --outdir " +
                      (dir / "out").string()),
              h::kExitConfigInvalid);
    EXPECT_EQ(run_cli("train --config " + (dir / "amo.json").string() + " --outdir " + (dir / "out").string()),
              h::kExitConfigInvalid);
    EXPECT_EQ(run_cli("validate --config " + (dir / "amo.json").string()), h::kExitOk);
    EXPECT_EQ(run_cli("validate --config " + (dir / "bad.json").string()), h::kExitConfigInvalid);
    EXPECT_EQ(run_cli("replay --manifest " + (dir / "out" / "amo-grid" / "1" / "manifest.json").string() +
                      " --outdir " + (dir / "replay").string()),
              h::kExitOk);

    // A gate that cannot pass: every moment z-score must be below 1e-9.
    json strict = small_marginal();
    strict["seeds"] = json::array({0});
    strict["metrics"]["z_threshold"] = 1e-9;
    rfo::write_file_atomic(dir / "strict.json", strict.dump());
    EXPECT_EQ(run_cli("marginal-check --config " + (dir / "strict.json").string() + " --outdir " +
                      (dir / "out").string()),
              h::kExitGateFailure);
}
#endif

}  // namespace
