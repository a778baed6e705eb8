// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <thread>

#include "internal.hpp"
#include "rfo/error.hpp"
#include "rfo/io.hpp"
#include "rfo/version.hpp"

namespace rfo::harness {

bool RunResult::passed() const {
    auto ok = [](const Gate& g) { return g.passed; };
    for (const auto& s : seeds) {
        if (!std::all_of(s.gates.begin(), s.gates.end(), ok)) {
            return false;
        }
    }
    return std::all_of(gates.begin(), gates.end(), ok);
}

std::size_t thread_cap() {
    if (const char* env = std::getenv("RF_OVERSHOOT_THREADS"); env != nullptr && *env != '\0') {
        char* end = nullptr;
        const unsigned long long value = std::strtoull(env, &end, 10);
        if (end != nullptr && *end == '\0' && value > 0) {
            return static_cast<std::size_t>(value);
        }
        throw ConfigError(std::string("RF_OVERSHOOT_THREADS must be a positive integer, got '") + env + "'");
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::string fingerprint(std::string_view bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (const unsigned char ch : bytes) {
        hash ^= ch;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

namespace detail {

void SeedOutputs::add_report(const MetricReport& report, const nlohmann::json& context, std::optional<bool> gate) {
    nlohmann::json line = report_to_json(report);
    line["context"] = context;
    line["gate"] = gate ? nlohmann::json(*gate ? "pass" : "fail") : nlohmann::json(nullptr);
    add_record(line);
}

void SeedOutputs::add_record(const nlohmann::json& record) {
    m_results += record.dump();
    m_results += '\n';
}

void SeedOutputs::add_points(const std::string& series, const StateBatch& points, std::size_t limit) {
    if (m_points_header.empty()) {
        m_points_header = "series,path_id";
        for (std::size_t j = 0; j < points.dim(); ++j) {
            m_points_header += ",x_" + std::to_string(j);
        }
    }
    const std::size_t n = std::min(limit, points.batch());
    for (std::size_t i = 0; i < n; ++i) {
        m_points += series;
        m_points += ',';
        m_points += std::to_string(i);
        for (std::size_t j = 0; j < points.dim(); ++j) {
            m_points += ',';
            m_points += format_double(points(i, j));
        }
        m_points += '\n';
    }
}

void SeedOutputs::set_points_header(const std::string& header) { m_points_header = header; }

void SeedOutputs::add_points_line(const std::string& line) {
    m_points += line;
    m_points += '\n';
}

void SeedOutputs::add_file(const std::string& name, std::string contents) { m_files[name] = std::move(contents); }

std::string SeedOutputs::points() const {
    return (m_points_header.empty() ? std::string("series,path_id") : m_points_header) + "\n" + m_points;
}

void write_seed_outputs(const ExperimentConfig& cfg, const RunOptions& options, std::size_t threads, SeedRun& run,
                        const SeedOutputs& outputs, double wall_seconds) {
    std::map<std::string, std::string> files = outputs.files();
    files["results.jsonl"] = outputs.results();
    files["points.csv"] = outputs.points();

    nlohmann::json manifest;
    manifest["format"] = "rf-overshoot-manifest";
    manifest["format_version"] = 1;
    manifest["software"] = {{"name", "rf-overshoot"}, {"version", kVersion}};
    manifest["experiment"] = cfg.experiment;
    manifest["seed"] = run.seed;
    nlohmann::json config = cfg.document;
    config["seeds"] = nlohmann::json::array({run.seed});
    manifest["config"] = config;
    manifest["command"] = options.command;
    manifest["threads"] = threads;
    manifest["wall_time_seconds"] = wall_seconds;
    nlohmann::json listing = nlohmann::json::object();
    for (const auto& [name, contents] : files) {
        write_file_atomic(run.directory / name, contents);
        listing[name] = {{"bytes", contents.size()}, {"fnv1a64", fingerprint(contents)}};
    }
    manifest["outputs"] = listing;
    nlohmann::json gates = nlohmann::json::array();
    for (const auto& g : run.gates) {
        gates.push_back({{"name", g.name}, {"passed", g.passed}, {"detail", g.detail}});
    }
    manifest["gates"] = gates;
    write_file_atomic(run.directory / "manifest.json", manifest.dump(2) + "\n");
}

std::string series_name(const std::string& sampler, double c, std::size_t steps) {
    return sampler + "_c" + format_double(c) + "_N" + std::to_string(steps);
}

}  // namespace detail
}  // namespace rfo::harness
