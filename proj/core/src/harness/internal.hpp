// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rfo/harness.hpp"
#include "rfo/metrics.hpp"
#include "rfo/state_batch.hpp"

namespace rfo::harness::detail {

/// Collects everything one seed writes; flushed by write_seed_outputs.
class SeedOutputs {
public:
    /// One results.jsonl line: the report fields plus `context` and the gate outcome, if any.
    void add_report(const MetricReport& report, const nlohmann::json& context, std::optional<bool> gate = {});
    void add_record(const nlohmann::json& record);

    /// points.csv uses the header "series,path_id,x_0,...,x_{d-1}" unless set_points_header was called.
    void add_points(const std::string& series, const StateBatch& points, std::size_t limit);
    void set_points_header(const std::string& header);
    void add_points_line(const std::string& line);

    /// Additional files in the seed directory (name -> contents).
    void add_file(const std::string& name, std::string contents);

    void add_gate(Gate gate) { m_gates.push_back(std::move(gate)); }
    std::vector<Gate>& gates() { return m_gates; }

    const std::string& results() const { return m_results; }
    std::string points() const;
    const std::map<std::string, std::string>& files() const { return m_files; }

private:
    std::string m_results;
    std::string m_points_header;
    std::string m_points;
    std::map<std::string, std::string> m_files;
    std::vector<Gate> m_gates;
};

/// Writes results.jsonl, points.csv, the extra files and finally manifest.json, all atomically.
void write_seed_outputs(const ExperimentConfig& cfg, const RunOptions& options, std::size_t threads,
                        SeedRun& run, const SeedOutputs& outputs, double wall_seconds);

/// Series label such as "overshoot_c1_N20".
std::string series_name(const std::string& sampler, double c, std::size_t steps);

}  // namespace rfo::harness::detail
