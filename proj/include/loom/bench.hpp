#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "loom/metrics.hpp"

namespace loom {

// Expected answer of a benchmark question.
//   value:     normalized exact match on the inference
//   structure: order-insensitive multiset equality over rows
//   plot:      chart data equality plus the rendered file existing
//   combo:     every part must match
struct GoldSpec {
    enum class Kind { Value, Structure, Plot, Combo };

    Kind kind = Kind::Value;
    json expected;               // Value: scalar; Structure: rows; Plot: {categories, values}
    std::vector<GoldSpec> parts; // Combo

    static GoldSpec from_json(const json& doc);
};

struct BenchQuestion {
    std::string id;
    std::string text;
    GoldSpec gold;
    Categories categories; // modality and output type from the manifest
};

struct BenchmarkManifest {
    std::string name;
    std::filesystem::path lake_manifest;
    std::vector<BenchQuestion> questions;

    static BenchmarkManifest load(const std::filesystem::path& file);
};

struct EvalResult {
    bool correct = false;
    std::string diagnosis;
};

// Chart data produced during the run, matched against Plot golds.
struct ChartArtifact {
    json spec;
    std::string file_path;
};

EvalResult evaluate(const FinalAnswer& answer, const std::vector<ChartArtifact>& charts,
                    const GoldSpec& gold);

struct BenchReport {
    std::vector<BenchRecord> records;
    std::vector<std::string> question_summaries;
    bool replanning_supported = true;

    std::string to_table() const;
    std::string to_csv() const;
};

// Runs every manifest question through the engine factory (one engine
// per question) and aggregates Table-style rows. Per-question failures
// are recorded, never thrown.
BenchReport run_benchmark(const BenchmarkManifest& manifest,
                          const std::function<RunTrace(const BenchQuestion&)>& run_question);

// ---------------------------------------------------------------------
// Scheduling simulator

struct ToolLatency {
    double latency = 1.0; // seconds (mean when jitter > 0)
    double jitter = 0.0;  // uniform +/- applied with the model seed
    std::int64_t tokens = 0;
};

struct LatencyModel {
    double default_latency = 1.0;
    std::int64_t default_tokens = 0;
    std::map<std::string, ToolLatency> tools;
    unsigned seed = 1;

    static LatencyModel load(const std::filesystem::path& file);
    double latency_of(const std::string& tool, unsigned node_salt) const;
    std::int64_t tokens_of(const std::string& tool) const;
};

struct SimulationResult {
    double sequential_makespan = 0.0;
    double parallel_makespan = 0.0;
    std::int64_t total_tokens = 0;
};

// sequential = sum of node latencies in topological order; parallel =
// level schedule under p workers (earliest-free worker, ascending id),
// batches acting as barriers. Deterministic for constant latencies.
SimulationResult simulate_schedule(const TaskGraph& graph, const LatencyModel& model, int workers);

} // namespace loom
