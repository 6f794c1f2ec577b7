#pragma once

#include <optional>
#include <string>
#include <vector>

#include "loom/data_lake.hpp"
#include "loom/executor.hpp"
#include "loom/gateway.hpp"

namespace loom {

// The five-key structured answer produced by the decision stage.
struct FinalAnswer {
    std::string summary;
    std::string details;
    std::string source;
    json inference; // string or list; verbatim payload, no extra prose
    std::string extra_explanation;

    json to_json() const;

    // Validates the decision payload's keys; throws MalformedAnswer when
    // any of the five keys is missing.
    static FinalAnswer from_payload(const json& payload);
};

struct GenerationRecord {
    Plan plan;
    TaskGraph graph;
    BatchSchedule schedule;
    std::string plan_text;    // raw model output
    std::set<int> reused_ids; // preserved from the previous generation
};

struct DecisionRecord {
    std::string kind; // "finish" or "replan"
    std::string reason;
    json payload;
};

// Complete record of one run: every plan generation, every executed
// node (including nodes later rewired away), the decisions, and the
// final answer or abort reason.
struct RunTrace {
    std::string query;
    std::vector<GenerationRecord> generations;
    std::vector<NodeResult> executions; // append-only across generations
    std::vector<DecisionRecord> decisions;
    std::optional<FinalAnswer> final_answer;
    std::string abort_reason;
    bool degraded = false;       // loop limit hit; best-effort answer
    bool plan_generated = false; // at least one structurally valid plan
    double latency_seconds = 0.0;
    UsageRecord llm_usage;
    std::vector<LlmCallRecord> llm_calls;

    json to_json() const;
};

struct ControlConfig {
    int max_replans = 2;
    ExecutorConfig executor;
    std::size_t state_cap_chars = 4096; // per-node answer cap in {state}
    std::string business_rules;
};

// Serializes the memory state for the decision / replanner prompts.
// Node answers longer than the cap are head+tail truncated with a marker.
std::string serialize_state(const std::string& query, const MemoryState& memory,
                            std::size_t cap_chars);

std::string truncate_middle(const std::string& text, std::size_t cap_chars);

// Replan seeds: every Error node, plus nodes the decision reason names
// by id; when neither exists, the join's direct dependencies (the join
// itself for a join-only graph). Never empty.
std::set<int> seeds_for_replan(const TaskGraph& graph, const MemoryState& memory,
                               const std::string& decision_reason);

// Validates the Finish payload into a FinalAnswer; on missing keys it
// re-prompts the decision stage once with the validation error before
// giving up with MalformedAnswer.
FinalAnswer synthesize(const Decision& decision, const std::string& state, Gateway& gateway);

// Wires the pieces for one query at a time; parallelism lives in the
// executor, the loop itself is single-threaded.
class Engine {
public:
    Engine(DataLake& lake, ToolRegistry& registry, Gateway& gateway, ControlConfig config,
           std::string artifact_dir = "");

    // The full loop: plan, validate, build the DAG, schedule, execute in
    // parallel batches, then decide; on replan it rewires only the
    // affected sub-graph and reuses preserved results. Run-level failure
    // is encoded in the trace, never thrown.
    RunTrace run_query(const std::string& query, EventLog& events);

private:
    DataLake& lake_;
    ToolRegistry& registry_;
    Gateway& gateway_;
    ControlConfig config_;
    std::string artifact_dir_;
};

} // namespace loom
