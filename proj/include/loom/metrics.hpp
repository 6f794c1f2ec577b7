#pragma once

#include <string>
#include <vector>

#include "loom/control.hpp"

namespace loom {

enum class Modality { Unspecified, Single, Multiple };
enum class OutputType {
    Unspecified,
    SingleValue,
    DataStructure,
    Plot,
    PlotPlot,
    PlotDataStructure
};
enum class Workflow { Unspecified, Sequential, Parallel };

std::string to_string(Modality m);
std::string to_string(OutputType o);
std::string to_string(Workflow w);
Modality modality_from_string(const std::string& s);
OutputType output_type_from_string(const std::string& s);

struct Categories {
    Modality modality = Modality::Unspecified;
    OutputType output_type = OutputType::Unspecified;
    Workflow workflow = Workflow::Unspecified;
};

// The evaluation metrics of one run. A step is one LLM completion or one
// tool attempt; tokens are the sum over every usage record; workflow is
// Parallel when any batch of any generation holds two or more nodes.
struct RunMetrics {
    std::int64_t steps = 0;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    double latency_seconds = 0.0;
    double cost_usd = 0.0;
    Categories categories;

    std::int64_t total_tokens() const { return prompt_tokens + completion_tokens; }
    json to_json() const;
};

// Deterministic totals from a completed trace; throws IncompleteTrace
// when the trace never reached a plan or an LLM call.
RunMetrics summarize(const RunTrace& trace);

// One benchmark question's outcome, the aggregation input.
struct BenchRecord {
    std::string question_id;
    RunMetrics metrics;
    bool correct = false;
    bool plan_generated = false;
    bool replanned = false;
};

enum class GroupBy { Modality, OutputType, Workflow, Overall };

struct AggregateRow {
    std::string label;
    int count = 0;
    double accuracy_pct = 0.0;
    std::int64_t steps = 0;
    std::int64_t tokens = 0;
    double latency_seconds = 0.0;
    double cost_usd = 0.0;
    double plan_coverage_pct = 0.0;
};

// Per-category rows (categories actually present, in taxonomy order)
// plus the Overall row when grouping by Overall.
std::vector<AggregateRow> aggregate(const std::vector<BenchRecord>& records, GroupBy group_by);

} // namespace loom
