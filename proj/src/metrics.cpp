#include "loom/metrics.hpp"

#include <algorithm>

namespace loom {

std::string to_string(Modality m) {
    switch (m) {
        case Modality::Single: return "Single";
        case Modality::Multiple: return "Multiple";
        case Modality::Unspecified: break;
    }
    return "Unspecified";
}

std::string to_string(OutputType o) {
    switch (o) {
        case OutputType::SingleValue: return "Single Value";
        case OutputType::DataStructure: return "Data Structure";
        case OutputType::Plot: return "Plot";
        case OutputType::PlotPlot: return "Plot-Plot";
        case OutputType::PlotDataStructure: return "Plot-Data Structure";
        case OutputType::Unspecified: break;
    }
    return "Unspecified";
}

std::string to_string(Workflow w) {
    switch (w) {
        case Workflow::Sequential: return "Sequential";
        case Workflow::Parallel: return "Parallel";
        case Workflow::Unspecified: break;
    }
    return "Unspecified";
}

Modality modality_from_string(const std::string& s) {
    if (s == "single") return Modality::Single;
    if (s == "multiple") return Modality::Multiple;
    throw ConfigError("unknown modality category: " + s);
}

OutputType output_type_from_string(const std::string& s) {
    if (s == "single_value") return OutputType::SingleValue;
    if (s == "data_structure") return OutputType::DataStructure;
    if (s == "plot") return OutputType::Plot;
    if (s == "plot_plot") return OutputType::PlotPlot;
    if (s == "plot_data_structure") return OutputType::PlotDataStructure;
    throw ConfigError("unknown output type category: " + s);
}

json RunMetrics::to_json() const {
    return json{{"steps", steps},
                {"prompt_tokens", prompt_tokens},
                {"completion_tokens", completion_tokens},
                {"latency_seconds", latency_seconds},
                {"cost_usd", cost_usd},
                {"modality", to_string(categories.modality)},
                {"output_type", to_string(categories.output_type)},
                {"workflow", to_string(categories.workflow)}};
}

RunMetrics summarize(const RunTrace& trace) {
    if (trace.llm_calls.empty() && trace.executions.empty()) {
        throw IncompleteTraceError("trace carries no LLM calls and no executions");
    }
    RunMetrics m;
    m.steps = static_cast<std::int64_t>(trace.llm_calls.size());
    for (const auto& r : trace.executions) {
        m.steps += r.attempts;
    }

    // Tool-internal LLM calls are already in the gateway log; usage is
    // counted there once, node results only add non-LLM usage (none today).
    m.prompt_tokens = trace.llm_usage.prompt_tokens;
    m.completion_tokens = trace.llm_usage.completion_tokens;
    m.cost_usd = trace.llm_usage.cost_usd;
    m.latency_seconds = trace.latency_seconds;

    bool parallel = false;
    for (const auto& gen : trace.generations) {
        for (const auto& batch : gen.schedule.batches) {
            if (batch.size() >= 2) parallel = true;
        }
    }
    m.categories.workflow = parallel ? Workflow::Parallel : Workflow::Sequential;
    return m;
}

namespace {

AggregateRow fold(const std::string& label, const std::vector<const BenchRecord*>& group) {
    AggregateRow row;
    row.label = label;
    row.count = static_cast<int>(group.size());
    int correct = 0;
    int planned = 0;
    for (const auto* rec : group) {
        if (rec->correct) ++correct;
        if (rec->plan_generated) ++planned;
        row.steps += rec->metrics.steps;
        row.tokens += rec->metrics.total_tokens();
        row.latency_seconds += rec->metrics.latency_seconds;
        row.cost_usd += rec->metrics.cost_usd;
    }
    if (!group.empty()) {
        row.accuracy_pct = 100.0 * correct / static_cast<double>(group.size());
        row.plan_coverage_pct = 100.0 * planned / static_cast<double>(group.size());
    }
    return row;
}

} // namespace

std::vector<AggregateRow> aggregate(const std::vector<BenchRecord>& records, GroupBy group_by) {
    std::vector<AggregateRow> rows;

    auto collect = [&](auto key_of, const std::vector<std::string>& order) {
        for (const auto& label : order) {
            std::vector<const BenchRecord*> group;
            for (const auto& rec : records) {
                if (key_of(rec) == label) group.push_back(&rec);
            }
            if (!group.empty()) {
                rows.push_back(fold(label, group));
            }
        }
    };

    switch (group_by) {
        case GroupBy::Modality:
            collect([](const BenchRecord& r) { return to_string(r.metrics.categories.modality); },
                    {"Single", "Multiple"});
            break;
        case GroupBy::OutputType:
            collect(
                [](const BenchRecord& r) { return to_string(r.metrics.categories.output_type); },
                {"Single Value", "Data Structure", "Plot", "Plot-Plot", "Plot-Data Structure"});
            break;
        case GroupBy::Workflow:
            collect([](const BenchRecord& r) { return to_string(r.metrics.categories.workflow); },
                    {"Sequential", "Parallel"});
            break;
        case GroupBy::Overall: {
            std::vector<const BenchRecord*> all;
            for (const auto& rec : records) all.push_back(&rec);
            rows.push_back(fold("Overall", all));
            break;
        }
    }
    return rows;
}

} // namespace loom
