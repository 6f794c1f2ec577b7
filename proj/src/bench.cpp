#include "loom/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace loom {

namespace fs = std::filesystem;

GoldSpec GoldSpec::from_json(const json& doc) {
    GoldSpec gold;
    std::string kind = doc.value("kind", "value");
    if (kind == "value") {
        gold.kind = Kind::Value;
        gold.expected = doc.at("expected");
    } else if (kind == "structure") {
        gold.kind = Kind::Structure;
        gold.expected = doc.at("rows");
    } else if (kind == "plot") {
        gold.kind = Kind::Plot;
        gold.expected = json{{"categories", doc.at("categories")}, {"values", doc.at("values")}};
    } else if (kind == "combo") {
        gold.kind = Kind::Combo;
        for (const auto& part : doc.at("parts")) {
            gold.parts.push_back(GoldSpec::from_json(part));
        }
    } else {
        throw ConfigError("unknown gold kind: " + kind);
    }
    return gold;
}

BenchmarkManifest BenchmarkManifest::load(const fs::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw IoError("cannot open benchmark manifest: " + file.string());
    }
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) {
        throw IoError("benchmark manifest is not valid JSON: " + file.string());
    }
    BenchmarkManifest manifest;
    manifest.name = doc.value("name", "benchmark");
    manifest.lake_manifest = file.parent_path() / doc.at("lake").get<std::string>();
    std::set<std::string> seen_ids;
    for (const auto& q : doc.at("questions")) {
        BenchQuestion question;
        question.id = q.at("id").get<std::string>();
        if (!seen_ids.insert(question.id).second) {
            throw ConfigError("duplicate question id in manifest: " + question.id);
        }
        question.text = q.at("text").get<std::string>();
        question.gold = GoldSpec::from_json(q.at("gold"));
        const json& cats = q.at("categories");
        question.categories.modality = modality_from_string(cats.at("modality").get<std::string>());
        question.categories.output_type =
            output_type_from_string(cats.at("output_type").get<std::string>());
        manifest.questions.push_back(std::move(question));
    }
    return manifest;
}

namespace {

std::string normalize_text(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

bool numeric_value(const json& v, double& out) {
    if (v.is_number()) {
        out = v.get<double>();
        return true;
    }
    if (v.is_string()) {
        const std::string& s = v.get<std::string>();
        char* end = nullptr;
        double parsed = std::strtod(s.c_str(), &end);
        if (end != s.c_str() && end != nullptr && *end == '\0') {
            out = parsed;
            return true;
        }
    }
    return false;
}

bool value_match(const json& got, const json& expected) {
    double a = 0.0;
    double b = 0.0;
    if (numeric_value(got, a) && numeric_value(expected, b)) {
        return std::fabs(a - b) <= 1e-9;
    }
    if (got.is_array() && got.size() == 1 && !expected.is_array()) {
        return value_match(got.at(0), expected);
    }
    if (got.is_string() && expected.is_string()) {
        return normalize_text(got.get<std::string>()) ==
               normalize_text(expected.get<std::string>());
    }
    return got == expected;
}

// Numbers folded to double so 1 and 1.0 compare equal across rows.
json canonical_row(const json& v) {
    if (v.is_number()) {
        return json(v.get<double>());
    }
    if (v.is_object()) {
        json out = json::object();
        for (auto it = v.begin(); it != v.end(); ++it) out[it.key()] = canonical_row(it.value());
        return out;
    }
    if (v.is_array()) {
        json out = json::array();
        for (const auto& item : v) out.push_back(canonical_row(item));
        return out;
    }
    return v;
}

bool rows_match(const json& got, const json& expected, std::string& diagnosis) {
    if (!got.is_array() || !expected.is_array()) {
        diagnosis = "structured answer is not a row list";
        return false;
    }
    std::vector<std::string> a;
    std::vector<std::string> b;
    for (const auto& row : got) a.push_back(canonical_row(row).dump());
    for (const auto& row : expected) b.push_back(canonical_row(row).dump());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a == b) return true;
    diagnosis = "row multisets differ: got " + std::to_string(a.size()) + " rows, expected " +
                std::to_string(b.size());
    return false;
}

bool chart_matches(const ChartArtifact& chart, const json& expected, std::string& diagnosis) {
    const json& spec = chart.spec;
    json got_categories = spec.value("categories", json::array());
    json got_values = json::array();
    if (spec.contains("series") && spec["series"].is_array() && !spec["series"].empty()) {
        got_values = spec["series"][0].value("values", json::array());
    } else {
        got_values = spec.value("values", json::array());
    }
    const json& want_categories = expected.at("categories");
    const json& want_values = expected.at("values");

    if (got_categories.size() != want_categories.size() ||
        got_values.size() != want_values.size()) {
        diagnosis = "chart size differs: got " + std::to_string(got_categories.size()) +
                    " categories, expected " + std::to_string(want_categories.size());
        return false;
    }
    // Category order is presentation; compare as (category, value) pairs.
    std::vector<std::string> got_pairs;
    std::vector<std::string> want_pairs;
    for (std::size_t i = 0; i < got_categories.size(); ++i) {
        got_pairs.push_back(canonical_row(got_categories[i]).dump() + "=" +
                            canonical_row(got_values[i]).dump());
    }
    for (std::size_t i = 0; i < want_categories.size(); ++i) {
        want_pairs.push_back(canonical_row(want_categories[i]).dump() + "=" +
                             canonical_row(want_values[i]).dump());
    }
    std::sort(got_pairs.begin(), got_pairs.end());
    std::sort(want_pairs.begin(), want_pairs.end());
    if (got_pairs != want_pairs) {
        std::string got_dump;
        std::string want_dump;
        for (const auto& p : got_pairs) got_dump += p + " ";
        for (const auto& p : want_pairs) want_dump += p + " ";
        diagnosis = "chart data differs: got [" + got_dump + "] expected [" + want_dump + "]";
        return false;
    }
    if (!chart.file_path.empty() && !fs::exists(chart.file_path)) {
        diagnosis = "chart file missing: " + chart.file_path;
        return false;
    }
    return true;
}

EvalResult evaluate_impl(const FinalAnswer& answer, const std::vector<ChartArtifact>& charts,
                         const GoldSpec& gold, std::vector<bool>& chart_used) {
    EvalResult result;
    switch (gold.kind) {
        case GoldSpec::Kind::Value: {
            result.correct = value_match(answer.inference, gold.expected);
            if (!result.correct) {
                result.diagnosis = "inference " + answer.inference.dump() +
                                   " does not match expected " + gold.expected.dump();
            }
            return result;
        }
        case GoldSpec::Kind::Structure: {
            result.correct = rows_match(answer.inference, gold.expected, result.diagnosis);
            return result;
        }
        case GoldSpec::Kind::Plot: {
            std::string last_diag = "no chart artifact produced";
            for (std::size_t i = 0; i < charts.size(); ++i) {
                if (chart_used[i]) continue;
                std::string diag;
                if (chart_matches(charts[i], gold.expected, diag)) {
                    chart_used[i] = true;
                    result.correct = true;
                    return result;
                }
                last_diag = diag;
            }
            result.diagnosis = last_diag;
            return result;
        }
        case GoldSpec::Kind::Combo: {
            for (const auto& part : gold.parts) {
                EvalResult sub = evaluate_impl(answer, charts, part, chart_used);
                if (!sub.correct) {
                    result.diagnosis = "combo part failed: " + sub.diagnosis;
                    return result;
                }
            }
            result.correct = true;
            return result;
        }
    }
    return result;
}

} // namespace

EvalResult evaluate(const FinalAnswer& answer, const std::vector<ChartArtifact>& charts,
                    const GoldSpec& gold) {
    std::vector<bool> chart_used(charts.size(), false);
    return evaluate_impl(answer, charts, gold, chart_used);
}

BenchReport run_benchmark(const BenchmarkManifest& manifest,
                          const std::function<RunTrace(const BenchQuestion&)>& run_question) {
    BenchReport report;
    for (const auto& question : manifest.questions) {
        BenchRecord record;
        record.question_id = question.id;
        std::string summary;
        try {
            RunTrace trace = run_question(question);
            record.plan_generated = trace.plan_generated;
            record.replanned = trace.generations.size() > 1;
            try {
                record.metrics = summarize(trace);
            } catch (const IncompleteTraceError&) {
                record.metrics = RunMetrics{};
            }
            record.metrics.categories.modality = question.categories.modality;
            record.metrics.categories.output_type = question.categories.output_type;

            if (trace.final_answer.has_value()) {
                std::vector<ChartArtifact> charts;
                for (const auto& r : trace.executions) {
                    if (r.artifacts.contains("chart_spec")) {
                        charts.push_back({r.artifacts["chart_spec"],
                                          r.artifacts.value("chart_file", "")});
                    }
                }
                EvalResult eval = evaluate(*trace.final_answer, charts, question.gold);
                record.correct = eval.correct;
                summary = question.id + ": " + (eval.correct ? "correct" : "incorrect") +
                          (eval.diagnosis.empty() ? "" : " - " + eval.diagnosis);
            } else {
                summary = question.id + ": no final answer (" + trace.abort_reason + ")";
            }
        } catch (const std::exception& e) {
            summary = question.id + ": run failed - " + e.what();
        }
        report.records.push_back(std::move(record));
        report.question_summaries.push_back(std::move(summary));
    }
    return report;
}

namespace {

std::string format_row(const std::string& label, const AggregateRow& row, bool replanning) {
    std::ostringstream os;
    os << std::left << std::setw(34) << label << std::right << " | " << std::setw(7)
       << std::fixed << std::setprecision(2) << row.accuracy_pct << "% | " << std::setw(6)
       << row.steps << " | " << std::setw(9) << row.tokens << " | " << std::setw(11)
       << std::setprecision(2) << row.latency_seconds << " | " << std::setw(8)
       << std::setprecision(4) << row.cost_usd << " | " << std::setw(8) << std::setprecision(2)
       << row.plan_coverage_pct << "% | " << (replanning ? "Yes" : "No");
    return os.str();
}

} // namespace

std::string BenchReport::to_table() const {
    std::ostringstream os;
    os << std::left << std::setw(34) << "Category" << " | " << "Accuracy" << " | " << " Steps"
       << " | " << "   Tokens" << " | " << "Latency [s]" << " | " << "Cost [$] " << " | "
       << "Gen. Plan" << " | " << "Re-planning" << "\n";
    os << std::string(112, '-') << "\n";

    auto emit_group = [&](GroupBy group, const std::string& heading) {
        auto rows = aggregate(records, group);
        for (const auto& row : rows) {
            std::string label = heading + ": " + row.label + " (" +
                                std::to_string(row.count) + ")";
            os << format_row(label, row, replanning_supported) << "\n";
        }
    };
    emit_group(GroupBy::Modality, "Modality");
    emit_group(GroupBy::OutputType, "Output Type");
    emit_group(GroupBy::Workflow, "Workflow");
    for (const auto& row : aggregate(records, GroupBy::Overall)) {
        os << format_row("Overall (" + std::to_string(row.count) + ")", row,
                         replanning_supported)
           << "\n";
    }
    return os.str();
}

std::string BenchReport::to_csv() const {
    std::ostringstream os;
    os << "Category,Count,Accuracy,Steps,Tokens,Latency [s],Cost [$],Gen. Plan,Re-planning\n";
    auto emit = [&](const std::string& heading, GroupBy group) {
        for (const auto& row : aggregate(records, group)) {
            os << heading << ": " << row.label << "," << row.count << "," << std::fixed
               << std::setprecision(2) << row.accuracy_pct << "," << row.steps << ","
               << row.tokens << "," << std::setprecision(2) << row.latency_seconds << ","
               << std::setprecision(4) << row.cost_usd << "," << std::setprecision(2)
               << row.plan_coverage_pct << "," << (replanning_supported ? "Yes" : "No") << "\n";
        }
    };
    emit("Modality", GroupBy::Modality);
    emit("Output Type", GroupBy::OutputType);
    emit("Workflow", GroupBy::Workflow);
    for (const auto& row : aggregate(records, GroupBy::Overall)) {
        os << "Overall," << row.count << "," << std::fixed << std::setprecision(2)
           << row.accuracy_pct << "," << row.steps << "," << row.tokens << ","
           << std::setprecision(2) << row.latency_seconds << "," << std::setprecision(4)
           << row.cost_usd << "," << std::setprecision(2) << row.plan_coverage_pct << ","
           << (replanning_supported ? "Yes" : "No") << "\n";
    }
    return os.str();
}

LatencyModel LatencyModel::load(const fs::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw IoError("cannot open latency model: " + file.string());
    }
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) {
        throw IoError("latency model is not valid JSON: " + file.string());
    }
    LatencyModel model;
    model.default_latency = doc.value("default_latency", 1.0);
    model.default_tokens = doc.value("default_tokens", 0);
    model.seed = doc.value("seed", 1u);
    if (doc.contains("tools")) {
        for (auto it = doc["tools"].begin(); it != doc["tools"].end(); ++it) {
            ToolLatency t;
            t.latency = it.value().value("latency", model.default_latency);
            t.jitter = it.value().value("jitter", 0.0);
            t.tokens = it.value().value("tokens", model.default_tokens);
            if (t.latency < 0.0 || t.jitter < 0.0) {
                throw ConfigError("latency model entries must be nonnegative");
            }
            model.tools[it.key()] = t;
        }
    }
    return model;
}

double LatencyModel::latency_of(const std::string& tool, unsigned node_salt) const {
    auto it = tools.find(tool);
    double base = it != tools.end() ? it->second.latency : default_latency;
    double jitter = it != tools.end() ? it->second.jitter : 0.0;
    if (jitter <= 0.0) return base;
    std::mt19937 rng(seed ^ (node_salt * 2654435761u));
    std::uniform_real_distribution<double> dist(-jitter, jitter);
    return std::max(0.0, base + dist(rng));
}

std::int64_t LatencyModel::tokens_of(const std::string& tool) const {
    auto it = tools.find(tool);
    return it != tools.end() ? it->second.tokens : default_tokens;
}

SimulationResult simulate_schedule(const TaskGraph& graph, const LatencyModel& model,
                                   int workers) {
    SimulationResult result;
    if (graph.nodes.empty()) return result;

    std::map<int, double> latency;
    for (const auto& [id, task] : graph.nodes) {
        latency[id] = model.latency_of(task.tool, static_cast<unsigned>(id));
        result.total_tokens += model.tokens_of(task.tool);
    }

    for (int id : topological_sort(graph)) {
        result.sequential_makespan += latency.at(id);
    }

    BatchSchedule schedule = group_parallel_tasks(graph);
    for (const auto& batch : schedule.batches) {
        int p = workers <= 0 ? static_cast<int>(batch.size())
                             : std::min<int>(workers, static_cast<int>(batch.size()));
        p = std::max(p, 1);
        std::vector<double> worker_free(static_cast<std::size_t>(p), 0.0);
        double batch_makespan = 0.0;
        for (int id : batch) { // ascending id, deterministic
            auto slot = std::min_element(worker_free.begin(), worker_free.end());
            *slot += latency.at(id);
            batch_makespan = std::max(batch_makespan, *slot);
        }
        result.parallel_makespan += batch_makespan;
    }
    return result;
}

} // namespace loom
