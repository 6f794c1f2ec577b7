#include "loom/builtin_tools.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "loom/data_lake.hpp"
#include "loom/gateway.hpp"

namespace loom {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

bool has_image_extension(const std::string& s) {
    static const char* kExtensions[] = {".jpg", ".jpeg", ".png", ".bmp", ".gif"};
    std::string l = lower(s);
    for (const char* ext : kExtensions) {
        if (l.size() >= std::strlen(ext) &&
            l.compare(l.size() - std::strlen(ext), std::strlen(ext), ext) == 0) {
            return true;
        }
    }
    return false;
}

bool path_hint_key(const std::string& key) {
    std::string l = lower(key);
    return l.find("path") != std::string::npos || l.find("img") != std::string::npos ||
           l.find("image") != std::string::npos || l.find("file") != std::string::npos;
}

void collect_paths_rec(const json& value, const std::string& key_hint,
                       std::vector<std::string>& out, std::set<std::string>& seen) {
    if (value.is_string()) {
        const std::string& s = value.get<std::string>();
        if (has_image_extension(s) || (path_hint_key(key_hint) && !s.empty())) {
            if (seen.insert(s).second) out.push_back(s);
        }
        return;
    }
    if (value.is_array()) {
        for (const auto& item : value) collect_paths_rec(item, key_hint, out, seen);
        return;
    }
    if (value.is_object()) {
        for (auto it = value.begin(); it != value.end(); ++it) {
            collect_paths_rec(it.value(), it.key(), out, seen);
        }
    }
}

std::string strip(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// Splits "```sql ... ```" fenced output into (content, outside-text).
bool split_fenced(const std::string& text, std::string& content, std::string& outside) {
    std::size_t open = text.find("```");
    if (open == std::string::npos) return false;
    std::size_t content_start = text.find('\n', open);
    if (content_start == std::string::npos) return false;
    std::size_t close = text.find("```", content_start);
    if (close == std::string::npos) return false;
    content = strip(text.substr(content_start + 1, close - content_start - 1));
    outside = strip(text.substr(0, open)) + " " + strip(text.substr(close + 3));
    outside = strip(outside);
    return true;
}

json parse_balanced(const std::string& text, char open_ch, char close_ch) {
    for (std::size_t start = 0; start < text.size(); ++start) {
        if (text[start] != open_ch) continue;
        int depth = 0;
        bool in_string = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (c == '\\') {
                    ++i;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
                continue;
            }
            if (c == open_ch) ++depth;
            if (c == close_ch) {
                --depth;
                if (depth == 0) {
                    json parsed =
                        json::parse(text.substr(start, i - start + 1), nullptr, false);
                    if (!parsed.is_discarded()) return parsed;
                    break;
                }
            }
        }
    }
    return json(nullptr);
}

std::string schema_text(ToolContext& ctx) {
    if (ctx.lake == nullptr) return "";
    return ctx.lake->schema_catalog().to_prompt_text();
}

std::string describe_inputs(const json& args, const std::set<std::string>& skip) {
    std::ostringstream os;
    for (auto it = args.begin(); it != args.end(); ++it) {
        if (skip.count(it.key()) > 0) continue;
        os << it.key() << ": "
           << (it.value().is_string() ? it.value().get<std::string>() : it.value().dump())
           << "\n";
    }
    return os.str();
}

} // namespace

json extract_json_value(const std::string& text) {
    std::string content;
    std::string outside;
    if (split_fenced(text, content, outside)) {
        json parsed = json::parse(content, nullptr, false);
        if (!parsed.is_discarded()) return parsed;
        json obj = parse_balanced(content, '{', '}');
        if (!obj.is_null()) return obj;
        json arr = parse_balanced(content, '[', ']');
        if (!arr.is_null()) return arr;
    }
    json obj = parse_balanced(text, '{', '}');
    if (!obj.is_null()) return obj;
    return parse_balanced(text, '[', ']');
}

std::vector<std::string> collect_image_paths(const json& value) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    if (value.is_string()) {
        // Mixed-arg rendering may hand us serialized rows; re-parse them.
        json parsed = json::parse(value.get<std::string>(), nullptr, false);
        if (!parsed.is_discarded() && !parsed.is_string()) {
            collect_paths_rec(parsed, "", out, seen);
            return out;
        }
        std::istringstream is(value.get<std::string>());
        std::string token;
        while (is >> token) {
            while (!token.empty() && (token.back() == ',' || token.back() == '"' ||
                                      token.back() == ']' || token.back() == '}')) {
                token.pop_back();
            }
            while (!token.empty() && (token.front() == '"' || token.front() == '[' ||
                                      token.front() == '{')) {
                token.erase(token.begin());
            }
            if (has_image_extension(token) && seen.insert(token).second) {
                out.push_back(token);
            }
        }
        return out;
    }
    collect_paths_rec(value, "", out, seen);
    return out;
}

json validate_chart_spec(const json& raw, const std::string& default_name) {
    if (!raw.is_object()) {
        throw Error("chart spec must be a JSON object");
    }
    static const std::set<std::string> kKinds = {"bar", "line", "scatter", "pie"};
    std::string kind = raw.value("kind", raw.value("type", ""));
    if (kKinds.count(kind) == 0) {
        throw Error("chart kind must be one of bar|line|scatter|pie, got '" + kind + "'");
    }
    if (!raw.contains("categories") || !raw["categories"].is_array() ||
        raw["categories"].empty()) {
        throw Error("chart spec needs a non-empty 'categories' array");
    }
    json categories = raw["categories"];

    json series = json::array();
    if (raw.contains("series") && raw["series"].is_array()) {
        for (const auto& s : raw["series"]) {
            json values = s.is_object() ? s.value("values", json::array()) : s;
            std::string label = s.is_object() ? s.value("label", "series") : "series";
            series.push_back({{"label", label}, {"values", values}});
        }
    } else if (raw.contains("values") && raw["values"].is_array()) {
        series.push_back({{"label", raw.value("label", "values")}, {"values", raw["values"]}});
    }
    if (series.empty()) {
        throw Error("chart spec needs 'values' or 'series'");
    }
    for (const auto& s : series) {
        if (!s["values"].is_array() || s["values"].size() != categories.size()) {
            throw Error("series '" + s.value("label", "") + "' length " +
                        std::to_string(s["values"].size()) + " does not match " +
                        std::to_string(categories.size()) + " categories");
        }
        for (const auto& v : s["values"]) {
            if (!v.is_number()) {
                throw Error("series values must be numeric");
            }
        }
    }

    std::string name = raw.value("filename", raw.value("output_path", default_name));
    if (name.size() < 4 || name.compare(name.size() - 4, 4, ".png") != 0) {
        throw Error("output filename must end with .png, got '" + name + "'");
    }

    json normalized{{"kind", kind},
                    {"categories", categories},
                    {"series", series},
                    {"x_label", raw.value("x_label", "")},
                    {"y_label", raw.value("y_label", "")},
                    {"title", raw.value("title", "")},
                    {"output_name", name}};
    return normalized;
}

namespace {

class Text2SqlTool : public Tool {
public:
    ToolOutcome run(const json& args, ToolContext& ctx) override {
        return attempt(args, ctx, "");
    }

    ToolOutcome repair(const json& args, ToolContext& ctx, const std::string& error) override {
        return attempt(args, ctx, error);
    }

private:
    ToolOutcome attempt(const json& args, ToolContext& ctx, const std::string& error) {
        if (ctx.lake == nullptr || ctx.gateway == nullptr) {
            return ToolOutcome::failure("text2SQL needs a data lake and a gateway");
        }
        std::string problem = args.value("problem", "");
        if (strip(problem).empty()) {
            return ToolOutcome::failure("text2SQL requires a non-empty 'problem'");
        }
        std::ostringstream task;
        task << problem;
        if (args.contains("context")) {
            task << "\nContext from previous tasks: "
                 << (args["context"].is_string() ? args["context"].get<std::string>()
                                                 : args["context"].dump());
        }
        if (!error.empty()) {
            task << "\n\nYour previous attempt failed with this database error:\n"
                 << error << "\nRespond with a corrected sqlite3 query.";
        }

        ToolOutcome outcome;
        LLMResponse resp;
        try {
            resp = ctx.gateway->complete(
                "text2sql", {{"task_description", task.str()}, {"db_schema", schema_text(ctx)}});
        } catch (const Error& e) {
            return ToolOutcome::failure(std::string("text2SQL model call failed: ") + e.what());
        }
        outcome.usage = resp.usage;

        std::string sql;
        std::string reasoning;
        if (!split_fenced(resp.text, sql, reasoning)) {
            sql = strip(resp.text);
            reasoning = "";
        }
        if (sql.empty()) {
            outcome.ok = false;
            outcome.error = "model produced no SQL";
            return outcome;
        }
        try {
            json rows = ctx.lake->run_sql(sql);
            outcome.ok = true;
            outcome.answer = rows;
            outcome.reasoning = reasoning;
            outcome.artifacts = json{{"sql", sql}};
        } catch (const SqlError& e) {
            outcome.ok = false;
            // Engine message verbatim plus the SQL, for the repair prompt.
            outcome.error = std::string(e.what()) + "\nSQL was: " + sql;
        }
        return outcome;
    }
};

class TextAnalysisTool : public Tool {
public:
    ToolOutcome run(const json& args, ToolContext& ctx) override { return attempt(args, ctx, ""); }

    ToolOutcome repair(const json& args, ToolContext& ctx, const std::string& error) override {
        return attempt(args, ctx, error);
    }

private:
    ToolOutcome attempt(const json& args, ToolContext& ctx, const std::string& error) {
        if (ctx.gateway == nullptr) {
            return ToolOutcome::failure("text_analysis needs a gateway");
        }
        std::string question = args.value("question", "");
        if (strip(question).empty()) {
            return ToolOutcome::failure("text_analysis requires a non-empty 'question'");
        }
        std::string document;
        if (args.contains("document")) {
            document = args["document"].is_string() ? args["document"].get<std::string>()
                                                    : args["document"].dump();
        } else if (args.contains("context")) {
            document = args["context"].is_string() ? args["context"].get<std::string>()
                                                   : args["context"].dump();
        }
        if (strip(document).empty()) {
            return ToolOutcome::failure("text_analysis requires a non-empty document");
        }
        // A short path-like document value refers into the lake's docs.
        if (ctx.lake != nullptr && document.size() < 256 &&
            document.find('\n') == std::string::npos) {
            try {
                document = ctx.lake->read_document(strip(document));
            } catch (const Error&) {
                // treat as literal text
            }
        }

        std::string task = question;
        if (!error.empty()) {
            task += "\n\nYour previous answer was rejected: " + error +
                    "\nRespond in the required format.";
        }

        ToolOutcome outcome;
        LLMResponse resp;
        try {
            resp = ctx.gateway->complete("text_analysis",
                                         {{"task_description", task}, {"document", document}});
        } catch (const Error& e) {
            return ToolOutcome::failure(std::string("text_analysis model call failed: ") +
                                        e.what());
        }
        outcome.usage = resp.usage;

        json payload = extract_structured_payload(resp.text);
        if (payload.is_null() || !payload.contains("answer")) {
            outcome.ok = false;
            outcome.error = "output is not the required {'reasoning', 'answer'} structure";
            return outcome;
        }
        outcome.ok = true;
        outcome.answer = payload["answer"];
        outcome.reasoning =
            payload.contains("reasoning")
                ? (payload["reasoning"].is_string() ? payload["reasoning"].get<std::string>()
                                                    : payload["reasoning"].dump())
                : "";
        return outcome;
    }
};

class ImageAnalysisTool : public Tool {
public:
    explicit ImageAnalysisTool(std::shared_ptr<VqaClient> client) : client_(std::move(client)) {}

    ToolOutcome run(const json& args, ToolContext& ctx) override {
        if (client_ == nullptr) {
            return ToolOutcome::failure("image_analysis has no VQA client configured");
        }
        std::string question = args.value("question", "");
        if (strip(question).empty()) {
            return ToolOutcome::failure("image_analysis requires a non-empty 'question'");
        }

        std::vector<std::string> paths;
        if (args.contains("image_paths")) {
            for (const auto& p : collect_image_paths(args["image_paths"])) paths.push_back(p);
        }
        if (paths.empty() && args.contains("context")) {
            paths = collect_image_paths(args["context"]);
        }

        std::vector<VqaAnswer> answers(paths.size());
        if (!paths.empty()) {
            int fan_out = std::max(1, std::min<int>(ctx.workers, static_cast<int>(paths.size())));
            if (fan_out == 1) {
                for (std::size_t i = 0; i < paths.size(); ++i) {
                    answers[i] = client_->ask(question, paths[i]);
                }
            } else {
                std::atomic<std::size_t> cursor{0};
                auto worker = [&]() {
                    while (true) {
                        std::size_t at = cursor.fetch_add(1);
                        if (at >= paths.size()) break;
                        answers[at] = client_->ask(question, paths[at]);
                    }
                };
                std::vector<std::thread> threads;
                for (int t = 0; t < fan_out; ++t) threads.emplace_back(worker);
                for (auto& t : threads) t.join();
            }
        }

        std::size_t failures = 0;
        json items = json::array();
        for (const auto& a : answers) {
            if (!a.ok()) ++failures;
            items.push_back(a.to_json());
        }
        if (!answers.empty() && failures == answers.size()) {
            return ToolOutcome::failure("all " + std::to_string(failures) +
                                        " image analyses failed; first error: " +
                                        answers.front().error);
        }
        ToolOutcome outcome = ToolOutcome::success(
            items, "Asked \"" + question + "\" over " + std::to_string(paths.size()) +
                       " image(s).");
        return outcome;
    }
};

class IntentTablesTool : public Tool {
public:
    ToolOutcome run(const json& args, ToolContext& ctx) override {
        if (ctx.lake == nullptr || ctx.gateway == nullptr) {
            return ToolOutcome::failure("intent_tables needs a data lake and a gateway");
        }
        std::string question = args.value("question", "");
        if (strip(question).empty()) {
            return ToolOutcome::failure("intent_tables requires a non-empty 'question'");
        }
        SchemaCatalog catalog = ctx.lake->schema_catalog();
        std::set<std::string> known;
        for (const auto& t : catalog.tables) known.insert(t.name);

        ToolOutcome outcome;
        LLMResponse resp;
        try {
            resp = ctx.gateway->complete("intent_tables",
                                         {{"task_description", question},
                                          {"db_schema", catalog.to_prompt_text()}});
        } catch (const Error& e) {
            return ToolOutcome::failure(std::string("intent_tables model call failed: ") +
                                        e.what());
        }
        outcome.usage = resp.usage;

        json parsed = extract_json_value(resp.text);
        json tables = json::array();
        if (parsed.is_array()) {
            for (const auto& t : parsed) {
                if (t.is_string() && known.count(t.get<std::string>()) > 0) {
                    tables.push_back(t);
                }
            }
        }
        if (tables.empty()) {
            // Malformed selection falls back to the whole catalog.
            for (const auto& name : known) tables.push_back(name);
            outcome.reasoning = "selection was unusable; falling back to the full catalog";
        }
        outcome.ok = true;
        outcome.answer = tables;
        return outcome;
    }
};

class DataPreparationTool : public Tool {
public:
    DataPreparationTool(DataPrepMode mode, std::shared_ptr<SandboxClient> sandbox)
        : mode_(mode), sandbox_(std::move(sandbox)) {}

    ToolOutcome run(const json& args, ToolContext& ctx) override { return attempt(args, ctx, ""); }

    ToolOutcome repair(const json& args, ToolContext& ctx, const std::string& error) override {
        return attempt(args, ctx, error);
    }

private:
    ToolOutcome attempt(const json& args, ToolContext& ctx, const std::string& error) {
        if (ctx.gateway == nullptr) {
            return ToolOutcome::failure("data_preparation needs a gateway");
        }
        std::string problem = args.value("problem", "");
        if (strip(problem).empty()) {
            return ToolOutcome::failure("data_preparation requires a non-empty 'problem'");
        }
        std::string inputs = describe_inputs(args, {"problem"});
        std::string task = problem;
        if (mode_ == DataPrepMode::Direct) {
            task += "\nRespond with the final data structure as JSON only.";
        }
        if (!error.empty()) {
            task += "\n\nYour previous output was rejected: " + error;
        }

        ToolOutcome outcome;
        LLMResponse resp;
        try {
            resp = ctx.gateway->complete("data_preparation",
                                         {{"task_description", task}, {"inputs", inputs}});
        } catch (const Error& e) {
            return ToolOutcome::failure(std::string("data_preparation model call failed: ") +
                                        e.what());
        }
        outcome.usage = resp.usage;

        json structure;
        std::vector<std::string> files;
        if (mode_ == DataPrepMode::Script) {
            if (sandbox_ == nullptr) {
                outcome.ok = false;
                outcome.error = "script mode requires a sandbox service";
                return outcome;
            }
            try {
                SandboxResult sb = sandbox_->run(resp.text, args, ctx.artifact_dir);
                structure = sb.stdout_structure;
                files = sb.files;
            } catch (const Error& e) {
                outcome.ok = false;
                outcome.error = std::string("sandbox execution failed: ") + e.what();
                return outcome;
            }
        } else {
            structure = extract_json_value(resp.text);
        }
        if (structure.is_null()) {
            outcome.ok = false;
            outcome.error = "output carries no parseable data structure";
            return outcome;
        }

        json artifacts = json::object();
        if (!ctx.artifact_dir.empty()) {
            fs::path out = fs::path(ctx.artifact_dir) /
                           ("prepared_task" + std::to_string(ctx.task_id) + ".json");
            fs::create_directories(out.parent_path());
            std::ofstream f(out);
            f << structure.dump(2) << "\n";
            artifacts["file"] = out.string();
        }
        if (!files.empty()) artifacts["sandbox_files"] = files;

        outcome.ok = true;
        outcome.answer = structure;
        outcome.artifacts = artifacts;
        return outcome;
    }

    DataPrepMode mode_;
    std::shared_ptr<SandboxClient> sandbox_;
};

class DataPlottingTool : public Tool {
public:
    explicit DataPlottingTool(std::shared_ptr<ChartRenderer> renderer)
        : renderer_(std::move(renderer)) {}

    ToolOutcome run(const json& args, ToolContext& ctx) override { return attempt(args, ctx, ""); }

    ToolOutcome repair(const json& args, ToolContext& ctx, const std::string& error) override {
        return attempt(args, ctx, error);
    }

private:
    ToolOutcome attempt(const json& args, ToolContext& ctx, const std::string& error) {
        if (ctx.gateway == nullptr) {
            return ToolOutcome::failure("data_plotting needs a gateway");
        }
        std::string problem = args.value("problem", "");
        if (strip(problem).empty()) {
            return ToolOutcome::failure("data_plotting requires a non-empty 'problem'");
        }
        std::string data = describe_inputs(args, {"problem"});
        if (strip(data).empty()) {
            return ToolOutcome::failure("data_plotting requires non-empty data");
        }

        std::string task =
            problem +
            "\nRespond with a chart specification as JSON: {\"kind\": bar|line|scatter|pie, "
            "\"categories\": [...], \"values\": [...] or \"series\": [{\"label\", \"values\"}], "
            "\"x_label\", \"y_label\", \"title\", \"filename\"(.png)}.";
        if (!error.empty()) {
            task += "\n\nYour previous chart specification was rejected: " + error;
        }

        ToolOutcome outcome;
        LLMResponse resp;
        try {
            resp = ctx.gateway->complete("data_plotting",
                                         {{"task_description", task}, {"data", data}});
        } catch (const Error& e) {
            return ToolOutcome::failure(std::string("data_plotting model call failed: ") +
                                        e.what());
        }
        outcome.usage = resp.usage;

        json raw = extract_json_value(resp.text);
        if (raw.is_null()) {
            outcome.ok = false;
            outcome.error = "output carries no chart specification";
            return outcome;
        }
        json spec;
        try {
            spec = validate_chart_spec(raw,
                                       "plot_task" + std::to_string(ctx.task_id) + ".png");
        } catch (const Error& e) {
            outcome.ok = false;
            outcome.error = e.what();
            return outcome;
        }

        fs::path dir = ctx.artifact_dir.empty() ? fs::path(".") : fs::path(ctx.artifact_dir);
        fs::create_directories(dir);
        fs::path chart_file = dir / spec["output_name"].get<std::string>();
        try {
            renderer_->render(spec, chart_file);
        } catch (const Error& e) {
            outcome.ok = false;
            outcome.error = std::string("renderer failed: ") + e.what();
            return outcome;
        }
        fs::path spec_file = dir / ("chart_task" + std::to_string(ctx.task_id) + ".json");
        {
            std::ofstream f(spec_file);
            f << spec.dump(2) << "\n";
        }

        outcome.ok = true;
        outcome.answer = spec;
        outcome.artifacts = json{{"chart_spec", spec},
                                 {"chart_file", chart_file.string()},
                                 {"spec_file", spec_file.string()}};
        return outcome;
    }

    std::shared_ptr<ChartRenderer> renderer_;
};

bool enabled(const BuiltinToolOptions& options, const std::string& name) {
    if (options.enabled.empty()) return true;
    return std::find(options.enabled.begin(), options.enabled.end(), name) !=
           options.enabled.end();
}

} // namespace

void register_builtin_tools(ToolRegistry& registry, const BuiltinToolOptions& options) {
    if (enabled(options, "text2SQL")) {
        registry.register_tool(
            {"text2SQL",
             "Translates a natural-language sub-question into an executable sqlite3 query over "
             "the data lake and returns the resulting rows. Guidelines: include every column "
             "that later tasks need (for example image paths when images are analyzed "
             "afterwards); pass results from preceding tasks through 'context'.",
             {{"problem", "text", true}, {"context", "any", false}},
             "rows"},
            std::make_shared<Text2SqlTool>());
    }
    if (enabled(options, "text_analysis")) {
        registry.register_tool(
            {"text_analysis",
             "Analyzes a text report to answer a question. Guidelines: the answer is concrete "
             "and is the literal None when the report does not contain it; 'document' may be a "
             "document path inside the data lake or the report text itself.",
             {{"question", "text", true}, {"document", "text", false}, {"context", "any", false}},
             "answer"},
            std::make_shared<TextAnalysisTool>());
    }
    if (enabled(options, "image_analysis")) {
        registry.register_tool(
            {"image_analysis",
             "Answers a natural-language question about each image via the visual question "
             "answering service. Guidelines: provide images through 'image_paths' or through "
             "'context' rows carrying image path columns; one answer comes back per image, in "
             "input order.",
             {{"question", "text", true},
              {"image_paths", "paths", false},
              {"context", "any", false}},
             "vqa answers"},
            std::make_shared<ImageAnalysisTool>(options.vqa));
    }
    if (enabled(options, "intent_tables")) {
        registry.register_tool(
            {"intent_tables",
             "Selects the database tables relevant to the question; use it to narrow wide "
             "schemas before SQL generation.",
             {{"question", "text", true}},
             "table names"},
            std::make_shared<IntentTablesTool>());
    }
    if (enabled(options, "data_preparation")) {
        registry.register_tool(
            {"data_preparation",
             "Structures, filters, and aggregates results from previous steps into the final "
             "data structure and saves it. Guidelines: pass upstream results through 'context'.",
             {{"problem", "text", true},
              {"context", "any", false},
              {"inputs", "any", false}},
             "data structure"},
            std::make_shared<DataPreparationTool>(options.data_preparation_mode,
                                                  options.sandbox));
    }
    if (enabled(options, "data_plotting")) {
        registry.register_tool(
            {"data_plotting",
             "Produces a chart for the provided data and saves it as a .png file. Guidelines: "
             "pass the data to visualize through 'data' or 'context'.",
             {{"problem", "text", true}, {"data", "any", false}, {"context", "any", false}},
             "chart"},
            std::make_shared<DataPlottingTool>(options.renderer));
    }
}

} // namespace loom
