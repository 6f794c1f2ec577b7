#include "loom/gateway.hpp"

#include <chrono>

namespace loom {

Gateway::Gateway(PromptLibrary library, std::shared_ptr<LlmBackend> backend, RateCard rates)
    : library_(std::move(library)), backend_(std::move(backend)), rates_(rates) {}

std::vector<Message> Gateway::render_prompt(
    const std::string& template_id, const std::map<std::string, std::string>& variables) const {
    return library_.get(template_id).render(variables);
}

LLMResponse Gateway::complete(const std::string& template_id,
                              const std::map<std::string, std::string>& variables) {
    CallContext call;
    call.template_id = template_id;
    call.variables = variables;
    call.messages = render_prompt(template_id, variables);

    auto start = std::chrono::steady_clock::now();
    LLMResponse resp = backend_->complete(call);
    auto end = std::chrono::steady_clock::now();
    resp.usage.wall_time = std::chrono::duration<double>(end - start).count();
    resp.usage.cost_usd = rates_.cost(resp.usage.prompt_tokens, resp.usage.completion_tokens);

    {
        std::lock_guard<std::mutex> lock(mutex_);
        total_usage_ += resp.usage;
        call_log_.push_back({template_id, resp.usage, resp.retries});
    }
    return resp;
}

std::string Gateway::plan(const std::string& state, const ToolCatalogue& tools,
                          const std::string& business_rules) {
    std::map<std::string, std::string> vars = {
        {"tool_names", tools.tool_names},
        {"num_tools", std::to_string(tools.num_tools)},
        {"tool_descriptions", tools.tool_descriptions},
        {"business_rules", business_rules},
        {"state", state}};
    return complete("planner", vars).text;
}

std::string Gateway::replan(const std::string& state, const ToolCatalogue& tools,
                            const std::string& business_rules) {
    std::map<std::string, std::string> vars = {
        {"tool_names", tools.tool_names},
        {"num_tools", std::to_string(tools.num_tools)},
        {"tool_descriptions", tools.tool_descriptions},
        {"business_rules", business_rules},
        {"state", state}};
    return complete("replanner", vars).text;
}

Decision Gateway::decide(const std::string& state) {
    LLMResponse resp = complete("decision", {{"state", state}});
    return parse_decision(resp.text);
}

UsageRecord Gateway::total_usage() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return total_usage_;
}

std::vector<LlmCallRecord> Gateway::call_log() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return call_log_;
}

int Gateway::calls_for_template(const std::string& template_id) const {
    std::lock_guard<std::mutex> lock(mutex_);
    int n = 0;
    for (const auto& rec : call_log_) {
        if (rec.template_id == template_id) ++n;
    }
    return n;
}

namespace {

// Converts the single-quoted pseudo-JSON the decision prompt displays
// into strict JSON. Good enough for quote style; not a general parser.
std::string relax_quotes(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool in_double = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '\\' && i + 1 < text.size()) {
            out.push_back(c);
            out.push_back(text[i + 1]);
            ++i;
            continue;
        }
        if (c == '"') {
            in_double = !in_double;
            out.push_back(c);
            continue;
        }
        if (c == '\'' && !in_double) {
            out.push_back('"');
            continue;
        }
        out.push_back(c);
    }
    return out;
}

} // namespace

json extract_structured_payload(const std::string& text) {
    for (std::size_t start = 0; start < text.size(); ++start) {
        if (text[start] != '{') continue;
        int depth = 0;
        bool in_string = false;
        char quote = '\0';
        for (std::size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (c == '\\') {
                    ++i;
                } else if (c == quote) {
                    in_string = false;
                }
                continue;
            }
            if (c == '"' || c == '\'') {
                in_string = true;
                quote = c;
                continue;
            }
            if (c == '{') ++depth;
            if (c == '}') {
                --depth;
                if (depth == 0) {
                    std::string candidate = text.substr(start, i - start + 1);
                    json parsed = json::parse(candidate, nullptr, false);
                    if (!parsed.is_discarded() && parsed.is_object()) {
                        return parsed;
                    }
                    parsed = json::parse(relax_quotes(candidate), nullptr, false);
                    if (!parsed.is_discarded() && parsed.is_object()) {
                        return parsed;
                    }
                    break; // try the next opening brace
                }
            }
        }
    }
    return json(nullptr);
}

Decision parse_decision(const std::string& text) {
    Decision d;
    d.raw = text;

    std::size_t action_pos = text.rfind("Action:");
    std::string after_action =
        action_pos == std::string::npos ? text : text.substr(action_pos + 7);

    auto find_word = [&](const std::string& word) {
        return after_action.find(word) != std::string::npos;
    };

    if (find_word("Finish")) {
        json payload = extract_structured_payload(after_action);
        if (payload.is_null()) {
            payload = extract_structured_payload(text);
        }
        if (!payload.is_null()) {
            d.kind = Decision::Kind::Finish;
            d.payload = payload;
            return d;
        }
        d.kind = Decision::Kind::Replan;
        d.reason = "malformed decision: Finish without a parseable structured answer";
        return d;
    }

    if (find_word("Replan")) {
        d.kind = Decision::Kind::Replan;
        std::size_t open = after_action.find('(');
        if (open != std::string::npos) {
            std::size_t close = after_action.rfind(')');
            if (close != std::string::npos && close > open) {
                d.reason = after_action.substr(open + 1, close - open - 1);
            } else {
                d.reason = after_action.substr(open + 1);
            }
        } else {
            d.reason = after_action;
        }
        return d;
    }

    d.kind = Decision::Kind::Replan;
    d.reason = "malformed decision: neither Finish nor Replan recognized";
    return d;
}

} // namespace loom
