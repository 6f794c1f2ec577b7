#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "loom/llm_client.hpp"
#include "loom/tool_registry.hpp"

namespace loom {

// Outcome of the decision stage: either finish with the structured
// answer payload or replan with free-text reasoning.
struct Decision {
    enum class Kind { Finish, Replan };

    Kind kind = Kind::Replan;
    json payload;       // Finish: the structured five-key map
    std::string reason; // Replan: why
    std::string raw;    // full model output, kept for the trace
};

struct LlmCallRecord {
    std::string template_id;
    UsageRecord usage;
    int retries = 0;
};

// The agent core: prompt rendering, the completion contract, and the
// planning / replanning / decision calls, with per-call usage accounting.
class Gateway {
public:
    Gateway(PromptLibrary library, std::shared_ptr<LlmBackend> backend, RateCard rates);

    std::vector<Message> render_prompt(const std::string& template_id,
                                       const std::map<std::string, std::string>& variables) const;

    // One completion against the configured backend; wall time and cost
    // are filled in here.
    LLMResponse complete(const std::string& template_id,
                         const std::map<std::string, std::string>& variables);

    // One planner call; raw plan text is returned for the DSL parser.
    std::string plan(const std::string& state, const ToolCatalogue& tools,
                     const std::string& business_rules = "");

    // One replanner call; the state carries the prior plan, completed
    // results, and failure reasons.
    std::string replan(const std::string& state, const ToolCatalogue& tools,
                       const std::string& business_rules = "");

    // One decision call over the serialized memory state. A response with
    // neither recognizable action becomes Replan carrying the parse error.
    Decision decide(const std::string& state);

    const PromptLibrary& prompts() const { return library_; }
    LlmBackend& backend() { return *backend_; }
    const RateCard& rates() const { return rates_; }

    UsageRecord total_usage() const;
    std::vector<LlmCallRecord> call_log() const;
    int calls_for_template(const std::string& template_id) const;

private:
    PromptLibrary library_;
    std::shared_ptr<LlmBackend> backend_;
    RateCard rates_;

    mutable std::mutex mutex_;
    UsageRecord total_usage_;
    std::vector<LlmCallRecord> call_log_;
};

// Parses the decision stage's Thought/Action output. Exposed for tests.
Decision parse_decision(const std::string& text);

// First parseable JSON object found in the text, accepting fenced or
// bare payloads and the single-quoted pseudo-JSON the decision prompt
// shows. Returns nullptr json when none parses.
json extract_structured_payload(const std::string& text);

} // namespace loom
