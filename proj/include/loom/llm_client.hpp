#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "loom/errors.hpp"
#include "loom/json.hpp"
#include "loom/prompts.hpp"
#include "loom/usage.hpp"

namespace loom {

struct LLMResponse {
    std::string text;
    UsageRecord usage;
    int retries = 0;
};

// What a backend sees for one completion: the rendered messages plus the
// template id and variable map that produced them (the scripted backend
// keys on the latter).
struct CallContext {
    std::string template_id;
    std::map<std::string, std::string> variables;
    std::vector<Message> messages;
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual LLMResponse complete(const CallContext& call) = 0;
    virtual std::string name() const = 0;
};

// Stable FNV-1a hex over "name=value" pairs sorted by name; the scripted
// backend's exact-match key.
std::string variables_fingerprint(const std::map<std::string, std::string>& variables);

// Deterministic test backend. Responses are matched per template id by,
// in order of preference: exact variable-fingerprint key, exact equality
// on a declared variable subset, substring matchers over the variables.
// An entry may carry a sequence of responses consumed across repeated
// hits (the last one repeats), which scripts self-debug retries.
class ScriptedLlmBackend : public LlmBackend {
public:
    struct Entry {
        std::string template_id;
        std::string key;                                // optional exact fingerprint
        std::map<std::string, std::string> match_vars;  // optional exact matches
        std::vector<std::string> contains;              // optional substring matches
        std::vector<std::string> responses;             // consumed in order, last repeats
        std::vector<UsageRecord> usages;                // parallel to responses (optional)
        int hits = 0;
    };

    void add(Entry entry);

    // Loads every *.json fixture file in the directory (sorted by name).
    void load_directory(const std::string& dir);
    void load_file(const std::string& path);

    LLMResponse complete(const CallContext& call) override;
    std::string name() const override { return "scripted"; }

    int calls_for_template(const std::string& template_id) const;
    int total_calls() const;

private:
    mutable std::mutex mutex_;
    std::vector<Entry> entries_;
    std::map<std::string, int> calls_by_template_;
};

struct EndpointConfig {
    std::string base_url;                       // e.g. http://127.0.0.1:8080
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string api_key_env = "LOOM_API_KEY";
    int max_retries = 3;
    int backoff_ms = 250;
    double timeout_seconds = 120.0;
};

// Chat-completion client for any endpoint speaking the common JSON
// contract: request {model, messages:[{role, content}]}, response
// {choices:[{message:{content}}], usage:{prompt_tokens, completion_tokens}}.
// Transient transport failures and 429s are retried with backoff; auth
// failures are not.
class HttpLlmBackend : public LlmBackend {
public:
    explicit HttpLlmBackend(EndpointConfig config);

    LLMResponse complete(const CallContext& call) override;
    std::string name() const override { return "http"; }

private:
    EndpointConfig config_;
};

// Whitespace-delimited token estimate used when an endpoint omits usage;
// results are flagged approximate.
std::int64_t approx_token_count(const std::string& text);
std::int64_t approx_token_count(const std::vector<Message>& messages);

} // namespace loom
