#include "loom/llm_client.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace loom {

namespace fs = std::filesystem;

std::string variables_fingerprint(const std::map<std::string, std::string>& variables) {
    std::uint64_t h = 1469598103934665603ull;
    auto feed = [&h](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        h ^= 0x1e; // record separator
        h *= 1099511628211ull;
    };
    for (const auto& [k, v] : variables) { // std::map iterates sorted by key
        feed(k);
        feed(v);
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

std::int64_t approx_token_count(const std::string& text) {
    std::istringstream is(text);
    std::string word;
    std::int64_t n = 0;
    while (is >> word) ++n;
    return n;
}

std::int64_t approx_token_count(const std::vector<Message>& messages) {
    std::int64_t n = 0;
    for (const auto& msg : messages) n += approx_token_count(msg.content);
    return n;
}

void ScriptedLlmBackend::add(Entry entry) {
    std::lock_guard<std::mutex> lock(mutex_);
    entries_.push_back(std::move(entry));
}

void ScriptedLlmBackend::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open fixture file: " + path);
    }
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) {
        throw IoError("fixture file is not valid JSON: " + path);
    }
    const json& list = doc.is_array() ? doc : doc.at("responses");
    for (const auto& item : list) {
        Entry e;
        e.template_id = item.at("template").get<std::string>();
        e.key = item.value("key", "");
        if (item.contains("match")) {
            for (auto it = item["match"].begin(); it != item["match"].end(); ++it) {
                e.match_vars[it.key()] = it.value().get<std::string>();
            }
        }
        if (item.contains("contains")) {
            for (const auto& s : item["contains"]) {
                e.contains.push_back(s.get<std::string>());
            }
        }
        if (item.contains("responses")) {
            for (const auto& r : item["responses"]) {
                e.responses.push_back(r.get<std::string>());
            }
        } else {
            e.responses.push_back(item.at("response").get<std::string>());
        }
        auto read_usage = [](const json& u) {
            UsageRecord rec;
            rec.prompt_tokens = u.value("prompt_tokens", 0);
            rec.completion_tokens = u.value("completion_tokens", 0);
            return rec;
        };
        if (item.contains("usages")) {
            for (const auto& u : item["usages"]) e.usages.push_back(read_usage(u));
        } else if (item.contains("usage")) {
            e.usages.push_back(read_usage(item["usage"]));
        }
        add(std::move(e));
    }
}

void ScriptedLlmBackend::load_directory(const std::string& dir) {
    std::vector<fs::path> files;
    if (!fs::is_directory(dir)) {
        throw IoError("fixture directory not found: " + dir);
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".json") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        load_file(f.string());
    }
}

LLMResponse ScriptedLlmBackend::complete(const CallContext& call) {
    std::lock_guard<std::mutex> lock(mutex_);
    std::string fingerprint = variables_fingerprint(call.variables);

    std::string haystack;
    for (const auto& [k, v] : call.variables) {
        haystack += k;
        haystack += '=';
        haystack += v;
        haystack += '\n';
    }

    Entry* chosen = nullptr;
    for (auto& entry : entries_) {
        if (entry.template_id != call.template_id) continue;
        if (!entry.key.empty()) {
            if (entry.key == fingerprint) {
                chosen = &entry;
                break;
            }
            continue;
        }
        bool ok = true;
        for (const auto& [k, v] : entry.match_vars) {
            auto it = call.variables.find(k);
            if (it == call.variables.end() || it->second != v) {
                ok = false;
                break;
            }
        }
        if (ok) {
            for (const auto& needle : entry.contains) {
                if (haystack.find(needle) == std::string::npos) {
                    ok = false;
                    break;
                }
            }
        }
        if (ok && (!entry.match_vars.empty() || !entry.contains.empty())) {
            chosen = &entry;
            break;
        }
        if (ok && entry.match_vars.empty() && entry.contains.empty() && chosen == nullptr) {
            chosen = &entry; // catch-all entry for the template
        }
    }

    if (chosen == nullptr) {
        throw ScriptMissError(call.template_id + ":" + fingerprint,
                              "variables: " + haystack.substr(0, 400));
    }

    int idx = std::min<int>(chosen->hits, static_cast<int>(chosen->responses.size()) - 1);
    ++chosen->hits;
    ++calls_by_template_[call.template_id];

    LLMResponse resp;
    resp.text = chosen->responses[static_cast<std::size_t>(idx)];
    if (!chosen->usages.empty()) {
        int uidx = std::min<int>(idx, static_cast<int>(chosen->usages.size()) - 1);
        resp.usage = chosen->usages[static_cast<std::size_t>(uidx)];
    } else {
        resp.usage.prompt_tokens = approx_token_count(call.messages);
        resp.usage.completion_tokens = approx_token_count(resp.text);
        resp.usage.approximate = true;
    }
    return resp;
}

int ScriptedLlmBackend::calls_for_template(const std::string& template_id) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = calls_by_template_.find(template_id);
    return it == calls_by_template_.end() ? 0 : it->second;
}

int ScriptedLlmBackend::total_calls() const {
    std::lock_guard<std::mutex> lock(mutex_);
    int total = 0;
    for (const auto& [_, n] : calls_by_template_) total += n;
    return total;
}

HttpLlmBackend::HttpLlmBackend(EndpointConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) {
        throw ConfigError("llm endpoint base_url is empty");
    }
}

LLMResponse HttpLlmBackend::complete(const CallContext& call) {
    json body;
    body["model"] = config_.model;
    json msgs = json::array();
    for (const auto& msg : call.messages) {
        msgs.push_back({{"role", role_name(msg.role)}, {"content", msg.content}});
    }
    body["messages"] = std::move(msgs);
    std::string payload = body.dump();

    httplib::Client client(config_.base_url);
    client.set_connection_timeout(std::chrono::duration<double>(config_.timeout_seconds));
    client.set_read_timeout(std::chrono::duration<double>(config_.timeout_seconds));

    httplib::Headers headers;
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key != nullptr && key[0] != '\0') {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    int attempts = config_.max_retries + 1;
    std::string last_error;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(config_.backoff_ms * attempt));
        }
        auto res = client.Post(config_.path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403) {
            throw AuthError("endpoint rejected credentials (HTTP " +
                            std::to_string(res->status) + ")");
        }
        if (res->status == 429) {
            last_error = "rate limited (HTTP 429)";
            continue;
        }
        if (res->status >= 500) {
            last_error = "server error (HTTP " + std::to_string(res->status) + ")";
            continue;
        }
        if (res->status != 200) {
            throw TransportError("endpoint returned HTTP " + std::to_string(res->status) + ": " +
                                 res->body.substr(0, 200));
        }

        json doc = json::parse(res->body, nullptr, false);
        if (doc.is_discarded()) {
            throw TransportError("endpoint returned malformed JSON");
        }
        LLMResponse out;
        out.retries = attempt;
        if (doc.contains("choices") && !doc["choices"].empty()) {
            out.text = doc["choices"][0]["message"]["content"].get<std::string>();
        } else if (doc.contains("text")) {
            out.text = doc["text"].get<std::string>();
        } else {
            throw TransportError("endpoint response carries no completion text");
        }
        if (doc.contains("usage")) {
            out.usage.prompt_tokens = doc["usage"].value("prompt_tokens", 0);
            out.usage.completion_tokens = doc["usage"].value("completion_tokens", 0);
        } else {
            out.usage.prompt_tokens = approx_token_count(call.messages);
            out.usage.completion_tokens = approx_token_count(out.text);
            out.usage.approximate = true;
        }
        return out;
    }
    if (last_error.find("rate limited") != std::string::npos) {
        throw RateLimitError(last_error + " after " + std::to_string(attempts) + " attempts");
    }
    throw TransportError(last_error + " after " + std::to_string(attempts) + " attempts");
}

} // namespace loom
