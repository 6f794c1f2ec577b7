#pragma once

#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include "loom/json.hpp"

namespace loom {

// One trace event; seq gives the global happens-before order.
struct Event {
    std::int64_t seq = 0;
    std::int64_t at_ms = 0;
    std::string kind; // node_start, node_end, batch_start, batch_end, plan, decision, llm_call
    json data;

    json to_json() const {
        return json{{"seq", seq}, {"at_ms", at_ms}, {"kind", kind}, {"data", data}};
    }
};

// Append-only, strictly ordered event stream. Optionally mirrors every
// event to a JSONL file as it is recorded.
class EventLog {
public:
    EventLog() = default;

    void open_sink(const std::string& jsonl_path);

    std::int64_t record(const std::string& kind, json data);

    std::vector<Event> snapshot() const;
    std::vector<Event> of_kind(const std::string& kind) const;

private:
    mutable std::mutex mutex_;
    std::int64_t next_seq_ = 1;
    std::vector<Event> events_;
    std::ofstream sink_;
};

} // namespace loom
