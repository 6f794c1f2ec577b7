#include "loom/executor.hpp"

#include <atomic>
#include <chrono>
#include <thread>

namespace loom {

namespace {

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

} // namespace

void EventLog::open_sink(const std::string& jsonl_path) {
    std::lock_guard<std::mutex> lock(mutex_);
    sink_.open(jsonl_path, std::ios::trunc);
}

std::int64_t EventLog::record(const std::string& kind, json data) {
    std::lock_guard<std::mutex> lock(mutex_);
    Event e;
    e.seq = next_seq_++;
    e.at_ms = now_ms();
    e.kind = kind;
    e.data = std::move(data);
    if (sink_.is_open()) {
        sink_ << e.to_json().dump() << "\n";
        sink_.flush();
    }
    events_.push_back(std::move(e));
    return events_.back().seq;
}

std::vector<Event> EventLog::snapshot() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return events_;
}

std::vector<Event> EventLog::of_kind(const std::string& kind) const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<Event> out;
    for (const auto& e : events_) {
        if (e.kind == kind) out.push_back(e);
    }
    return out;
}

bool MemoryState::has(int task_id) const {
    std::lock_guard<std::mutex> lock(mutex_);
    return results_.count(task_id) > 0;
}

NodeResult MemoryState::get(int task_id) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = results_.find(task_id);
    if (it == results_.end()) {
        throw UnknownNodeError("no result for task " + std::to_string(task_id));
    }
    return it->second;
}

std::map<int, NodeResult> MemoryState::results() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return results_;
}

void MemoryState::record(NodeResult result) {
    std::lock_guard<std::mutex> lock(mutex_);
    int id = result.task_id;
    if (results_.count(id) > 0) {
        throw Error("task " + std::to_string(id) + " already has a result in this generation");
    }
    results_.emplace(id, std::move(result));
}

void MemoryState::prune(const std::set<int>& task_ids) {
    std::lock_guard<std::mutex> lock(mutex_);
    for (int id : task_ids) {
        results_.erase(id);
    }
}

bool MemoryState::any_error() const {
    std::lock_guard<std::mutex> lock(mutex_);
    for (const auto& [_, r] : results_) {
        if (!r.ok()) return true;
    }
    return false;
}

std::set<int> MemoryState::error_ids() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::set<int> out;
    for (const auto& [id, r] : results_) {
        if (!r.ok()) out.insert(id);
    }
    return out;
}

json MemoryState::to_json() const {
    std::lock_guard<std::mutex> lock(mutex_);
    json results = json::object();
    for (const auto& [id, r] : results_) {
        results[std::to_string(id)] = r.to_json();
    }
    return json{{"query", query_},
                {"schema_fingerprint", schema_fingerprint_},
                {"results", std::move(results)}};
}

std::string canonical_text(const json& value) {
    if (value.is_string()) {
        return value.get<std::string>();
    }
    return value.dump();
}

namespace {

std::string materialize_mixed(const std::string& tmpl, const MemoryState& memory) {
    std::string out;
    std::size_t i = 0;
    while (i < tmpl.size()) {
        char c = tmpl[i];
        if (c == '\\' && i + 1 < tmpl.size()) {
            out.push_back(tmpl[i + 1]); // \$ and \\ drop the escape here
            i += 2;
            continue;
        }
        if (c == '$' && i + 1 < tmpl.size() &&
            std::isdigit(static_cast<unsigned char>(tmpl[i + 1]))) {
            std::size_t j = i + 1;
            long id = 0;
            while (j < tmpl.size() && std::isdigit(static_cast<unsigned char>(tmpl[j]))) {
                id = id * 10 + (tmpl[j] - '0');
                ++j;
            }
            out += canonical_text(memory.get(static_cast<int>(id)).answer);
            i = j;
            continue;
        }
        out.push_back(c);
        ++i;
    }
    return out;
}

} // namespace

json materialize_args(const TaskSpec& task, const MemoryState& memory) {
    for (int dep : task.deps) {
        if (!memory.has(dep)) {
            throw DependencyFailed(dep, "upstream " + std::to_string(dep) + " has no result");
        }
        if (!memory.get(dep).ok()) {
            throw DependencyFailed(dep, "upstream " + std::to_string(dep) + " failed");
        }
    }
    json args = json::object();
    for (const auto& [name, value] : task.args) {
        switch (value.kind) {
            case ArgValue::Kind::Constant:
                args[name] = value.constant;
                break;
            case ArgValue::Kind::Ref:
                args[name] = memory.get(value.ref).answer;
                break;
            case ArgValue::Kind::Mixed:
                args[name] = materialize_mixed(value.template_text, memory);
                break;
        }
    }
    return args;
}

void execute_graph(const TaskGraph& graph, const BatchSchedule& schedule,
                   const ToolRegistry& registry, ToolContext base_ctx,
                   const ExecutorConfig& config, MemoryState& memory, EventLog& events,
                   int generation) {
    std::atomic<bool> stop{false};

    for (std::size_t batch_idx = 0; batch_idx < schedule.batches.size(); ++batch_idx) {
        if (stop.load()) break;

        std::vector<int> pending;
        for (int id : schedule.batches[batch_idx]) {
            if (id == graph.join_id) continue; // handoff to the decision stage
            if (memory.has(id)) continue;      // preserved result, reused as-is
            pending.push_back(id);
        }
        if (pending.empty()) continue;

        events.record("batch_start",
                      {{"generation", generation},
                       {"batch", batch_idx},
                       {"tasks", pending}});

        std::atomic<std::size_t> cursor{0};
        auto worker = [&]() {
            while (true) {
                std::size_t at = cursor.fetch_add(1);
                if (at >= pending.size()) break;
                int id = pending[at];
                const TaskSpec& task = graph.nodes.at(id);

                events.record("node_start", {{"generation", generation},
                                             {"task_id", id},
                                             {"tool", task.tool},
                                             {"batch", batch_idx}});

                NodeResult result;
                try {
                    json args = materialize_args(task, memory);
                    ToolContext ctx = base_ctx;
                    ctx.task_id = id;
                    ctx.workers = config.workers;
                    result = registry.invoke_with_selfdebug(task.tool, args, ctx,
                                                            config.selfdebug_retries,
                                                            config.task_timeout_seconds);
                } catch (const DependencyFailed& dep) {
                    result.task_id = id;
                    result.tool = task.tool;
                    result.status = NodeResult::Status::Error;
                    result.error_message = dep.what();
                    result.attempts = 0;
                    result.started_ms = now_ms();
                    result.ended_ms = result.started_ms;
                }
                result.generation = generation;
                result.task_id = id;
                result.tool = task.tool;

                if (!result.ok() && config.fail_fast) {
                    stop.store(true);
                }

                events.record("node_end", {{"generation", generation},
                                           {"task_id", id},
                                           {"tool", task.tool},
                                           {"status", result.ok() ? "success" : "error"},
                                           {"attempts", result.attempts},
                                           {"usage", result.usage.to_json()}});
                memory.record(std::move(result));
            }
        };

        int thread_count = std::min<int>(config.workers, static_cast<int>(pending.size()));
        thread_count = std::max(thread_count, 1);
        if (thread_count == 1) {
            worker();
        } else {
            std::vector<std::thread> threads;
            threads.reserve(static_cast<std::size_t>(thread_count));
            for (int t = 0; t < thread_count; ++t) {
                threads.emplace_back(worker);
            }
            for (auto& t : threads) t.join();
        }

        events.record("batch_end", {{"generation", generation}, {"batch", batch_idx}});
    }
}

} // namespace loom
