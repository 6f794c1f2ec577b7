#pragma once

#include <map>
#include <mutex>
#include <set>
#include <string>

#include "loom/events.hpp"
#include "loom/task_graph.hpp"
#include "loom/tool_registry.hpp"

namespace loom {

// The run's accumulated memory: the question, the schema fingerprint,
// and one result per executed node. Writes are serialized; a task id is
// written at most once per plan generation.
class MemoryState {
public:
    MemoryState() = default;
    MemoryState(std::string query, std::string schema_fingerprint)
        : query_(std::move(query)), schema_fingerprint_(std::move(schema_fingerprint)) {}

    const std::string& query() const { return query_; }
    const std::string& schema_fingerprint() const { return schema_fingerprint_; }

    bool has(int task_id) const;
    NodeResult get(int task_id) const;
    std::map<int, NodeResult> results() const;

    void record(NodeResult result);
    // Drops results of nodes rewired away by a replan.
    void prune(const std::set<int>& task_ids);

    bool any_error() const;
    std::set<int> error_ids() const;

    json to_json() const;

private:
    std::string query_;
    std::string schema_fingerprint_;
    mutable std::mutex mutex_;
    std::map<int, NodeResult> results_;
};

struct ExecutorConfig {
    int workers = 1;            // p
    int selfdebug_retries = 1;  // n
    double task_timeout_seconds = 120.0;
    bool fail_fast = false;
};

// Resolves a task's arguments against the memory: Ref(k) becomes node
// k's structured answer; each $k in a Mixed template becomes a canonical
// text rendering (strings verbatim, everything else compact JSON).
// Throws DependencyFailed via the returned error when an upstream node
// failed; the executor records that as a propagated Error result.
class DependencyFailed : public Error {
public:
    DependencyFailed(int dep_id, std::string message)
        : Error(std::move(message)), dep_id_(dep_id) {}
    int dep_id() const { return dep_id_; }

private:
    int dep_id_;
};

json materialize_args(const TaskSpec& task, const MemoryState& memory);

std::string canonical_text(const json& value);

// Runs the schedule batch by batch with at most config.workers tasks in
// flight. Nodes that already hold a result (preserved across a replan)
// are skipped; the join node is a control-plane marker and is not
// dispatched. Failures never throw: a failed node yields an Error result
// and its descendants get propagated Errors while independent branches
// continue (unless fail_fast stops later batches).
void execute_graph(const TaskGraph& graph, const BatchSchedule& schedule,
                   const ToolRegistry& registry, ToolContext base_ctx,
                   const ExecutorConfig& config, MemoryState& memory, EventLog& events,
                   int generation);

} // namespace loom
