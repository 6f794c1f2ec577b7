#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "loom/errors.hpp"
#include "loom/json.hpp"
#include "loom/usage.hpp"

namespace loom {

class DataLake;
class Gateway;

struct ToolArg {
    std::string name;
    std::string type; // semantic tag shown to the planner (text, rows, paths, ...)
    bool required = false;
};

struct ToolDescriptor {
    std::string name;
    std::string description; // planner-facing text, guidelines included
    std::vector<ToolArg> arg_schema;
    std::string output_type;

    bool has_arg(const std::string& arg_name) const;
    json to_json() const;
};

// Everything a tool may touch during one invocation. Tools are stateless;
// all shared handles here must tolerate concurrent readers.
struct ToolContext {
    DataLake* lake = nullptr;
    Gateway* gateway = nullptr;
    std::string artifact_dir;
    int workers = 1; // fan-out budget for batch-style tools
    int task_id = 0; // id of the node being executed (artifact naming)
};

struct ToolOutcome {
    bool ok = false;
    json answer;
    std::string reasoning;
    json artifacts = json::object();
    std::string error;
    UsageRecord usage;

    static ToolOutcome success(json answer, std::string reasoning = "") {
        ToolOutcome o;
        o.ok = true;
        o.answer = std::move(answer);
        o.reasoning = std::move(reasoning);
        return o;
    }

    static ToolOutcome failure(std::string error) {
        ToolOutcome o;
        o.ok = false;
        o.error = std::move(error);
        return o;
    }
};

// A tool implementation. run() is the first attempt; repair() is invoked
// by the self-debug protocol with the previous error message, once per
// remaining retry. The default repair simply reruns.
class Tool {
public:
    virtual ~Tool() = default;

    virtual ToolOutcome run(const json& args, ToolContext& ctx) = 0;

    virtual ToolOutcome repair(const json& args, ToolContext& ctx, const std::string& error) {
        (void)error;
        return run(args, ctx);
    }
};

// Adapter for tests and mock tools.
class FunctionTool : public Tool {
public:
    using Fn = std::function<ToolOutcome(const json&, ToolContext&)>;
    using RepairFn = std::function<ToolOutcome(const json&, ToolContext&, const std::string&)>;

    explicit FunctionTool(Fn run, RepairFn repair = nullptr)
        : run_(std::move(run)), repair_(std::move(repair)) {}

    ToolOutcome run(const json& args, ToolContext& ctx) override { return run_(args, ctx); }

    ToolOutcome repair(const json& args, ToolContext& ctx, const std::string& error) override {
        if (repair_) return repair_(args, ctx, error);
        return run_(args, ctx);
    }

private:
    Fn run_;
    RepairFn repair_;
};

// Outcome of executing one graph node, stored in the memory state.
// Failure is data: the executor and decision stage consume Error results,
// they are never thrown.
struct NodeResult {
    enum class Status { Success, Error };

    int task_id = 0;
    std::string tool;
    Status status = Status::Error;
    json answer;
    std::string reasoning;
    json artifacts = json::object();
    std::string error_message;
    int attempts = 0; // 0 when the tool was never reached (upstream failure)
    UsageRecord usage;
    std::int64_t started_ms = 0;
    std::int64_t ended_ms = 0;
    int generation = 0;

    bool ok() const { return status == Status::Success; }
    json to_json() const;
};

struct ToolCatalogue {
    std::string tool_names;        // registered names + "join", comma separated
    std::string tool_descriptions; // numbered entries, one per registered tool
    int num_tools = 0;             // registered count + 1 for join
};

class ToolRegistry {
public:
    // Fails with DuplicateTool if the name is already taken.
    void register_tool(ToolDescriptor descriptor, std::shared_ptr<Tool> implementation);

    bool contains(const std::string& name) const;
    const ToolDescriptor* find_descriptor(const std::string& name) const;
    Tool* find_tool(const std::string& name) const;
    std::size_t size() const { return entries_.size(); }

    // Planner-prompt material in registration order; join is appended as
    // the final pseudo-tool. Throws EmptyRegistry when nothing is registered.
    ToolCatalogue describe_all() const;

    // Runs the tool under the n-retry self-debugging protocol. Attempt 1
    // calls run(); each remaining retry calls repair() with the previous
    // error. Budget exhaustion yields an Error result carrying the last
    // message. Never throws; every failure is encoded in the NodeResult.
    NodeResult invoke_with_selfdebug(const std::string& tool_name, const json& args,
                                     ToolContext& ctx, int retry_budget,
                                     double timeout_seconds = 120.0) const;

private:
    struct Entry {
        ToolDescriptor descriptor;
        std::shared_ptr<Tool> implementation;
    };

    std::vector<Entry> entries_; // registration order
    std::map<std::string, std::size_t> index_;
};

} // namespace loom
