#include "loom/tool_registry.hpp"

#include <chrono>
#include <future>
#include <sstream>

namespace loom {

bool ToolDescriptor::has_arg(const std::string& arg_name) const {
    for (const auto& arg : arg_schema) {
        if (arg.name == arg_name) return true;
    }
    return false;
}

json ToolDescriptor::to_json() const {
    json args = json::array();
    for (const auto& arg : arg_schema) {
        args.push_back({{"name", arg.name}, {"type", arg.type}, {"required", arg.required}});
    }
    return json{{"name", name},
                {"description", description},
                {"args", std::move(args)},
                {"output_type", output_type}};
}

json NodeResult::to_json() const {
    return json{{"task_id", task_id},
                {"tool", tool},
                {"status", ok() ? "success" : "error"},
                {"answer", answer},
                {"reasoning", reasoning},
                {"artifacts", artifacts},
                {"error_message", error_message},
                {"attempts", attempts},
                {"usage", usage.to_json()},
                {"started_ms", started_ms},
                {"ended_ms", ended_ms},
                {"generation", generation}};
}

void ToolRegistry::register_tool(ToolDescriptor descriptor, std::shared_ptr<Tool> implementation) {
    if (index_.count(descriptor.name) > 0) {
        throw DuplicateToolError("tool '" + descriptor.name + "' is already registered");
    }
    index_[descriptor.name] = entries_.size();
    entries_.push_back({std::move(descriptor), std::move(implementation)});
}

bool ToolRegistry::contains(const std::string& name) const {
    return index_.count(name) > 0;
}

const ToolDescriptor* ToolRegistry::find_descriptor(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return nullptr;
    return &entries_[it->second].descriptor;
}

Tool* ToolRegistry::find_tool(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return nullptr;
    return entries_[it->second].implementation.get();
}

ToolCatalogue ToolRegistry::describe_all() const {
    if (entries_.empty()) {
        throw EmptyRegistryError("no tools registered");
    }
    ToolCatalogue cat;
    std::ostringstream names;
    std::ostringstream descriptions;
    int index = 1;
    for (const auto& entry : entries_) {
        const auto& d = entry.descriptor;
        names << d.name << ", ";
        descriptions << index << ". " << d.name << "(";
        bool first = true;
        for (const auto& arg : d.arg_schema) {
            if (!first) descriptions << ", ";
            first = false;
            descriptions << arg.name << ": " << arg.type;
            if (!arg.required) descriptions << "?";
        }
        descriptions << ") -> " << d.output_type << ": " << d.description << "\n";
        ++index;
    }
    names << "join";
    cat.tool_names = names.str();
    cat.tool_descriptions = descriptions.str();
    cat.num_tools = static_cast<int>(entries_.size()) + 1;
    return cat;
}

namespace {

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

// Runs one attempt on its own thread so a hung tool cannot stall the
// executor; on timeout the attempt thread is abandoned and its eventual
// result discarded.
ToolOutcome run_attempt(const std::function<ToolOutcome()>& attempt, double timeout_seconds) {
    if (timeout_seconds <= 0.0) {
        return attempt();
    }
    auto future = std::async(std::launch::async, attempt);
    auto status = future.wait_for(std::chrono::duration<double>(timeout_seconds));
    if (status != std::future_status::ready) {
        return ToolOutcome::failure("timeout after " + std::to_string(timeout_seconds) + " s");
    }
    return future.get();
}

} // namespace

NodeResult ToolRegistry::invoke_with_selfdebug(const std::string& tool_name, const json& args,
                                               ToolContext& ctx, int retry_budget,
                                               double timeout_seconds) const {
    NodeResult result;
    result.task_id = ctx.task_id;
    result.tool = tool_name;
    result.started_ms = now_ms();

    const ToolDescriptor* descriptor = find_descriptor(tool_name);
    Tool* tool = find_tool(tool_name);
    if (descriptor == nullptr || tool == nullptr) {
        result.status = NodeResult::Status::Error;
        result.error_message = "unknown tool '" + tool_name + "'";
        result.attempts = 1;
        result.ended_ms = now_ms();
        return result;
    }

    // Schema gate: an args map that does not fit the descriptor never
    // reaches the implementation.
    if (!args.is_object() && !args.is_null()) {
        result.status = NodeResult::Status::Error;
        result.error_message = "arguments must be a name->value map";
        result.attempts = 1;
        result.ended_ms = now_ms();
        return result;
    }
    if (args.is_object()) {
        for (auto it = args.begin(); it != args.end(); ++it) {
            if (!descriptor->has_arg(it.key())) {
                result.status = NodeResult::Status::Error;
                result.error_message =
                    "argument '" + it.key() + "' is not accepted by " + tool_name;
                result.attempts = 1;
                result.ended_ms = now_ms();
                return result;
            }
        }
    }
    for (const auto& arg : descriptor->arg_schema) {
        if (arg.required && (!args.is_object() || !args.contains(arg.name))) {
            result.status = NodeResult::Status::Error;
            result.error_message = "missing required argument '" + arg.name + "'";
            result.attempts = 1;
            result.ended_ms = now_ms();
            return result;
        }
    }

    std::string last_error;
    const int max_attempts = retry_budget + 1;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        ToolOutcome outcome;
        if (attempt == 1) {
            outcome = run_attempt([&] { return tool->run(args, ctx); }, timeout_seconds);
        } else {
            std::string feedback = last_error;
            outcome = run_attempt([&] { return tool->repair(args, ctx, feedback); },
                                  timeout_seconds);
        }
        result.attempts = attempt;
        result.usage += outcome.usage;
        if (outcome.ok) {
            result.status = NodeResult::Status::Success;
            result.answer = std::move(outcome.answer);
            result.reasoning = std::move(outcome.reasoning);
            result.artifacts = std::move(outcome.artifacts);
            result.ended_ms = now_ms();
            return result;
        }
        last_error = outcome.error.empty() ? "tool failed without a message" : outcome.error;
    }

    result.status = NodeResult::Status::Error;
    result.error_message = last_error;
    result.ended_ms = now_ms();
    return result;
}

} // namespace loom
