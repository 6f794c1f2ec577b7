#include "loom/control.hpp"

#include <algorithm>
#include <chrono>
#include <regex>
#include <sstream>

namespace loom {

json FinalAnswer::to_json() const {
    return json{{"Summary", summary},
                {"details", details},
                {"source", source},
                {"inference", inference},
                {"extra explanation", extra_explanation}};
}

namespace {

const json* find_key(const json& payload, const std::string& wanted) {
    if (!payload.is_object()) return nullptr;
    if (payload.contains(wanted)) return &payload.at(wanted);
    // tolerate case and underscore variation in model output
    auto normalize = [](std::string s) {
        std::transform(s.begin(), s.end(), s.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        std::replace(s.begin(), s.end(), '_', ' ');
        return s;
    };
    std::string target = normalize(wanted);
    for (auto it = payload.begin(); it != payload.end(); ++it) {
        if (normalize(it.key()) == target) return &it.value();
    }
    return nullptr;
}

std::string as_text(const json& v) {
    return v.is_string() ? v.get<std::string>() : v.dump();
}

} // namespace

FinalAnswer FinalAnswer::from_payload(const json& payload) {
    static const char* kKeys[] = {"Summary", "details", "source", "inference",
                                  "extra explanation"};
    std::vector<std::string> missing;
    for (const char* key : kKeys) {
        if (find_key(payload, key) == nullptr) missing.emplace_back(key);
    }
    if (!missing.empty()) {
        std::string msg = "structured answer is missing key(s): ";
        for (std::size_t i = 0; i < missing.size(); ++i) {
            if (i > 0) msg += ", ";
            msg += "'" + missing[i] + "'";
        }
        throw MalformedAnswerError(msg);
    }
    FinalAnswer a;
    a.summary = as_text(*find_key(payload, "Summary"));
    a.details = as_text(*find_key(payload, "details"));
    a.source = as_text(*find_key(payload, "source"));
    a.inference = *find_key(payload, "inference");
    a.extra_explanation = as_text(*find_key(payload, "extra explanation"));
    return a;
}

std::string truncate_middle(const std::string& text, std::size_t cap_chars) {
    if (cap_chars == 0 || text.size() <= cap_chars) return text;
    std::size_t head = cap_chars * 2 / 3;
    std::size_t tail = cap_chars - head;
    return text.substr(0, head) + "\n...[truncated " +
           std::to_string(text.size() - cap_chars) + " chars]...\n" +
           text.substr(text.size() - tail);
}

std::string serialize_state(const std::string& query, const MemoryState& memory,
                            std::size_t cap_chars) {
    std::ostringstream os;
    os << "Question: " << query << "\n\n";
    auto results = memory.results();
    if (results.empty()) {
        os << "No task results are available yet.\n";
        return os.str();
    }
    os << "Executed tasks:\n";
    for (const auto& [id, r] : results) {
        os << "Task " << id << " [" << r.tool << "] -> "
           << (r.ok() ? "success" : "error") << " (attempts=" << r.attempts << ")\n";
        if (!r.reasoning.empty()) {
            os << "  reasoning: " << truncate_middle(r.reasoning, cap_chars) << "\n";
        }
        if (r.ok()) {
            os << "  answer: " << truncate_middle(canonical_text(r.answer), cap_chars) << "\n";
        } else {
            os << "  error: " << truncate_middle(r.error_message, cap_chars) << "\n";
        }
    }
    return os.str();
}

std::set<int> seeds_for_replan(const TaskGraph& graph, const MemoryState& memory,
                               const std::string& decision_reason) {
    std::set<int> seeds;
    for (int id : memory.error_ids()) {
        if (graph.has_node(id)) seeds.insert(id);
    }

    static const std::regex kNamed(R"((?:task|node|step|action)[\s#]*(\d+))",
                                   std::regex::icase);
    static const std::regex kRef(R"(\$(\d+))");
    for (auto it = std::sregex_iterator(decision_reason.begin(), decision_reason.end(), kNamed);
         it != std::sregex_iterator(); ++it) {
        int id = std::stoi((*it)[1].str());
        if (graph.has_node(id)) seeds.insert(id);
    }
    for (auto it = std::sregex_iterator(decision_reason.begin(), decision_reason.end(), kRef);
         it != std::sregex_iterator(); ++it) {
        int id = std::stoi((*it)[1].str());
        if (graph.has_node(id)) seeds.insert(id);
    }

    if (seeds.empty() && graph.join_id != 0) {
        seeds = graph.predecessors(graph.join_id);
        if (seeds.empty()) seeds.insert(graph.join_id);
    }
    if (seeds.empty()) {
        seeds = graph.sinks();
    }
    return seeds;
}

FinalAnswer synthesize(const Decision& decision, const std::string& state, Gateway& gateway) {
    try {
        return FinalAnswer::from_payload(decision.payload);
    } catch (const MalformedAnswerError& e) {
        std::string repair_state =
            state + "\n\nYour previous answer was rejected: " + e.what() +
            "\nRespond again with the complete five-key structured answer.";
        Decision retry = gateway.decide(repair_state);
        if (retry.kind != Decision::Kind::Finish) {
            throw MalformedAnswerError(std::string("repair attempt did not finish: ") + e.what());
        }
        return FinalAnswer::from_payload(retry.payload);
    }
}

json RunTrace::to_json() const {
    json gens = json::array();
    for (const auto& gen : generations) {
        json edges = json::array();
        for (const auto& [from, to] : gen.graph.edges) {
            edges.push_back(json::array({from, to}));
        }
        json batches = json::array();
        for (const auto& batch : gen.schedule.batches) {
            batches.push_back(batch);
        }
        gens.push_back({{"plan", render_plan(gen.plan)},
                        {"raw_plan", gen.plan_text},
                        {"edges", std::move(edges)},
                        {"batches", std::move(batches)},
                        {"reused", std::vector<int>(gen.reused_ids.begin(), gen.reused_ids.end())},
                        {"join_id", gen.graph.join_id}});
    }
    json execs = json::array();
    for (const auto& r : executions) {
        execs.push_back(r.to_json());
    }
    json decs = json::array();
    for (const auto& d : decisions) {
        decs.push_back({{"kind", d.kind}, {"reason", d.reason}, {"payload", d.payload}});
    }
    json calls = json::array();
    for (const auto& c : llm_calls) {
        calls.push_back({{"template", c.template_id},
                         {"usage", c.usage.to_json()},
                         {"retries", c.retries}});
    }
    return json{{"version", 1},
                {"query", query},
                {"plan_generated", plan_generated},
                {"degraded", degraded},
                {"generations", std::move(gens)},
                {"executions", std::move(execs)},
                {"decisions", std::move(decs)},
                {"final_answer", final_answer ? final_answer->to_json() : json(nullptr)},
                {"abort_reason", abort_reason},
                {"latency_seconds", latency_seconds},
                {"llm_usage", llm_usage.to_json()},
                {"llm_calls", std::move(calls)}};
}

Engine::Engine(DataLake& lake, ToolRegistry& registry, Gateway& gateway, ControlConfig config,
               std::string artifact_dir)
    : lake_(lake),
      registry_(registry),
      gateway_(gateway),
      config_(std::move(config)),
      artifact_dir_(std::move(artifact_dir)) {}

namespace {

FinalAnswer best_effort_answer(const MemoryState& memory, const std::string& last_reason) {
    FinalAnswer a;
    a.summary =
        "The question could not be fully answered within the replanning budget; "
        "partial results are reported instead.";
    std::ostringstream details;
    json gathered = json::array();
    for (const auto& [id, r] : memory.results()) {
        if (r.ok()) {
            details << "Task " << id << " (" << r.tool << ") succeeded. ";
            gathered.push_back(json{{"task", id}, {"tool", r.tool}, {"answer", r.answer}});
        } else {
            details << "Task " << id << " (" << r.tool << ") failed: " << r.error_message << ". ";
        }
    }
    a.details = details.str().empty() ? "No task produced a result." : details.str();
    a.source = "partial execution results";
    a.inference = gathered;
    a.extra_explanation = last_reason;
    return a;
}

std::string describe_plan_failure(const std::exception& e) {
    return e.what();
}

} // namespace

RunTrace Engine::run_query(const std::string& query, EventLog& events) {
    RunTrace trace;
    trace.query = query;
    auto t0 = std::chrono::steady_clock::now();
    std::size_t call_log_mark = gateway_.call_log().size();

    auto finalize = [&]() {
        trace.latency_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        auto full_log = gateway_.call_log();
        for (std::size_t i = call_log_mark; i < full_log.size(); ++i) {
            trace.llm_calls.push_back(full_log[i]);
            trace.llm_usage += full_log[i].usage;
        }
    };

    SchemaCatalog catalog = lake_.schema_catalog();
    std::string d_meta = catalog.to_prompt_text();
    MemoryState memory(query, catalog.fingerprint());
    ToolCatalogue tools = registry_.describe_all();

    std::string planner_state = "Question: " + query + "\n\nDatabase schema:\n" + d_meta;

    int generation = 0;
    std::string plan_text;
    std::set<int> keep;
    std::optional<TaskGraph> prev_graph;
    std::string last_reason;

    try {
        plan_text = gateway_.plan(planner_state, tools, config_.business_rules);
    } catch (const Error& e) {
        trace.abort_reason = std::string("planner call failed: ") + e.what();
        finalize();
        return trace;
    }

    while (true) {
        events.record("plan", {{"generation", generation}, {"text", plan_text}});

        Plan plan;
        TaskGraph graph;
        std::string plan_error;
        bool usable = false;
        try {
            PlanDraft draft = parse_plan(plan_text);
            plan = validate_plan(draft, registry_);
            if (prev_graph.has_value() && !keep.empty()) {
                graph = splice(*prev_graph, keep, plan);
            } else {
                graph = build_dag(plan);
            }
            usable = true;
        } catch (const PlanSyntaxError& e) {
            plan_error = describe_plan_failure(e);
        } catch (const PlanValidationError& e) {
            plan_error = describe_plan_failure(e);
        } catch (const CycleError& e) {
            plan_error = describe_plan_failure(e);
        } catch (const UnknownNodeError& e) {
            plan_error = describe_plan_failure(e);
        }

        if (!usable) {
            events.record("plan_rejected",
                          {{"generation", generation}, {"error", plan_error}});
            if (generation >= config_.max_replans) {
                trace.degraded = true;
                trace.abort_reason = "no usable plan: " + plan_error;
                trace.final_answer = best_effort_answer(memory, plan_error);
                break;
            }
            std::string state = planner_state +
                                "\n\nYour previous plan could not be used:\n" + plan_text +
                                "\n\nProblems:\n" + plan_error +
                                "\n\nRespond with a corrected complete plan.";
            try {
                plan_text = gateway_.replan(state, tools, config_.business_rules);
            } catch (const Error& e) {
                trace.abort_reason = std::string("replanner call failed: ") + e.what();
                break;
            }
            ++generation;
            continue;
        }

        trace.plan_generated = true;
        BatchSchedule schedule = group_parallel_tasks(graph);
        trace.generations.push_back({plan, graph, schedule, plan_text, keep});

        ToolContext ctx;
        ctx.lake = &lake_;
        ctx.gateway = &gateway_;
        ctx.artifact_dir = artifact_dir_;
        execute_graph(graph, schedule, registry_, ctx, config_.executor, memory, events,
                      generation);

        for (const auto& [id, r] : memory.results()) {
            if (r.generation == generation) trace.executions.push_back(r);
        }

        std::string state = serialize_state(query, memory, config_.state_cap_chars);
        Decision decision;
        try {
            decision = gateway_.decide(state);
        } catch (const Error& e) {
            trace.abort_reason = std::string("decision call failed: ") + e.what();
            break;
        }
        events.record("decision",
                      {{"generation", generation},
                       {"kind", decision.kind == Decision::Kind::Finish ? "finish" : "replan"},
                       {"reason", decision.reason}});
        trace.decisions.push_back(
            {decision.kind == Decision::Kind::Finish ? "finish" : "replan", decision.reason,
             decision.payload});

        if (decision.kind == Decision::Kind::Finish) {
            try {
                trace.final_answer = synthesize(decision, state, gateway_);
            } catch (const Error& e) {
                trace.abort_reason = std::string("final answer rejected: ") + e.what();
            }
            break;
        }

        last_reason = decision.reason;
        if (generation >= config_.max_replans) {
            trace.degraded = true;
            trace.final_answer = best_effort_answer(memory, last_reason);
            break;
        }

        std::set<int> seeds = seeds_for_replan(graph, memory, decision.reason);
        std::set<int> affected = affected_subgraph(graph, seeds);
        keep.clear();
        for (const auto& [id, _] : graph.nodes) {
            if (affected.count(id) == 0) keep.insert(id);
        }
        events.record("replan_scope", {{"generation", generation},
                                       {"seeds", std::vector<int>(seeds.begin(), seeds.end())},
                                       {"affected",
                                        std::vector<int>(affected.begin(), affected.end())},
                                       {"kept", std::vector<int>(keep.begin(), keep.end())}});

        std::ostringstream rstate;
        rstate << planner_state << "\n\nPrevious plan:\n" << render_plan(plan) << "\n\n";
        auto results = memory.results();
        rstate << "Completed results you can reuse by referencing their $id:\n";
        for (int id : keep) {
            auto it = results.find(id);
            if (it == results.end()) continue;
            rstate << "Task " << id << " [" << it->second.tool
                   << "]: " << truncate_middle(canonical_text(it->second.answer),
                                               config_.state_cap_chars)
                   << "\n";
        }
        rstate << "\nTasks that must be replanned:\n";
        for (int id : affected) {
            auto it = results.find(id);
            if (it == results.end()) {
                if (graph.has_node(id) && id != graph.join_id) {
                    rstate << "Task " << id << " [" << graph.nodes.at(id).tool
                           << "]: not executed\n";
                }
                continue;
            }
            rstate << "Task " << id << " [" << it->second.tool << "]: "
                   << (it->second.ok() ? "insufficient result"
                                       : "failed: " + it->second.error_message)
                   << "\n";
        }
        rstate << "\nReason for replanning: " << decision.reason << "\n";
        rstate << "Produce only the tasks that must run again, numbered above "
               << (graph.nodes.empty() ? 0 : graph.nodes.rbegin()->first)
               << ", reusing preserved results via their $id, and end with join().";

        memory.prune(affected);
        prev_graph = graph;
        try {
            plan_text = gateway_.replan(rstate.str(), tools, config_.business_rules);
        } catch (const Error& e) {
            trace.abort_reason = std::string("replanner call failed: ") + e.what();
            break;
        }
        ++generation;
    }

    finalize();
    return trace;
}

} // namespace loom
