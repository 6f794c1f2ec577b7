#include "loom/task_graph.hpp"

#include <algorithm>
#include <queue>
#include <sstream>

namespace loom {

std::set<int> TaskGraph::successors(int id) const {
    std::set<int> out;
    for (const auto& [from, to] : edges) {
        if (from == id) out.insert(to);
    }
    return out;
}

std::set<int> TaskGraph::predecessors(int id) const {
    std::set<int> out;
    for (const auto& [from, to] : edges) {
        if (to == id) out.insert(from);
    }
    return out;
}

std::set<int> TaskGraph::sources() const {
    std::set<int> out;
    for (const auto& [id, _] : nodes) {
        if (predecessors(id).empty()) out.insert(id);
    }
    return out;
}

std::set<int> TaskGraph::sinks() const {
    std::set<int> out;
    for (const auto& [id, _] : nodes) {
        if (successors(id).empty()) out.insert(id);
    }
    return out;
}

TaskGraph TaskGraph::from_edges(int node_count, const std::set<std::pair<int, int>>& edges) {
    TaskGraph g;
    for (int i = 1; i <= node_count; ++i) {
        TaskSpec t;
        t.id = i;
        t.tool = "node";
        g.nodes[i] = std::move(t);
    }
    for (const auto& [from, to] : edges) {
        if (!g.has_node(from) || !g.has_node(to)) {
            throw UnknownNodeError("edge endpoint outside node range");
        }
        g.edges.insert({from, to});
        g.nodes[to].deps.insert(from);
    }
    return g;
}

std::string TaskGraph::to_edge_list() const {
    std::ostringstream os;
    for (const auto& [id, task] : nodes) {
        os << id << " " << task.tool << "\n";
    }
    for (const auto& [from, to] : edges) {
        os << from << " -> " << to << "\n";
    }
    return os.str();
}

std::string TaskGraph::to_dot() const {
    std::ostringstream os;
    os << "digraph plan {\n";
    for (const auto& [id, task] : nodes) {
        os << "  n" << id << " [label=\"" << id << ". " << task.tool << "\"];\n";
    }
    for (const auto& [from, to] : edges) {
        os << "  n" << from << " -> n" << to << ";\n";
    }
    os << "}\n";
    return os.str();
}

int BatchSchedule::batch_of(int id) const {
    for (std::size_t k = 0; k < batches.size(); ++k) {
        for (int node : batches[k]) {
            if (node == id) return static_cast<int>(k);
        }
    }
    return -1;
}

namespace {

void verify_acyclic(const TaskGraph& g) {
    // Kahn pass; leftover nodes mean a cycle.
    std::map<int, int> in_degree;
    for (const auto& [id, _] : g.nodes) in_degree[id] = 0;
    for (const auto& [from, to] : g.edges) {
        (void)from;
        ++in_degree[to];
    }
    std::queue<int> ready;
    for (const auto& [id, deg] : in_degree) {
        if (deg == 0) ready.push(id);
    }
    std::size_t visited = 0;
    while (!ready.empty()) {
        int id = ready.front();
        ready.pop();
        ++visited;
        for (int succ : g.successors(id)) {
            if (--in_degree[succ] == 0) ready.push(succ);
        }
    }
    if (visited != g.nodes.size()) {
        throw CycleError("task graph contains a cycle");
    }
}

} // namespace

TaskGraph build_dag(const Plan& plan) {
    TaskGraph g;
    g.join_id = plan.join_id;
    for (const auto& task : plan.tasks) {
        g.nodes[task.id] = task;
    }
    for (const auto& task : plan.tasks) {
        for (int dep : task.deps) {
            if (!g.has_node(dep)) {
                throw UnknownNodeError("task " + std::to_string(task.id) + " references unknown node " +
                                       std::to_string(dep));
            }
            g.edges.insert({dep, task.id});
        }
    }
    // A bare join() collects every loose end.
    if (g.join_id != 0 && g.nodes.at(g.join_id).deps.empty()) {
        for (const auto& [id, _] : g.nodes) {
            if (id == g.join_id) continue;
            if (g.successors(id).empty()) {
                g.edges.insert({id, g.join_id});
            }
        }
    }
    verify_acyclic(g);
    return g;
}

std::vector<int> topological_sort(const TaskGraph& g) {
    std::map<int, int> in_degree;
    for (const auto& [id, _] : g.nodes) in_degree[id] = 0;
    for (const auto& [from, to] : g.edges) {
        (void)from;
        ++in_degree[to];
    }
    // Min-heap on id makes the order deterministic.
    std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
    for (const auto& [id, deg] : in_degree) {
        if (deg == 0) ready.push(id);
    }
    std::vector<int> order;
    order.reserve(g.nodes.size());
    while (!ready.empty()) {
        int id = ready.top();
        ready.pop();
        order.push_back(id);
        for (int succ : g.successors(id)) {
            if (--in_degree[succ] == 0) ready.push(succ);
        }
    }
    if (order.size() != g.nodes.size()) {
        throw CycleError("task graph contains a cycle");
    }
    return order;
}

BatchSchedule group_parallel_tasks(const TaskGraph& g) {
    std::vector<int> order = topological_sort(g);
    std::map<int, int> level;
    int max_level = -1;
    for (int id : order) {
        int lvl = 0;
        for (int pred : g.predecessors(id)) {
            lvl = std::max(lvl, level.at(pred) + 1);
        }
        level[id] = lvl;
        max_level = std::max(max_level, lvl);
    }

    BatchSchedule schedule;
    schedule.batches.resize(static_cast<std::size_t>(max_level + 1));
    for (int id : order) {
        schedule.batches[static_cast<std::size_t>(level.at(id))].push_back(id);
    }
    for (auto& batch : schedule.batches) {
        std::sort(batch.begin(), batch.end());
        schedule.order.insert(schedule.order.end(), batch.begin(), batch.end());
    }
    return schedule;
}

int depth(const TaskGraph& g) {
    if (g.nodes.empty()) return 0;
    return static_cast<int>(group_parallel_tasks(g).batches.size());
}

std::set<int> affected_subgraph(const TaskGraph& g, const std::set<int>& seeds) {
    for (int seed : seeds) {
        if (!g.has_node(seed)) {
            throw UnknownNodeError("seed " + std::to_string(seed) + " is not a graph node");
        }
    }
    std::set<int> affected = seeds;
    std::queue<int> frontier;
    for (int seed : seeds) frontier.push(seed);
    while (!frontier.empty()) {
        int id = frontier.front();
        frontier.pop();
        for (int succ : g.successors(id)) {
            if (affected.insert(succ).second) {
                frontier.push(succ);
            }
        }
    }
    return affected;
}

namespace {

// Rewrites `$k` tokens in a mixed template under an id mapping.
std::string remap_template(const std::string& tmpl, const std::map<int, int>& mapping) {
    std::string out;
    size_t i = 0;
    while (i < tmpl.size()) {
        char c = tmpl[i];
        if (c == '\\' && i + 1 < tmpl.size()) {
            out.push_back(c);
            out.push_back(tmpl[i + 1]);
            i += 2;
            continue;
        }
        if (c == '$' && i + 1 < tmpl.size() && std::isdigit(static_cast<unsigned char>(tmpl[i + 1]))) {
            size_t j = i + 1;
            long id = 0;
            while (j < tmpl.size() && std::isdigit(static_cast<unsigned char>(tmpl[j]))) {
                id = id * 10 + (tmpl[j] - '0');
                ++j;
            }
            auto it = mapping.find(static_cast<int>(id));
            int mapped = it != mapping.end() ? it->second : static_cast<int>(id);
            out += "$" + std::to_string(mapped);
            i = j;
            continue;
        }
        out.push_back(c);
        ++i;
    }
    return out;
}

} // namespace

TaskGraph splice(const TaskGraph& g, const std::set<int>& keep, const Plan& replacement) {
    std::vector<ValidationIssue> issues;

    for (int id : keep) {
        if (!g.has_node(id)) {
            throw UnknownNodeError("keep id " + std::to_string(id) + " is not a graph node");
        }
    }
    // The preserved set must be ancestor-closed or the kept nodes would
    // have dangling inputs.
    for (int id : keep) {
        for (int dep : g.nodes.at(id).deps) {
            if (keep.count(dep) == 0) {
                issues.push_back({id, "preserved node depends on a dropped node",
                                  "dependency " + std::to_string(dep)});
            }
        }
    }

    int max_id = 0;
    for (const auto& [id, _] : g.nodes) max_id = std::max(max_id, id);
    for (const auto& task : replacement.tasks) max_id = std::max(max_id, task.id);

    std::set<int> replacement_ids;
    for (const auto& task : replacement.tasks) replacement_ids.insert(task.id);

    // A replacement id that collides with a kept id moves above max;
    // within the replacement, $k binds to the replacement's own task k
    // when one exists, otherwise to the preserved node k.
    std::map<int, int> id_mapping;
    int next_fresh = max_id;
    for (const auto& task : replacement.tasks) {
        if (keep.count(task.id) > 0) {
            id_mapping[task.id] = ++next_fresh;
        } else {
            id_mapping[task.id] = task.id;
        }
    }

    TaskGraph result;
    for (int id : keep) {
        result.nodes[id] = g.nodes.at(id);
        for (int dep : g.nodes.at(id).deps) {
            if (keep.count(dep) > 0) {
                result.edges.insert({dep, id});
            }
        }
    }

    for (const auto& task : replacement.tasks) {
        TaskSpec spec = task;
        spec.id = id_mapping.at(task.id);
        spec.deps.clear();
        for (auto& [name, value] : spec.args) {
            (void)name;
            if (value.kind == ArgValue::Kind::Ref) {
                int target = value.ref;
                if (replacement_ids.count(target) > 0) {
                    value.ref = id_mapping.at(target);
                } else if (keep.count(target) == 0) {
                    issues.push_back({spec.id, "reference to a dropped node",
                                      "$" + std::to_string(target)});
                }
            } else if (value.kind == ArgValue::Kind::Mixed) {
                for (int target : scan_ref_tokens(value.template_text)) {
                    if (replacement_ids.count(target) == 0 && keep.count(target) == 0) {
                        issues.push_back({spec.id, "reference to a dropped node",
                                          "$" + std::to_string(target)});
                    }
                }
                std::map<int, int> local;
                for (int target : scan_ref_tokens(value.template_text)) {
                    if (replacement_ids.count(target) > 0) {
                        local[target] = id_mapping.at(target);
                    }
                }
                if (!local.empty()) {
                    value.template_text = remap_template(value.template_text, local);
                }
            }
            for (int dep : extract_refs(value)) {
                spec.deps.insert(dep);
            }
        }
        if (spec.is_join) {
            result.join_id = spec.id;
        }
        result.nodes[spec.id] = spec;
        for (int dep : result.nodes.at(spec.id).deps) {
            if (result.nodes.count(dep) == 0) {
                continue; // already reported above
            }
            result.edges.insert({dep, spec.id});
        }
    }

    if (!issues.empty()) {
        throw PlanValidationError(std::move(issues));
    }

    // A bare join in the replacement collects every loose end of the
    // spliced graph, preserved nodes included.
    if (result.join_id != 0 && result.nodes.at(result.join_id).deps.empty()) {
        for (const auto& [id, _] : result.nodes) {
            if (id == result.join_id) continue;
            if (result.successors(id).empty()) {
                result.edges.insert({id, result.join_id});
            }
        }
    }

    verify_acyclic(result);
    return result;
}

} // namespace loom
