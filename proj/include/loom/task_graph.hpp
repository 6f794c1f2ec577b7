#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "loom/plan_dsl.hpp"

namespace loom {

// The execution DAG. Edges point from a producer to the task that
// consumes its output ("to depends on from").
struct TaskGraph {
    std::map<int, TaskSpec> nodes;
    std::set<std::pair<int, int>> edges;
    int join_id = 0; // 0 when the graph was built from a raw edge list

    bool has_node(int id) const { return nodes.count(id) > 0; }
    std::set<int> successors(int id) const;
    std::set<int> predecessors(int id) const;
    std::set<int> sources() const;
    std::set<int> sinks() const; // no outgoing edges

    // Test/simulator helper: nodes 1..n with the given dependency edges.
    static TaskGraph from_edges(int node_count, const std::set<std::pair<int, int>>& edges);

    std::string to_edge_list() const;
    std::string to_dot() const;
};

struct BatchSchedule {
    std::vector<std::vector<int>> batches; // level k = nodes at longest-path depth k
    std::vector<int> order;                // flattened batches; a valid topological order

    int batch_of(int id) const;
};

// Node per task; edge (d, t) for every dependency d of t. A join with no
// explicit refs depends on every sink. Verifies acyclicity even though
// backward-only references already guarantee it.
TaskGraph build_dag(const Plan& plan);

// Dependency-respecting order, ties broken by ascending id.
std::vector<int> topological_sort(const TaskGraph& g);

// Level scheduling: batch index = longest-path distance from the sources,
// which yields the maximally parallel partition.
BatchSchedule group_parallel_tasks(const TaskGraph& g);

// Number of batches (longest path length + 1); 0 for the empty graph.
int depth(const TaskGraph& g);

// Seeds plus every transitive descendant. Nodes outside the result keep
// their completed results when the plan is rewired.
std::set<int> affected_subgraph(const TaskGraph& g, const std::set<int>& seeds);

// Rewires the graph for selective replanning: preserved nodes keep their
// ids and specs; replacement tasks are renumbered above the existing
// maximum only when their id collides with a kept id. References inside
// the replacement bind to the replacement's own tasks first, then to
// preserved nodes; a reference to a dropped node is a validation error.
TaskGraph splice(const TaskGraph& g, const std::set<int>& keep, const Plan& replacement);

} // namespace loom
