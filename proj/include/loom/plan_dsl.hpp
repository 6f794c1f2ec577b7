#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "loom/errors.hpp"
#include "loom/json.hpp"

namespace loom {

class ToolRegistry;

// One argument value in a plan line `N. tool(name=value, ...)`.
//
// Constant: quoted string, bare number, or bracketed list of scalars.
// Ref:      `$k`, the whole value is the output of task k.
// Mixed:    quoted string embedding one or more `$k` tokens; the stored
//           template keeps `\$` escapes so a literal dollar never turns
//           into a reference.
struct ArgValue {
    enum class Kind { Constant, Ref, Mixed };

    Kind kind = Kind::Constant;
    json constant;        // Kind::Constant
    int ref = 0;          // Kind::Ref
    std::string template_text; // Kind::Mixed

    static ArgValue make_constant(json v);
    static ArgValue make_ref(int id);
    static ArgValue make_mixed(std::string template_text);

    bool operator==(const ArgValue& other) const;
};

// Task ids referenced by an argument: Constant -> {}, Ref(k) -> {k},
// Mixed -> every unescaped `$k` in the template.
std::set<int> extract_refs(const ArgValue& arg);

// Unescaped `$k` ids in a raw template string (`\$` is a literal dollar).
std::set<int> scan_ref_tokens(const std::string& text);

struct TaskSpec {
    int id = 0;
    std::string tool;
    std::vector<std::pair<std::string, ArgValue>> args; // source order
    std::set<int> deps; // union of extract_refs over args
    bool is_join = false;

    bool operator==(const TaskSpec& other) const;
};

struct PlanDraft {
    std::vector<TaskSpec> tasks; // source order
    bool end_marker_seen = false;
    std::string raw_text;
};

struct Plan {
    std::vector<TaskSpec> tasks;
    int join_id = 0;

    const TaskSpec* find(int id) const;
    bool operator==(const Plan& other) const;
};

// Parses the planner's line-oriented output. Blank lines and the
// <END_OF_PLAN> marker are consumed; anything else must be a well-formed
// `N. tool(name=value, ...)` line or a PlanSyntaxError is thrown.
PlanDraft parse_plan(const std::string& text);

// Checks every structural rule at once and throws PlanValidationError
// carrying the full issue list: strictly increasing ids, backward-only
// refs, exactly one join and it is last, join has no args, known tools,
// arg names within the descriptor schema, required args present.
Plan validate_plan(const PlanDraft& draft, const ToolRegistry& registry);

// Structure-only variant (no registry): used for dry runs and the
// schedule simulator where the tool catalogue is not known.
Plan validate_plan_structure(const PlanDraft& draft);

// Canonical DSL text; parse_plan(render_plan(p)) round-trips structurally.
std::string render_plan(const Plan& plan);

std::string render_task(const TaskSpec& task);

} // namespace loom
