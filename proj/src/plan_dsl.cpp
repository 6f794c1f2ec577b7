#include "loom/plan_dsl.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "loom/tool_registry.hpp"

namespace loom {

std::string ValidationIssue::to_string() const {
    std::ostringstream os;
    if (task_id > 0) {
        os << "task " << task_id << ": ";
    }
    os << rule;
    if (!detail.empty()) {
        os << " (" << detail << ")";
    }
    return os.str();
}

namespace {

std::string join_issues(const std::vector<ValidationIssue>& issues) {
    std::ostringstream os;
    os << "plan validation failed with " << issues.size() << " issue(s):";
    for (const auto& issue : issues) {
        os << "\n  - " << issue.to_string();
    }
    return os.str();
}

} // namespace

PlanValidationError::PlanValidationError(std::vector<ValidationIssue> issues)
    : Error(join_issues(issues)), issues_(std::move(issues)) {}

ArgValue ArgValue::make_constant(json v) {
    ArgValue a;
    a.kind = Kind::Constant;
    a.constant = std::move(v);
    return a;
}

ArgValue ArgValue::make_ref(int id) {
    ArgValue a;
    a.kind = Kind::Ref;
    a.ref = id;
    return a;
}

ArgValue ArgValue::make_mixed(std::string template_text) {
    ArgValue a;
    a.kind = Kind::Mixed;
    a.template_text = std::move(template_text);
    return a;
}

bool ArgValue::operator==(const ArgValue& other) const {
    if (kind != other.kind) return false;
    switch (kind) {
        case Kind::Constant: return constant == other.constant;
        case Kind::Ref: return ref == other.ref;
        case Kind::Mixed: return template_text == other.template_text;
    }
    return false;
}

std::set<int> scan_ref_tokens(const std::string& text) {
    std::set<int> refs;
    size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (c == '\\' && i + 1 < text.size()) {
            i += 2; // \$ and \\ shield the next character
            continue;
        }
        if (c == '$' && i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
            size_t j = i + 1;
            long id = 0;
            while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) {
                id = id * 10 + (text[j] - '0');
                ++j;
            }
            if (id > 0) {
                refs.insert(static_cast<int>(id));
            }
            i = j;
            continue;
        }
        ++i;
    }
    return refs;
}

std::set<int> extract_refs(const ArgValue& arg) {
    switch (arg.kind) {
        case ArgValue::Kind::Constant: return {};
        case ArgValue::Kind::Ref: return {arg.ref};
        case ArgValue::Kind::Mixed: return scan_ref_tokens(arg.template_text);
    }
    return {};
}

bool TaskSpec::operator==(const TaskSpec& other) const {
    return id == other.id && tool == other.tool && args == other.args &&
           deps == other.deps && is_join == other.is_join;
}

const TaskSpec* Plan::find(int id) const {
    for (const auto& t : tasks) {
        if (t.id == id) return &t;
    }
    return nullptr;
}

bool Plan::operator==(const Plan& other) const {
    return tasks == other.tasks && join_id == other.join_id;
}

namespace {

// Single-line cursor with lenient whitespace handling.
class LineLexer {
public:
    LineLexer(const std::string& text, int line_no) : text_(text), line_(line_no) {}

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool at_end() {
        skip_ws();
        return pos_ >= text_.size();
    }

    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

    bool consume(char c) {
        skip_ws();
        if (peek() == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c, const std::string& what) {
        if (!consume(c)) {
            fail("expected '" + std::string(1, c) + "' " + what);
        }
    }

    long read_integer() {
        skip_ws();
        size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (pos_ == start) fail("expected a number");
        return std::stol(text_.substr(start, pos_ - start));
    }

    std::string read_identifier() {
        skip_ws();
        size_t start = pos_;
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
                ++pos_;
            } else {
                break;
            }
        }
        if (pos_ == start) fail("expected an identifier");
        return text_.substr(start, pos_ - start);
    }

    // Inner text of a quoted string with \" unescaped; \\ and \$ are kept
    // escaped so reference scanning stays unambiguous.
    std::string read_quoted_template() {
        skip_ws();
        if (peek() != '"') fail("expected '\"'");
        ++pos_;
        std::string out;
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (c == '\\' && pos_ + 1 < text_.size()) {
                char next = text_[pos_ + 1];
                if (next == '"') {
                    out.push_back('"');
                } else {
                    out.push_back('\\');
                    out.push_back(next);
                }
                pos_ += 2;
                continue;
            }
            if (c == '"') {
                ++pos_;
                return out;
            }
            out.push_back(c);
            ++pos_;
        }
        fail("unterminated string");
        return {};
    }

    json read_number() {
        skip_ws();
        size_t start = pos_;
        if (peek() == '+' || peek() == '-') ++pos_;
        bool any = false;
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == 'e' || c == 'E' ||
                ((c == '+' || c == '-') && (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E'))) {
                ++pos_;
                any = true;
            } else {
                break;
            }
        }
        if (!any) fail("expected a number");
        std::string lexeme = text_.substr(start, pos_ - start);
        json parsed = json::parse(lexeme, nullptr, false);
        if (parsed.is_discarded() || !parsed.is_number()) {
            fail("malformed number '" + lexeme + "'");
        }
        return parsed;
    }

    [[noreturn]] void fail(const std::string& reason) {
        throw PlanSyntaxError(line_, reason + " at column " + std::to_string(pos_ + 1) +
                                         " in: " + text_);
    }

private:
    const std::string& text_;
    int line_;
    size_t pos_ = 0;
};

// Fully unescape a template into a plain string value.
std::string unescape_template(const std::string& tmpl) {
    std::string out;
    out.reserve(tmpl.size());
    for (size_t i = 0; i < tmpl.size(); ++i) {
        if (tmpl[i] == '\\' && i + 1 < tmpl.size()) {
            out.push_back(tmpl[i + 1]);
            ++i;
        } else {
            out.push_back(tmpl[i]);
        }
    }
    return out;
}

ArgValue parse_string_value(LineLexer& lex) {
    std::string tmpl = lex.read_quoted_template();
    if (!scan_ref_tokens(tmpl).empty()) {
        return ArgValue::make_mixed(tmpl);
    }
    return ArgValue::make_constant(json(unescape_template(tmpl)));
}

ArgValue parse_value(LineLexer& lex) {
    lex.skip_ws();
    char c = lex.peek();
    if (c == '"') {
        return parse_string_value(lex);
    }
    if (c == '$') {
        lex.consume('$');
        long id = lex.read_integer();
        if (id < 1) lex.fail("task reference must be >= 1");
        return ArgValue::make_ref(static_cast<int>(id));
    }
    if (c == '[') {
        lex.consume('[');
        json list = json::array();
        if (!lex.consume(']')) {
            while (true) {
                lex.skip_ws();
                char e = lex.peek();
                if (e == '"') {
                    std::string tmpl = lex.read_quoted_template();
                    if (!scan_ref_tokens(tmpl).empty()) {
                        lex.fail("task references are not allowed inside list values");
                    }
                    list.push_back(unescape_template(tmpl));
                } else if (e == '$') {
                    lex.fail("task references are not allowed inside list values");
                } else {
                    list.push_back(lex.read_number());
                }
                if (lex.consume(']')) break;
                lex.expect(',', "between list elements");
            }
        }
        return ArgValue::make_constant(std::move(list));
    }
    return ArgValue::make_constant(lex.read_number());
}

TaskSpec parse_task_line(const std::string& line, int line_no) {
    LineLexer lex(line, line_no);
    TaskSpec task;

    long id = lex.read_integer();
    if (id < 1) lex.fail("task id must be >= 1");
    task.id = static_cast<int>(id);
    lex.expect('.', "after the task id");
    task.tool = lex.read_identifier();
    task.is_join = (task.tool == "join");
    lex.expect('(', "after the tool name");

    if (!lex.consume(')')) {
        while (true) {
            std::string name = lex.read_identifier();
            for (const auto& [existing, _] : task.args) {
                if (existing == name) {
                    lex.fail("duplicate argument name '" + name + "'");
                }
            }
            lex.expect('=', "after argument name '" + name + "'");
            ArgValue value = parse_value(lex);
            task.args.emplace_back(name, std::move(value));
            if (lex.consume(')')) break;
            lex.expect(',', "between arguments");
        }
    }
    lex.consume(','); // the planner prompt's example format ends lines with ","
    if (!lex.at_end()) {
        lex.fail("unexpected trailing text");
    }

    for (const auto& [_, value] : task.args) {
        auto refs = extract_refs(value);
        task.deps.insert(refs.begin(), refs.end());
    }
    return task;
}

} // namespace

PlanDraft parse_plan(const std::string& text) {
    if (text.empty()) {
        throw PlanSyntaxError(0, "empty plan text");
    }
    PlanDraft draft;
    draft.raw_text = text;

    std::istringstream stream(text);
    std::string line;
    int line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t"));
        trimmed.erase(trimmed.find_last_not_of(" \t") + 1);
        if (trimmed.empty()) continue;
        if (trimmed == "<END_OF_PLAN>") {
            draft.end_marker_seen = true;
            continue;
        }
        draft.tasks.push_back(parse_task_line(line, line_no));
    }
    return draft;
}

namespace {

std::vector<ValidationIssue> structural_issues(const PlanDraft& draft) {
    std::vector<ValidationIssue> issues;
    const auto& tasks = draft.tasks;

    if (tasks.empty()) {
        issues.push_back({0, "empty plan", "no tasks parsed"});
        return issues;
    }

    std::set<int> seen_ids;
    int prev_id = 0;
    for (const auto& task : tasks) {
        if (task.id <= prev_id) {
            issues.push_back({task.id, "ids must be unique and strictly increasing",
                              "previous id was " + std::to_string(prev_id)});
        }
        prev_id = std::max(prev_id, task.id);
        for (int dep : task.deps) {
            if (dep >= task.id) {
                issues.push_back({task.id, "forward reference",
                                  "$" + std::to_string(dep) + " does not precede this task"});
            } else if (seen_ids.count(dep) == 0) {
                issues.push_back({task.id, "unknown reference",
                                  "$" + std::to_string(dep) + " matches no earlier task"});
            }
        }
        seen_ids.insert(task.id);
    }

    int join_count = 0;
    for (const auto& task : tasks) {
        if (task.is_join) {
            ++join_count;
            if (!task.args.empty()) {
                issues.push_back({task.id, "join takes no arguments", ""});
            }
        }
    }
    if (join_count == 0) {
        issues.push_back({0, "join must be last", "plan has no join task"});
    } else if (!tasks.back().is_join) {
        issues.push_back({tasks.back().id, "join must be last",
                          "last task is '" + tasks.back().tool + "'"});
    }
    if (join_count > 1) {
        issues.push_back({0, "plan must contain exactly one join",
                          std::to_string(join_count) + " join tasks found"});
    }
    return issues;
}

Plan assemble(const PlanDraft& draft) {
    Plan plan;
    plan.tasks = draft.tasks;
    for (const auto& task : plan.tasks) {
        if (task.is_join) plan.join_id = task.id;
    }
    return plan;
}

} // namespace

Plan validate_plan_structure(const PlanDraft& draft) {
    auto issues = structural_issues(draft);
    if (!issues.empty()) {
        throw PlanValidationError(std::move(issues));
    }
    return assemble(draft);
}

Plan validate_plan(const PlanDraft& draft, const ToolRegistry& registry) {
    auto issues = structural_issues(draft);

    for (const auto& task : draft.tasks) {
        if (task.is_join) continue;
        const ToolDescriptor* desc = registry.find_descriptor(task.tool);
        if (desc == nullptr) {
            issues.push_back({task.id, "unknown tool", "'" + task.tool + "' is not registered"});
            continue;
        }
        std::set<std::string> provided;
        for (const auto& [name, _] : task.args) {
            provided.insert(name);
            if (!desc->has_arg(name)) {
                issues.push_back({task.id, "unknown argument",
                                  "'" + name + "' is not accepted by " + task.tool});
            }
        }
        for (const auto& arg : desc->arg_schema) {
            if (arg.required && provided.count(arg.name) == 0) {
                issues.push_back({task.id, "missing required argument",
                                  "'" + arg.name + "' of " + task.tool});
            }
        }
    }

    if (!issues.empty()) {
        throw PlanValidationError(std::move(issues));
    }
    return assemble(draft);
}

namespace {

std::string escape_constant_string(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 4);
    for (char c : s) {
        if (c == '\\' || c == '"' || c == '$') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

std::string escape_mixed_template(const std::string& tmpl) {
    std::string out;
    out.reserve(tmpl.size() + 4);
    for (char c : tmpl) {
        if (c == '"') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

std::string render_value(const ArgValue& value) {
    switch (value.kind) {
        case ArgValue::Kind::Ref:
            return "$" + std::to_string(value.ref);
        case ArgValue::Kind::Mixed:
            return "\"" + escape_mixed_template(value.template_text) + "\"";
        case ArgValue::Kind::Constant:
            break;
    }
    const json& v = value.constant;
    if (v.is_string()) {
        return "\"" + escape_constant_string(v.get<std::string>()) + "\"";
    }
    if (v.is_array()) {
        std::string out = "[";
        bool first = true;
        for (const auto& item : v) {
            if (!first) out += ", ";
            first = false;
            if (item.is_string()) {
                out += "\"" + escape_constant_string(item.get<std::string>()) + "\"";
            } else {
                out += item.dump();
            }
        }
        out += "]";
        return out;
    }
    return v.dump();
}

} // namespace

std::string render_task(const TaskSpec& task) {
    std::string line = std::to_string(task.id) + ". " + task.tool + "(";
    bool first = true;
    for (const auto& [name, value] : task.args) {
        if (!first) line += ", ";
        first = false;
        line += name + "=" + render_value(value);
    }
    line += ")";
    return line;
}

std::string render_plan(const Plan& plan) {
    std::string out;
    for (const auto& task : plan.tasks) {
        out += render_task(task);
        out += "\n";
    }
    out += "<END_OF_PLAN>";
    return out;
}

} // namespace loom
