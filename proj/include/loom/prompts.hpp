#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "loom/errors.hpp"

namespace loom {

enum class Role { System, User, Assistant };

struct Message {
    Role role = Role::System;
    std::string content;
};

std::string role_name(Role role);

// A prompt template: ordered role-tagged messages with {placeholder}
// slots. Literal braces are escaped as {{ and }}.
struct PromptTemplate {
    std::string id;
    std::vector<Message> messages;
    std::set<std::string> placeholders; // declared; extracted at load time

    std::vector<Message> render(const std::map<std::string, std::string>& variables) const;
};

// The built-in template set: planner, replanner, decision, text2sql,
// text_analysis, data_preparation, data_plotting, intent_tables.
class PromptLibrary {
public:
    static PromptLibrary builtin();

    const PromptTemplate& get(const std::string& id) const;
    bool contains(const std::string& id) const { return templates_.count(id) > 0; }
    std::vector<std::string> ids() const;

    void add(PromptTemplate tmpl);

private:
    std::map<std::string, PromptTemplate> templates_;
};

} // namespace loom
