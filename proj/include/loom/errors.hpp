#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace loom {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Raised for a malformed plan line; the message is fed back to the
// replanner, so it carries the line number and offending text.
class PlanSyntaxError : public Error {
public:
    PlanSyntaxError(int line, std::string reason)
        : Error("line " + std::to_string(line) + ": " + reason),
          line_(line),
          reason_(std::move(reason)) {}

    int line() const { return line_; }
    const std::string& reason() const { return reason_; }

private:
    int line_;
    std::string reason_;
};

struct ValidationIssue {
    int task_id = 0; // 0 when the issue is plan-wide
    std::string rule;
    std::string detail;

    std::string to_string() const;
};

// Carries every violation found in one validation pass.
class PlanValidationError : public Error {
public:
    explicit PlanValidationError(std::vector<ValidationIssue> issues);

    const std::vector<ValidationIssue>& issues() const { return issues_; }

private:
    std::vector<ValidationIssue> issues_;
};

class CycleError : public Error {
public:
    using Error::Error;
};

class UnknownNodeError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class SqlError : public Error {
public:
    using Error::Error;
};

class PathEscapeError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

class MissingVariableError : public Error {
public:
    explicit MissingVariableError(const std::string& name)
        : Error("unresolved prompt placeholder: {" + name + "}"), name_(name) {}

    const std::string& name() const { return name_; }

private:
    std::string name_;
};

class TransportError : public Error {
public:
    using Error::Error;
};

class RateLimitError : public TransportError {
public:
    using TransportError::TransportError;
};

class AuthError : public Error {
public:
    using Error::Error;
};

// Scripted backend has no response registered for the computed key.
class ScriptMissError : public Error {
public:
    ScriptMissError(const std::string& key, const std::string& context)
        : Error("no scripted response for key " + key + " (" + context + ")"),
          key_(key) {}

    const std::string& key() const { return key_; }

private:
    std::string key_;
};

class DuplicateToolError : public Error {
public:
    using Error::Error;
};

class EmptyRegistryError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IncompleteTraceError : public Error {
public:
    using Error::Error;
};

class MalformedAnswerError : public Error {
public:
    using Error::Error;
};

} // namespace loom
