#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "loom/builtin_tools.hpp"
#include "loom/control.hpp"

namespace loom {

// Operator-facing configuration, loaded from a JSON file. Scripted mode
// needs a fixture directory; live mode needs an endpoint whose key comes
// from an environment variable, never from the file itself.
struct EngineConfig {
    std::filesystem::path lake_manifest;
    std::string artifact_dir = "artifacts";

    int workers = 4;
    int selfdebug_retries = 1;
    int max_replans = 2;
    double task_timeout_seconds = 120.0;
    bool fail_fast = false;
    std::size_t state_cap_chars = 4096;
    std::string business_rules;

    // llm
    std::string llm_mode = "scripted"; // scripted | http
    std::string fixture_dir;
    EndpointConfig endpoint;
    RateCard rates;

    // tools
    std::string vqa_mode = "fixture"; // fixture | http | off
    std::string vqa_fixture_file;
    std::string vqa_base_url;
    bool vqa_inline_bytes = false;
    std::string sandbox_base_url;
    std::string data_preparation_mode = "direct"; // direct | script
    std::vector<std::string> enabled_tools;

    static EngineConfig load(const std::filesystem::path& file);
    void validate() const; // throws ConfigError
};

// A fully wired engine: lake, registry, gateway, and the control loop.
struct EngineRuntime {
    std::unique_ptr<DataLake> lake;
    std::unique_ptr<ToolRegistry> registry;
    std::shared_ptr<LlmBackend> backend;
    std::unique_ptr<Gateway> gateway;
    std::unique_ptr<Engine> engine;

    ScriptedLlmBackend* scripted_backend(); // nullptr in http mode
};

EngineRuntime make_engine(const EngineConfig& config);

} // namespace loom
