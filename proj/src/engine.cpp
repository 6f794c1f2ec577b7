#include "loom/engine.hpp"

#include <fstream>

namespace loom {

namespace fs = std::filesystem;

EngineConfig EngineConfig::load(const fs::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw ConfigError("cannot open engine config: " + file.string());
    }
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw ConfigError("engine config is not valid JSON: " + file.string());
    }
    EngineConfig cfg;
    fs::path base = file.parent_path();
    auto resolve = [&base](const std::string& p) {
        fs::path path(p);
        return path.is_absolute() ? path : base / path;
    };

    cfg.lake_manifest = resolve(doc.at("lake_manifest").get<std::string>());
    cfg.artifact_dir = doc.contains("artifact_dir")
                           ? resolve(doc["artifact_dir"].get<std::string>()).string()
                           : (base / "artifacts").string();
    cfg.workers = doc.value("workers", 4);
    cfg.selfdebug_retries = doc.value("selfdebug_retries", 1);
    cfg.max_replans = doc.value("max_replans", 2);
    cfg.task_timeout_seconds = doc.value("task_timeout_seconds", 120.0);
    cfg.fail_fast = doc.value("fail_fast", false);
    cfg.state_cap_chars = doc.value("state_cap_chars", 4096);
    cfg.business_rules = doc.value("business_rules", "");

    if (doc.contains("llm")) {
        const json& llm = doc["llm"];
        cfg.llm_mode = llm.value("mode", "scripted");
        if (llm.contains("fixture_dir")) {
            cfg.fixture_dir = resolve(llm["fixture_dir"].get<std::string>()).string();
        }
        cfg.endpoint.base_url = llm.value("base_url", "");
        cfg.endpoint.path = llm.value("path", "/v1/chat/completions");
        cfg.endpoint.model = llm.value("model", "");
        cfg.endpoint.api_key_env = llm.value("api_key_env", "LOOM_API_KEY");
        cfg.endpoint.max_retries = llm.value("max_retries", 3);
        cfg.endpoint.backoff_ms = llm.value("backoff_ms", 250);
        cfg.endpoint.timeout_seconds = llm.value("timeout_seconds", 120.0);
        cfg.rates.input_per_1k = llm.value("rate_in_per_1k", 0.0);
        cfg.rates.output_per_1k = llm.value("rate_out_per_1k", 0.0);
    }
    if (doc.contains("vqa")) {
        const json& vqa = doc["vqa"];
        cfg.vqa_mode = vqa.value("mode", "fixture");
        if (vqa.contains("fixture_file")) {
            cfg.vqa_fixture_file = resolve(vqa["fixture_file"].get<std::string>()).string();
        }
        cfg.vqa_base_url = vqa.value("base_url", "");
        cfg.vqa_inline_bytes = vqa.value("inline_bytes", false);
    }
    if (doc.contains("sandbox")) {
        cfg.sandbox_base_url = doc["sandbox"].value("base_url", "");
    }
    cfg.data_preparation_mode = doc.value("data_preparation_mode", "direct");
    if (doc.contains("tools")) {
        for (const auto& t : doc["tools"]) cfg.enabled_tools.push_back(t.get<std::string>());
    }
    cfg.validate();
    return cfg;
}

void EngineConfig::validate() const {
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (selfdebug_retries < 0) throw ConfigError("selfdebug_retries must be >= 0");
    if (max_replans < 0) throw ConfigError("max_replans must be >= 0");
    if (llm_mode == "scripted") {
        if (fixture_dir.empty()) {
            throw ConfigError("scripted llm mode requires llm.fixture_dir");
        }
    } else if (llm_mode == "http") {
        if (endpoint.base_url.empty()) {
            throw ConfigError("http llm mode requires llm.base_url");
        }
        if (endpoint.api_key_env.empty()) {
            throw ConfigError("http llm mode requires llm.api_key_env");
        }
    } else {
        throw ConfigError("unknown llm mode: " + llm_mode);
    }
    if (vqa_mode == "fixture") {
        if (vqa_fixture_file.empty()) {
            throw ConfigError("fixture vqa mode requires vqa.fixture_file");
        }
    } else if (vqa_mode == "http") {
        if (vqa_base_url.empty()) {
            throw ConfigError("http vqa mode requires vqa.base_url");
        }
    } else if (vqa_mode != "off") {
        throw ConfigError("unknown vqa mode: " + vqa_mode);
    }
    if (data_preparation_mode == "script" && sandbox_base_url.empty()) {
        throw ConfigError("script data_preparation mode requires sandbox.base_url");
    }
    if (data_preparation_mode != "script" && data_preparation_mode != "direct") {
        throw ConfigError("unknown data_preparation mode: " + data_preparation_mode);
    }
}

ScriptedLlmBackend* EngineRuntime::scripted_backend() {
    return dynamic_cast<ScriptedLlmBackend*>(backend.get());
}

EngineRuntime make_engine(const EngineConfig& config) {
    config.validate();
    EngineRuntime rt;

    rt.lake = std::make_unique<DataLake>(LakeManifest::load(config.lake_manifest));

    if (config.llm_mode == "scripted") {
        auto scripted = std::make_shared<ScriptedLlmBackend>();
        scripted->load_directory(config.fixture_dir);
        rt.backend = scripted;
    } else {
        rt.backend = std::make_shared<HttpLlmBackend>(config.endpoint);
    }
    rt.gateway = std::make_unique<Gateway>(PromptLibrary::builtin(), rt.backend, config.rates);

    BuiltinToolOptions tools;
    if (config.vqa_mode == "fixture") {
        tools.vqa = std::make_shared<FixtureVqaClient>(
            FixtureVqaClient::from_file(config.vqa_fixture_file));
    } else if (config.vqa_mode == "http") {
        tools.vqa = std::make_shared<HttpVqaClient>(
            config.vqa_base_url, config.vqa_inline_bytes,
            rt.lake->manifest().media_root.parent_path());
    }
    if (!config.sandbox_base_url.empty()) {
        tools.sandbox = std::make_shared<HttpSandboxClient>(config.sandbox_base_url);
    }
    tools.data_preparation_mode = config.data_preparation_mode == "script"
                                      ? DataPrepMode::Script
                                      : DataPrepMode::Direct;
    tools.enabled = config.enabled_tools;

    rt.registry = std::make_unique<ToolRegistry>();
    register_builtin_tools(*rt.registry, tools);

    ControlConfig control;
    control.max_replans = config.max_replans;
    control.executor.workers = config.workers;
    control.executor.selfdebug_retries = config.selfdebug_retries;
    control.executor.task_timeout_seconds = config.task_timeout_seconds;
    control.executor.fail_fast = config.fail_fast;
    control.state_cap_chars = config.state_cap_chars;
    control.business_rules = config.business_rules;

    rt.engine = std::make_unique<Engine>(*rt.lake, *rt.registry, *rt.gateway, control,
                                         config.artifact_dir);
    return rt;
}

} // namespace loom
