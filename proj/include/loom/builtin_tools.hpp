#pragma once

#include <memory>
#include <vector>

#include "loom/services.hpp"
#include "loom/tool_registry.hpp"

namespace loom {

enum class DataPrepMode {
    Direct, // the model returns the final structure; the engine persists it
    Script  // the model writes a script executed by the external sandbox
};

struct BuiltinToolOptions {
    std::shared_ptr<VqaClient> vqa;
    std::shared_ptr<SandboxClient> sandbox; // required only for Script mode
    std::shared_ptr<ChartRenderer> renderer = std::make_shared<StubChartRenderer>();
    DataPrepMode data_preparation_mode = DataPrepMode::Direct;
    std::vector<std::string> enabled; // empty = all
};

// Registers the expert tools: text2SQL, text_analysis, image_analysis,
// intent_tables, data_preparation, data_plotting.
void register_builtin_tools(ToolRegistry& registry, const BuiltinToolOptions& options);

// Normalizes and checks a model-produced chart spec: kind must be one of
// bar|line|scatter|pie, every series must match the category axis length,
// and the output name must end in .png. Throws Error with a message fit
// for repair feedback.
json validate_chart_spec(const json& raw, const std::string& default_name);

// Image paths referenced anywhere in a structured value (path-ish keys
// or image-suffixed strings), input order preserved, duplicates dropped.
std::vector<std::string> collect_image_paths(const json& value);

// First JSON value in model output: fenced block, object, or array.
json extract_json_value(const std::string& text);

} // namespace loom
