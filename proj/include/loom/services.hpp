#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "loom/errors.hpp"
#include "loom/json.hpp"

namespace loom {

struct VqaAnswer {
    std::string image_path;
    std::string answer;
    std::optional<double> confidence;
    std::string error; // per-item transport failure, empty on success

    bool ok() const { return error.empty(); }
    json to_json() const;
};

// Visual question answering client. One question, one image per call;
// batch fan-out lives in the tool.
class VqaClient {
public:
    virtual ~VqaClient() = default;
    virtual VqaAnswer ask(const std::string& question, const std::string& image_path) = 0;
};

// POST {base_url}/vqa {"question", "image_path"} -> {"answer", "confidence"?}.
// The service resolves the path itself (co-located deployment); inline
// bytes mode sends {"image_b64"} instead for remote services.
class HttpVqaClient : public VqaClient {
public:
    HttpVqaClient(std::string base_url, bool inline_bytes = false,
                  std::filesystem::path media_base = {});

    VqaAnswer ask(const std::string& question, const std::string& image_path) override;

private:
    std::string base_url_;
    bool inline_bytes_;
    std::filesystem::path media_base_;
};

// Deterministic test client answering from a fixture table. Lookup is
// exact (question, image), then image-only, then the default answer.
class FixtureVqaClient : public VqaClient {
public:
    static FixtureVqaClient from_file(const std::filesystem::path& file);
    static FixtureVqaClient from_json(const json& doc);

    VqaAnswer ask(const std::string& question, const std::string& image_path) override;

    void add(const std::string& question, const std::string& image, const std::string& answer);
    void set_default(const std::string& answer) { default_answer_ = answer; }

private:
    std::map<std::pair<std::string, std::string>, std::string> by_question_image_;
    std::map<std::string, std::string> by_image_;
    std::optional<std::string> default_answer_;
};

struct SandboxResult {
    json stdout_structure;
    std::vector<std::string> files;
};

// Execution service for model-written scripts: the engine never runs
// script text in-process. POST {base_url}/run {"script", "inputs",
// "artifact_dir"} -> {"stdout_structure", "files"}.
class SandboxClient {
public:
    virtual ~SandboxClient() = default;
    virtual SandboxResult run(const std::string& script, const json& inputs,
                              const std::string& artifact_dir) = 0;
};

class HttpSandboxClient : public SandboxClient {
public:
    explicit HttpSandboxClient(std::string base_url);

    SandboxResult run(const std::string& script, const json& inputs,
                      const std::string& artifact_dir) override;

private:
    std::string base_url_;
};

// Renders a validated chart spec to a file.
class ChartRenderer {
public:
    virtual ~ChartRenderer() = default;
    virtual void render(const json& chart_spec, const std::filesystem::path& out_file) = 0;
};

// Writes a placeholder image; chart correctness is judged on the spec
// data, not pixels.
class StubChartRenderer : public ChartRenderer {
public:
    void render(const json& chart_spec, const std::filesystem::path& out_file) override;
};

void write_placeholder_png(const std::filesystem::path& path);

} // namespace loom
