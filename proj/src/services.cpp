#include "loom/services.hpp"

#include <httplib.h>

#include <fstream>

namespace loom {

namespace fs = std::filesystem;

json VqaAnswer::to_json() const {
    json out{{"image_path", image_path}};
    if (ok()) {
        out["answer"] = answer;
        if (confidence.has_value()) out["confidence"] = *confidence;
    } else {
        out["error"] = error;
    }
    return out;
}

HttpVqaClient::HttpVqaClient(std::string base_url, bool inline_bytes, fs::path media_base)
    : base_url_(std::move(base_url)),
      inline_bytes_(inline_bytes),
      media_base_(std::move(media_base)) {}

namespace {

std::string base64_encode(const std::string& bytes) {
    static const char* alphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 2 < bytes.size()) {
        unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                     (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                     static_cast<unsigned char>(bytes[i + 2]);
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out.push_back(alphabet[(v >> 6) & 63]);
        out.push_back(alphabet[v & 63]);
        i += 3;
    }
    if (i + 1 == bytes.size()) {
        unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out += "==";
    } else if (i + 2 == bytes.size()) {
        unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                     (static_cast<unsigned char>(bytes[i + 1]) << 8);
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out.push_back(alphabet[(v >> 6) & 63]);
        out += "=";
    }
    return out;
}

} // namespace

VqaAnswer HttpVqaClient::ask(const std::string& question, const std::string& image_path) {
    VqaAnswer result;
    result.image_path = image_path;

    json body{{"question", question}};
    if (inline_bytes_) {
        fs::path full = media_base_.empty() ? fs::path(image_path) : media_base_ / image_path;
        std::ifstream in(full, std::ios::binary);
        if (!in) {
            result.error = "cannot read image: " + full.string();
            return result;
        }
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        body["image_b64"] = base64_encode(bytes);
    } else {
        body["image_path"] = image_path;
    }

    httplib::Client client(base_url_);
    auto res = client.Post("/vqa", body.dump(), "application/json");
    if (!res) {
        result.error = "vqa transport failure: " + httplib::to_string(res.error());
        return result;
    }
    if (res->status != 200) {
        result.error = "vqa service returned HTTP " + std::to_string(res->status);
        return result;
    }
    json doc = json::parse(res->body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("answer")) {
        result.error = "vqa service returned malformed JSON";
        return result;
    }
    result.answer = doc["answer"].is_string() ? doc["answer"].get<std::string>()
                                              : doc["answer"].dump();
    if (doc.contains("confidence") && doc["confidence"].is_number()) {
        result.confidence = doc["confidence"].get<double>();
    }
    return result;
}

FixtureVqaClient FixtureVqaClient::from_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw IoError("cannot open vqa fixture: " + file.string());
    }
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) {
        throw IoError("vqa fixture is not valid JSON: " + file.string());
    }
    return from_json(doc);
}

FixtureVqaClient FixtureVqaClient::from_json(const json& doc) {
    FixtureVqaClient client;
    if (doc.contains("default")) {
        client.default_answer_ = doc["default"].get<std::string>();
    }
    for (const auto& entry : doc.value("entries", json::array())) {
        std::string image = entry.at("image").get<std::string>();
        std::string answer = entry.at("answer").get<std::string>();
        if (entry.contains("question")) {
            client.by_question_image_[{entry["question"].get<std::string>(), image}] = answer;
        } else {
            client.by_image_[image] = answer;
        }
    }
    return client;
}

void FixtureVqaClient::add(const std::string& question, const std::string& image,
                           const std::string& answer) {
    by_question_image_[{question, image}] = answer;
}

VqaAnswer FixtureVqaClient::ask(const std::string& question, const std::string& image_path) {
    VqaAnswer result;
    result.image_path = image_path;
    auto exact = by_question_image_.find({question, image_path});
    if (exact != by_question_image_.end()) {
        result.answer = exact->second;
        return result;
    }
    auto by_image = by_image_.find(image_path);
    if (by_image != by_image_.end()) {
        result.answer = by_image->second;
        return result;
    }
    if (default_answer_.has_value()) {
        result.answer = *default_answer_;
        return result;
    }
    result.error = "no fixture answer for (" + question + ", " + image_path + ")";
    return result;
}

HttpSandboxClient::HttpSandboxClient(std::string base_url) : base_url_(std::move(base_url)) {
    if (base_url_.empty()) {
        throw ConfigError("sandbox base_url is empty");
    }
}

SandboxResult HttpSandboxClient::run(const std::string& script, const json& inputs,
                                     const std::string& artifact_dir) {
    json body{{"script", script}, {"inputs", inputs}, {"artifact_dir", artifact_dir}};
    httplib::Client client(base_url_);
    auto res = client.Post("/run", body.dump(), "application/json");
    if (!res) {
        throw TransportError("sandbox transport failure: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw TransportError("sandbox returned HTTP " + std::to_string(res->status) + ": " +
                             res->body.substr(0, 200));
    }
    json doc = json::parse(res->body, nullptr, false);
    if (doc.is_discarded()) {
        throw TransportError("sandbox returned malformed JSON");
    }
    SandboxResult out;
    out.stdout_structure = doc.value("stdout_structure", json(nullptr));
    for (const auto& f : doc.value("files", json::array())) {
        out.files.push_back(f.get<std::string>());
    }
    return out;
}

namespace {

const unsigned char kTinyPng[] = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48,
    0x44, 0x52, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x00, 0x00, 0x00,
    0x00, 0x3a, 0x7e, 0x9b, 0x55, 0x00, 0x00, 0x00, 0x0a, 0x49, 0x44, 0x41, 0x54, 0x78,
    0x9c, 0x63, 0x62, 0x00, 0x00, 0x00, 0x06, 0x00, 0x03, 0x36, 0x37, 0x7c, 0xa8, 0x00,
    0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};

} // namespace

void write_placeholder_png(const fs::path& path) {
    if (!path.parent_path().empty()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write image: " + path.string());
    }
    out.write(reinterpret_cast<const char*>(kTinyPng), sizeof(kTinyPng));
}

void StubChartRenderer::render(const json& chart_spec, const fs::path& out_file) {
    (void)chart_spec;
    write_placeholder_png(out_file);
}

} // namespace loom
