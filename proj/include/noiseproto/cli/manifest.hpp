#pragma once

#include <chrono>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "noiseproto/cli/config.hpp"

namespace noiseproto::cli {

// Hex SHA-1 of a git-style blob header plus the file content.
std::string git_blob_hash(const std::string& path);

// Write JSON to path via a temp file and rename.
void write_json_atomic(const std::string& path, const nlohmann::json& j);

nlohmann::json load_json(const std::string& path);

// Record of one command run: resolved config with value sources, content
// hashes of the inputs, stage timings and the resulting metrics. Re-running
// a command from its manifest reproduces the metrics.
class ManifestWriter {
public:
    ManifestWriter(std::string command, const Config& config);

    void add_input(const std::string& path);
    void add_output(const std::string& path);
    void set_metrics(const nlohmann::json& metrics);

    void stage_begin(const std::string& name);
    void stage_end(const std::string& name);

    void write(const std::string& path) const;

private:
    nlohmann::json doc_;
    std::map<std::string, std::chrono::steady_clock::time_point> open_stages_;
};

// Pull the resolved config values back out of a manifest.
std::map<std::string, std::string> manifest_config_values(const nlohmann::json& manifest);

}  // namespace noiseproto::cli
