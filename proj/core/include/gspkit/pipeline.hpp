#pragma once

// End-to-end experiment orchestration with content-hash stage resumption.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace gspkit {

struct ExperimentConfig {
    nlohmann::json raw;  // validated config document

    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig from_json(const nlohmann::json& j);  // throws on invalid fields
    uint64_t master_seed() const { return raw.value("master_seed", uint64_t(0)); }
    std::string out_dir() const;
};

struct ManifestEntry {
    std::string stage;
    std::string path;
    uint64_t content_hash = 0;
    uint64_t stage_hash = 0;  // hash of stage config + upstream artifact hashes
    bool skipped = false;
};

struct RunManifest {
    uint64_t config_hash = 0;
    std::string tool_version;
    std::string started_at;
    std::string finished_at;
    std::vector<ManifestEntry> artifacts;

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
};

uint64_t file_content_hash(const std::string& path);

// collect -> train -> train-recognizer -> demo -> imitate -> report
RunManifest run_pipeline(const ExperimentConfig& config);

}  // namespace gspkit
