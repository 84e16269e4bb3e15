#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hidcode/channel.hpp"
#include "hidcode/codec.hpp"

namespace hidcode {

inline constexpr const char* kToolVersion = "0.1.0";

struct ManifestEntry {
    std::string image;
    std::string label;
    std::string mask;  // empty = none
};

// File layout: one JSON header line {corpus_id, seed}, then one JSON object
// per entry. Relative paths resolve against the manifest's directory.
struct DatasetManifest {
    std::string corpus_id;
    std::uint64_t seed = 0;
    std::vector<ManifestEntry> entries;
};

DatasetManifest load_manifest(const std::string& path, bool check_paths = true);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

struct RunManifest {
    std::string tool_version = kToolVersion;
    std::string codebook_hash;
    ScaleSchedule schedule;
    std::uint32_t V = 0;
    int k = 0;
    std::size_t m_bits = 0;
    ChannelConfig channel;
    std::string predictor;
    double tau = 0.05;
    nlohmann::json degradations = nlohmann::json::array();
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
};

void save_run_manifest(const RunManifest& manifest, const std::string& path);
RunManifest load_run_manifest(const std::string& path);

struct ResultRow {
    std::string id;
    std::string metric;
    double value = 0.0;
};

// CSV columns: id, metric, value.
void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path);

// write-temp-then-rename; the writer receives the temporary path
void atomic_write(const std::string& path, const std::function<void(const std::string&)>& writer);
void atomic_write_text(const std::string& path, const std::string& content);

}  // namespace hidcode
