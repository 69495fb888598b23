#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "bikc/common.hpp"

namespace bikc::report {

// FNV-1a over the canonical dump; stable across runs and platforms.
uint64_t config_hash(const nlohmann::ordered_json& cfg);

// "git describe --always --dirty" of the working tree, or "unknown".
std::string git_describe();

nlohmann::ordered_json make_manifest(const std::string& command,
                                     const nlohmann::ordered_json& effective_config,
                                     uint64_t seed);

void write_manifest(const std::string& dir, const nlohmann::ordered_json& manifest);

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// Minimal CSV reader for our own outputs (no quoting or embedded commas).
Csv read_csv(const std::string& path);

// Reshape a metrics CSV into tidy long format with columns
// task,algo,metric,value,seed. Stage-qualified metrics keep their stage as a
// "<stage>/<column>" prefix except for the overall row.
void emit_plot_data(const std::string& metrics_csv, const std::string& out_csv, long seed);

}  // namespace bikc::report
