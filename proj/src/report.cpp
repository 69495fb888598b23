#include "bikc/report.hpp"

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace bikc::report {

uint64_t config_hash(const nlohmann::ordered_json& cfg) {
    std::string s = cfg.dump();
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string git_describe() {
    std::array<char, 128> buf{};
    std::string out;
    FILE* pipe = popen("git describe --always --dirty 2>/dev/null", "r");
    if (!pipe) return "unknown";
    while (fgets(buf.data(), buf.size(), pipe)) out += buf.data();
    pclose(pipe);
    while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
    return out.empty() ? "unknown" : out;
}

nlohmann::ordered_json make_manifest(const std::string& command,
                                     const nlohmann::ordered_json& effective_config,
                                     uint64_t seed) {
    nlohmann::ordered_json m;
    m["command"] = command;
    m["config"] = effective_config;
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(config_hash(effective_config)));
    m["config_hash"] = hex;
    m["seed"] = seed;
    m["git_describe"] = git_describe();
    return m;
}

void write_manifest(const std::string& dir, const nlohmann::ordered_json& manifest) {
    std::filesystem::create_directories(dir);
    std::ofstream out(std::filesystem::path(dir) / "manifest.json");
    if (!out) throw ConfigError("cannot write manifest under " + dir);
    out << manifest.dump(2) << "\n";
}

Csv read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read: " + path);
    Csv csv;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (line.back() == ',') fields.push_back("");
        if (line_no == 1) {
            csv.header = std::move(fields);
        } else {
            if (fields.size() != csv.header.size())
                throw ContractError("csv parse error at row " + std::to_string(line_no) + " of " +
                                    path + ": expected " + std::to_string(csv.header.size()) +
                                    " fields, got " + std::to_string(fields.size()));
            csv.rows.push_back(std::move(fields));
        }
    }
    if (csv.header.empty()) throw ContractError("csv parse error: " + path + " has no header");
    return csv;
}

void emit_plot_data(const std::string& metrics_csv, const std::string& out_csv, long seed) {
    Csv csv = read_csv(metrics_csv);
    auto col = [&](const std::string& name) {
        for (std::size_t i = 0; i < csv.header.size(); ++i)
            if (csv.header[i] == name) return static_cast<long>(i);
        throw ContractError("csv parse error: " + metrics_csv + " lacks column " + name);
    };
    long c_task = col("task"), c_algo = col("algo"), c_stage = col("stage");
    const std::array<std::string, 4> metrics{"rate", "nfe_mean", "latency_ms_p50",
                                             "duration_ticks_mean"};
    std::array<long, 4> idx{};
    for (std::size_t m = 0; m < metrics.size(); ++m) idx[m] = col(metrics[m]);

    std::ofstream out(out_csv);
    if (!out) throw ConfigError("cannot write: " + out_csv);
    out << "task,algo,metric,value,seed\n";
    for (const auto& row : csv.rows) {
        const std::string& stage = row[static_cast<std::size_t>(c_stage)];
        for (std::size_t m = 0; m < metrics.size(); ++m) {
            std::string metric = stage == "overall" ? metrics[m] : stage + "/" + metrics[m];
            out << row[static_cast<std::size_t>(c_task)] << ","
                << row[static_cast<std::size_t>(c_algo)] << "," << metric << ","
                << row[static_cast<std::size_t>(idx[m])] << "," << seed << "\n";
        }
    }
}

}  // namespace bikc::report
