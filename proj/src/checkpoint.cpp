#include "bikc/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <vector>

namespace bikc {

using nlohmann::ordered_json;

void save_checkpoint(const std::string& path, ordered_json header,
                     const nn::ParamStore& params) {
    params.check_finite("checkpoint save");
    ordered_json arrays = ordered_json::array();
    for (const auto& [name, v] : params)
        arrays.push_back({{"name", name}, {"shape", {v.rows(), v.cols()}}});
    header["arrays"] = arrays;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write checkpoint: " + path);
    out << header.dump() << "\n";
    std::vector<float> buf;
    for (const auto& [name, v] : params) {
        buf.clear();
        buf.reserve(static_cast<std::size_t>(v.size()));
        for (Eigen::Index r = 0; r < v.rows(); ++r)
            for (Eigen::Index c = 0; c < v.cols(); ++c)
                buf.push_back(static_cast<float>(v(r, c)));
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    if (!out) throw ConfigError("short write on checkpoint: " + path);
}

nn::ParamStore load_checkpoint(const std::string& path, ordered_json& header_out) {
    if (!std::filesystem::exists(path))
        throw ConfigError("checkpoint not found: " + path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read checkpoint: " + path);
    std::string header_line;
    if (!std::getline(in, header_line))
        throw ConfigError("checkpoint missing header: " + path);
    try {
        header_out = ordered_json::parse(header_line);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("checkpoint header parse error in " + path + ": " + e.what());
    }
    if (!header_out.contains("arrays"))
        throw ConfigError("checkpoint header lacks arrays list: " + path);

    nn::ParamStore params;
    for (const auto& arr : header_out["arrays"]) {
        std::string name = arr.at("name").get<std::string>();
        auto shape = arr.at("shape");
        Eigen::Index rows = shape.at(0).get<Eigen::Index>();
        Eigen::Index cols = shape.at(1).get<Eigen::Index>();
        std::vector<float> buf(static_cast<std::size_t>(rows * cols));
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (!in) throw ConfigError("checkpoint blob truncated at " + name + ": " + path);
        Eigen::MatrixXd v(rows, cols);
        std::size_t k = 0;
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c)
                v(r, c) = static_cast<double>(buf[k++]);
        params.add(name, std::move(v));
    }
    return params;
}

}  // namespace bikc
