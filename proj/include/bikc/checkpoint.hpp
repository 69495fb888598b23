#pragma once

#include <string>

#include <json.hpp>

#include "bikc/nn.hpp"

namespace bikc {

// Checkpoint file = one JSON header object, a single '\n', then a
// little-endian float32 blob of all arrays concatenated row-major in
// header order. The header's "arrays" list pins names and shapes.
void save_checkpoint(const std::string& path, nlohmann::ordered_json header,
                     const nn::ParamStore& params);

// Loads params and returns the header. Throws ConfigError on a missing
// file ("checkpoint not found: <path>") or malformed contents.
nn::ParamStore load_checkpoint(const std::string& path, nlohmann::ordered_json& header_out);

}  // namespace bikc
