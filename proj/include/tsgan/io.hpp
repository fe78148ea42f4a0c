#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "tsgan/common.hpp"

namespace tsgan::io {

std::string version_string();

nlohmann::json load_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

/// Run manifest: command, config echo + hash, seed, timestamps, input/output
/// paths and the tool version. Exactly one per artifact directory.
nlohmann::json make_manifest(const std::string& command, const nlohmann::json& config,
                             std::uint64_t seed, const std::vector<std::string>& inputs,
                             const std::vector<std::string>& outputs);
void write_manifest(const std::string& dir, const nlohmann::json& manifest);

}  // namespace tsgan::io
