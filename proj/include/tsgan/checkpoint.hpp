#pragma once

#include <string>

#include <json.hpp>

#include "tsgan/autodiff.hpp"

namespace tsgan::checkpoint {

// Version-tagged JSON checkpoint: {"format", "version", "arch", "params":
// {name -> {"shape", "values"}}}. Values round-trip bit-exact (shortest
// decimal representation recovers the same double).

nlohmann::json params_to_json(const autodiff::ParamSet& params);

/// Loads values into existing params by name. Missing names or shape
/// mismatches are errors.
void params_from_json(const nlohmann::json& j, const autodiff::ParamSet& params);

void save(const std::string& path, const nlohmann::json& arch, const autodiff::ParamSet& params);

/// Reads and validates a checkpoint file; returns the whole document.
nlohmann::json load_file(const std::string& path);

}  // namespace tsgan::checkpoint
