#include "tsgan/io.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

namespace tsgan::io {

std::string version_string() { return "tsgan 0.1.0"; }

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + " is not valid JSON: " + e.what());
  }
  return j;
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(1, '\t') << "\n";
  if (!out) throw IoError("write failed for " + path);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed for " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return out;
}

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

nlohmann::json make_manifest(const std::string& command, const nlohmann::json& config,
                             std::uint64_t seed, const std::vector<std::string>& inputs,
                             const std::vector<std::string>& outputs) {
  nlohmann::json m;
  m["command"] = command;
  m["version"] = version_string();
  m["seed"] = seed;
  m["config"] = config;
  m["config_hash"] = fnv1a_hex(config.dump());
  m["inputs"] = inputs;
  m["outputs"] = outputs;
  m["created_utc"] = utc_now();
  return m;
}

void write_manifest(const std::string& dir, const nlohmann::json& manifest) {
  write_json_file(dir + "/manifest.json", manifest);
}

}  // namespace tsgan::io
