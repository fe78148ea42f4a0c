#include "tsgan/checkpoint.hpp"

#include <fstream>

namespace tsgan::checkpoint {

using nlohmann::json;

namespace {
constexpr int kVersion = 1;
constexpr const char* kFormat = "tsgan-checkpoint";
}  // namespace

json params_to_json(const autodiff::ParamSet& params) {
  json out = json::object();
  for (const autodiff::Param* p : params) {
    if (out.contains(p->name)) throw ValueError("checkpoint: duplicate param name " + p->name);
    json entry;
    entry["shape"] = p->value.shape;
    entry["values"] = p->value.values;
    out[p->name] = std::move(entry);
  }
  return out;
}

void params_from_json(const json& j, const autodiff::ParamSet& params) {
  for (autodiff::Param* p : params) {
    if (!j.contains(p->name)) throw ValueError("checkpoint: missing param " + p->name);
    const json& entry = j.at(p->name);
    Shape shape = entry.at("shape").get<Shape>();
    if (shape != p->value.shape)
      throw ShapeError("checkpoint: param " + p->name + " has shape " + shape_str(shape) +
                       ", expected " + shape_str(p->value.shape));
    std::vector<double> values = entry.at("values").get<std::vector<double>>();
    if (values.size() != p->value.size())
      throw ShapeError("checkpoint: param " + p->name + " value count mismatch");
    p->value.values = std::move(values);
  }
}

void save(const std::string& path, const json& arch, const autodiff::ParamSet& params) {
  json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["arch"] = arch;
  doc["params"] = params_to_json(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("checkpoint: cannot write " + path);
  out << doc.dump(1, '\t') << "\n";
  if (!out) throw IoError("checkpoint: write failed for " + path);
}

json load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot read " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError("checkpoint: " + path + " is not valid JSON: " + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != kFormat)
    throw IoError("checkpoint: " + path + " is not a checkpoint file");
  if (doc.value("version", -1) != kVersion)
    throw IoError("checkpoint: unsupported version in " + path);
  return doc;
}

}  // namespace tsgan::checkpoint
