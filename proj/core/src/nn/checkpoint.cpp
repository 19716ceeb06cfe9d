#include "flowtwin/nn/checkpoint.hpp"

#include <sstream>

#include "flowtwin/textio.hpp"
#include "json.hpp"

namespace flowtwin::nn {

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (!ckpt.header.count("variant") || !ckpt.header.count("config_hash"))
    throw std::invalid_argument("checkpoint header needs variant and config_hash");
  std::ostringstream out;
  out << "{\"header\":{";
  bool first = true;
  for (const auto& [k, v] : ckpt.header) {
    if (!first) out << ",";
    first = false;
    out << "\"" << json_escape(k) << "\":\"" << json_escape(v) << "\"";
  }
  out << "},\"params\":{";
  first = true;
  for (const auto& [name, tensor] : ckpt.params) {
    if (!first) out << ",";
    first = false;
    out << "\"" << json_escape(name) << "\":{\"shape\":[" << tensor.rows() << ","
        << tensor.cols() << "],\"values\":[";
    for (size_t i = 0; i < tensor.size(); ++i) {
      if (i) out << ",";
      out << format_exact(tensor.data()[i]);
    }
    out << "]}";
  }
  out << "}}\n";
  write_text_file(path, out.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint " + path.string() + ": " + e.what());
  }
  Checkpoint ckpt;
  try {
    for (const auto& [k, v] : doc.at("header").items()) {
      ckpt.header[k] = v.get<std::string>();
    }
    for (const auto& [name, pj] : doc.at("params").items()) {
      const auto& shape = pj.at("shape");
      int rows = shape.at(0).get<int>();
      int cols = shape.at(1).get<int>();
      std::vector<double> values;
      values.reserve(pj.at("values").size());
      for (const auto& v : pj.at("values")) values.push_back(v.get<double>());
      ckpt.params.insert(name, Tensor::from_values(rows, cols, std::move(values)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint " + path.string() + ": schema violation: " + e.what());
  }
  if (!ckpt.header.count("variant") || !ckpt.header.count("config_hash"))
    throw ParseError("checkpoint " + path.string() + ": header missing variant/config_hash");
  return ckpt;
}

}  // namespace flowtwin::nn
