#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "flowtwin/nn/gru.hpp"

namespace flowtwin::nn {

/// Model checkpoint: a header (variant, config hash, free-form entries) plus
/// every parameter as shape + flat values. Values round-trip exactly.
struct Checkpoint {
  std::map<std::string, std::string> header;  // must carry "variant" and "config_hash"
  ParamStore params;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace flowtwin::nn
