#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "nsl/nn/params.hpp"

namespace nsl {

// Versioned weight container: config JSON plus named float32 arrays.
struct Checkpoint {
  std::uint32_t version = 1;
  std::uint64_t step = 0;
  std::uint64_t seed = 0;
  std::string config_json;
  nn::ParamStore<float> params;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// FNV-1a over the serialized bytes; used by determinism tests and logs.
std::uint64_t checkpoint_file_hash(const std::filesystem::path& path);

}  // namespace nsl
