#pragma once

#include <filesystem>
#include <string>

#include "vqa/params.hpp"

namespace vqa {

// Binary checkpoint:
//   "VQAC" | u32 version | u64 config length | config text
//   u32 parameter count, then per parameter:
//   u32 name length | name | u32 rank | u64 extent * rank | f64 values
// All integers and doubles little-endian.
struct Checkpoint {
  std::string config_text;
  ParamStore params;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::string_view bytes, const std::string& source = "checkpoint");

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vqa
