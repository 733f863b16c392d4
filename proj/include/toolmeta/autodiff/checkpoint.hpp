#pragma once

#include <filesystem>
#include <string>

#include "toolmeta/autodiff/param_vector.hpp"

namespace toolmeta::ad {

/// Binary parameter container, version 1:
///
///   "TMCKPT" | u32 version | u64 header_len | header bytes
///   | u32 segment_count | { u32 name_len | name | u64 offset | u64 length }*
///   | u64 value_count | value_count little-endian IEEE-754 doubles
///
/// The free-form header lets higher layers (policy spec) tag the file.
struct Checkpoint {
  std::string header;
  ParamVector params;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace toolmeta::ad
