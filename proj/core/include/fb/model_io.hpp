#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "fb/fb_model.hpp"

namespace fb {

/// Model file layout (little-endian):
///   "FBMODEL\0", u32 version, u32 env id, i32 env parameter, u32 d,
///   u32 n + n x u32 F layer sizes, u32 m + m x u32 B layer sizes,
///   f64 parameters of F, B, F target, B target (weight row-major then bias
///   per layer), u64 length + config echo text.
inline constexpr std::uint32_t kModelFormatVersion = 1;

struct LoadedModel {
  std::shared_ptr<FBModel> model;
  std::string config;
};

void save_model(const std::filesystem::path& path, const FBModel& model, const std::string& config = {});
/// Throws std::runtime_error on a missing file, bad magic, unsupported version
/// or truncated data.
LoadedModel load_model(const std::filesystem::path& path);

/// FNV-1a over the file's bytes.
std::uint64_t file_checksum(const std::filesystem::path& path);

}  // namespace fb
