#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <torch/torch.h>

#include <json.hpp>

#include "a2v/config.hpp"

namespace a2v {

using TensorMap = std::map<std::string, torch::Tensor>;

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Archive layout (little endian):
///   "A2VCKPT\0" | u32 version | u32 header_len | header JSON |
///   u32 tensor_count | tensors... | u32 crc32(everything before)
/// Each tensor: u32 name_len | name | u8 dtype | u32 ndim | i64 dims[ndim] | raw data.
/// The header carries the config, its fingerprint and free-form state.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string fingerprint;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json state = nlohmann::json::object();
  TensorMap tensors;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

/// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Verifies checksum and version. When `expected` is given its fingerprint must
/// match the stored one unless `allow_mismatch` is set.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const Config* expected = nullptr, bool allow_mismatch = false);

/// Config stored in the archive, validated.
Config checkpoint_config(const Checkpoint& ckpt);

/// Copies parameters and buffers of `module` into `out` under `prefix.`.
void export_module(const torch::nn::Module& module, const std::string& prefix, TensorMap& out);

/// Loads every parameter and buffer of `module` from `prefix.*` entries.
/// Missing entries or shape mismatches throw WeightsShapeMismatch.
void import_module(torch::nn::Module& module, const std::string& prefix, const TensorMap& in);

/// Reads a bare tensor archive (a checkpoint whose config may be empty), used
/// by the weight-loading hooks.
TensorMap load_tensor_file(const std::filesystem::path& path);

/// Hash of every tensor's bytes in name order; used to prove immutability.
std::string tensors_digest(const TensorMap& tensors);

}  // namespace a2v
