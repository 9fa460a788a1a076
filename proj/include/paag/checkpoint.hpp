#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "paag/tensor.hpp"

namespace paag {

/// On-disk layout:
///   "PAAG1\n"
///   <manifest byte length, decimal>\n
///   <manifest JSON: tensors [{name, shape, dtype: "f64le", offset}], meta>
///   <raw little-endian float64 buffers; offsets relative to this point>
struct Checkpoint {
  std::vector<std::pair<std::string, Tensor>> tensors;
  nlohmann::json meta = nlohmann::json::object();

  const Tensor& find(const std::string& name) const;
};

inline constexpr const char* kCheckpointMagic = "PAAG1";

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

}  // namespace paag
