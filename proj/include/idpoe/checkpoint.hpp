// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

namespace idpoe {

/// Self-describing weight container.
///
/// Layout on disk:
///   8 bytes   magic "IDPOECKP"
///   u32 LE    format version (currently 1)
///   u64 LE    header length in bytes
///   header    UTF-8 JSON: {"format", "version", "model_kind", "config",
///             "schedule", "meta", "tensors": [{"name", "dtype", "shape",
///             "offset", "nbytes"}]}
///   payload   raw little-endian float32 tensor data, offsets relative to the
///             start of the payload
struct Checkpoint {
  static constexpr uint32_t kVersion = 1;

  std::string model_kind;
  nlohmann::json config;
  nlohmann::json schedule;
  nlohmann::json meta;
  std::vector<std::pair<std::string, torch::Tensor>> tensors;

  const torch::Tensor* find(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Named parameters and buffers of a module, detached float32 copies.
std::vector<std::pair<std::string, torch::Tensor>> module_tensors(
    const torch::nn::Module& module, const std::string& prefix = "");

/// Copies tensors named `prefix + name` from the checkpoint into the module.
/// Missing or mis-shaped entries raise DataError.
void load_module_tensors(torch::nn::Module& module, const Checkpoint& ckpt,
                         const std::string& prefix = "");

}  // namespace idpoe
