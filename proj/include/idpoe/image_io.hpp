// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include <torch/torch.h>

namespace idpoe {

/// Binary PPM (P6, maxval 255). Image tensors are uint8 (H, W, 3).
void write_ppm(const std::filesystem::path& path, const torch::Tensor& image);
torch::Tensor read_ppm(const std::filesystem::path& path);

/// Lowercase hex SHA-256 of a file or a byte string.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(const std::string& bytes);

/// Writes `text` to a temporary sibling and renames it into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace idpoe
