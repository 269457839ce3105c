// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "idpoe/core.hpp"

namespace idpoe {

/// Throws ConfigError unless `j` is an object whose keys all appear in
/// `known`.
inline void reject_unknown_keys(const nlohmann::json& j, std::string_view section,
                                std::initializer_list<std::string_view> known) {
  if (!j.is_object()) {
    throw ConfigError(std::string(section) + " must be an object");
  }
  for (const auto& item : j.items()) {
    bool found = false;
    for (auto k : known) found = found || item.key() == k;
    if (!found) {
      throw ConfigError("unknown key '" + item.key() + "' in " +
                        std::string(section));
    }
  }
}

/// Reads `key` into `out` when present; type errors become ConfigError.
template <typename T>
void read_optional(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

// JSON field names mirror the struct members one to one. Missing keys keep
// their defaults; unknown keys are rejected with ConfigError.
void to_json(nlohmann::json& j, const OptimizerConfig& c);
void from_json(const nlohmann::json& j, OptimizerConfig& c);
void to_json(nlohmann::json& j, const NetworkConfig& c);
void from_json(const nlohmann::json& j, NetworkConfig& c);
void to_json(nlohmann::json& j, const DiffusionConfig& c);
void from_json(const nlohmann::json& j, DiffusionConfig& c);

DiffusionConfig load_diffusion_config(const std::filesystem::path& path);
void save_diffusion_config(const DiffusionConfig& config,
                           const std::filesystem::path& path);

/// Reads a JSON document, wrapping parse failures in ConfigError.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace idpoe
