// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#include "idpoe/config_io.hpp"

#include <fstream>

namespace idpoe {

void to_json(nlohmann::json& j, const OptimizerConfig& c) {
  j = {{"lr", c.lr},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"batch_size", c.batch_size},
       {"epochs", c.epochs},
       {"lr_decay", c.lr_decay}};
}

void from_json(const nlohmann::json& j, OptimizerConfig& c) {
  reject_unknown_keys(j, "optimizer",
                 {"lr", "beta1", "beta2", "batch_size", "epochs", "lr_decay"});
  read_optional(j, "lr", c.lr);
  read_optional(j, "beta1", c.beta1);
  read_optional(j, "beta2", c.beta2);
  read_optional(j, "batch_size", c.batch_size);
  read_optional(j, "epochs", c.epochs);
  read_optional(j, "lr_decay", c.lr_decay);
}

void to_json(nlohmann::json& j, const NetworkConfig& c) {
  j = {{"base_fields", c.base_fields},   {"channel_mults", c.channel_mults},
       {"res_blocks", c.res_blocks},     {"attention", c.attention},
       {"attention_heads", c.attention_heads}, {"embed_dim", c.embed_dim},
       {"head_hidden", c.head_hidden},   {"head_grid", c.head_grid}};
}

void from_json(const nlohmann::json& j, NetworkConfig& c) {
  reject_unknown_keys(j, "network",
                 {"base_fields", "channel_mults", "res_blocks", "attention",
                  "attention_heads", "embed_dim", "head_hidden", "head_grid"});
  read_optional(j, "base_fields", c.base_fields);
  read_optional(j, "channel_mults", c.channel_mults);
  read_optional(j, "res_blocks", c.res_blocks);
  read_optional(j, "attention", c.attention);
  read_optional(j, "attention_heads", c.attention_heads);
  read_optional(j, "embed_dim", c.embed_dim);
  read_optional(j, "head_hidden", c.head_hidden);
  read_optional(j, "head_grid", c.head_grid);
}

void to_json(nlohmann::json& j, const DiffusionConfig& c) {
  j = {{"T", c.T},
       {"beta_start", c.beta_start},
       {"beta_end", c.beta_end},
       {"schedule_kind", to_string(c.schedule_kind)},
       {"gamma", c.gamma},
       {"group_order", c.group_order},
       {"L", c.L},
       {"N", c.N},
       {"H", c.H},
       {"W", c.W},
       {"optimizer", c.optimizer},
       {"network", c.network},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, DiffusionConfig& c) {
  reject_unknown_keys(j, "diffusion config",
                 {"T", "beta_start", "beta_end", "schedule_kind", "gamma",
                  "group_order", "L", "N", "H", "W", "optimizer", "network",
                  "seed"});
  read_optional(j, "T", c.T);
  read_optional(j, "beta_start", c.beta_start);
  read_optional(j, "beta_end", c.beta_end);
  if (auto it = j.find("schedule_kind"); it != j.end()) {
    c.schedule_kind = schedule_kind_from_string(it->get<std::string>());
  }
  read_optional(j, "gamma", c.gamma);
  read_optional(j, "group_order", c.group_order);
  read_optional(j, "L", c.L);
  read_optional(j, "N", c.N);
  read_optional(j, "H", c.H);
  read_optional(j, "W", c.W);
  if (auto it = j.find("optimizer"); it != j.end()) from_json(*it, c.optimizer);
  if (auto it = j.find("network"); it != j.end()) from_json(*it, c.network);
  read_optional(j, "seed", c.seed);
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

DiffusionConfig load_diffusion_config(const std::filesystem::path& path) {
  auto j = read_json_file(path);
  DiffusionConfig c;
  from_json(j, c);
  c.validate();
  return c;
}

void save_diffusion_config(const DiffusionConfig& config,
                           const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << nlohmann::json(config).dump(2) << '\n';
}

}  // namespace idpoe
