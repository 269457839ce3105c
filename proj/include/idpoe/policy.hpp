// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "idpoe/core.hpp"
#include "idpoe/equivariant/policy_network.hpp"
#include "idpoe/training.hpp"

namespace idpoe {

inline constexpr const char* kKindIdpoe = "idpoe";
inline constexpr const char* kKindIdpoeNoEquiv = "idpoe_no_equiv";

/// Same U-Net with plain convolutions (C_1) and as many channels per level
/// as the equivariant model has.
DiffusionConfig non_equivariant_variant(const DiffusionConfig& config);

nlohmann::json schedule_to_json(const NoiseSchedule& schedule);
NoiseSchedule schedule_from_json(const nlohmann::json& j);

/// Joint (clip, trajectory) noise-prediction model for the training loop.
class PolicyTrainable : public Trainable {
 public:
  PolicyTrainable(const DiffusionConfig& config, std::string kind = kKindIdpoe);

  std::string kind() const override { return kind_; }
  torch::nn::Module& module() override { return *net_; }
  torch::Tensor batch_loss(const torch::Tensor& states,
                           const torch::Tensor& actions,
                           at::Generator& gen) override;
  nlohmann::json config_json() const override;
  nlohmann::json schedule_json() const override;

  equivariant::PolicyNetwork& network() { return net_; }

 private:
  DiffusionConfig config_;
  NoiseSchedule schedule_;
  std::string kind_;
  equivariant::PolicyNetwork net_{nullptr};
};

/// Trains the joint model with the objective weighted by config.gamma.
TrainResult train_policy(const TensorDataset& train, const TensorDataset& val,
                         const DiffusionConfig& config,
                         const TrainOptions& options,
                         const std::string& kind = kKindIdpoe);

struct LoadedPolicy {
  std::string kind;
  DiffusionConfig config;
  NoiseSchedule schedule;
  equivariant::PolicyNetwork net{nullptr};
};

LoadedPolicy load_policy(const std::filesystem::path& checkpoint);
LoadedPolicy policy_from_checkpoint(const Checkpoint& ckpt);

}  // namespace idpoe
