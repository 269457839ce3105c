// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "idpoe/core.hpp"
#include "idpoe/equivariant/layers.hpp"
#include "idpoe/sampler.hpp"
#include "idpoe/training.hpp"

namespace idpoe {

inline constexpr const char* kKindBc = "bc";
inline constexpr const char* kKindExplicit = "explicit_diffusion";

/// Encoder half of the policy U-Net (lifting convolution, residual levels,
/// bottleneck with attention) pooled to a head_grid x head_grid map of
/// regular fields.
class ClipEncoderImpl : public torch::nn::Module {
 public:
  explicit ClipEncoderImpl(const DiffusionConfig& config);
  torch::Tensor forward(const torch::Tensor& state);

  int fields() const { return level_fields_.back(); }
  int group_order() const { return n_; }

 private:
  DiffusionConfig config_;
  int n_;
  std::vector<int> level_fields_;
  equivariant::LiftingConv lift_{nullptr};
  torch::nn::ModuleList blocks_;
  equivariant::ResBlock mid1_{nullptr}, mid2_{nullptr};
  equivariant::AttentionBlock mid_attn_{nullptr};
};
TORCH_MODULE(ClipEncoder);

/// CNN-MLP regressor from a clip to a trajectory.
class BCNetImpl : public torch::nn::Module {
 public:
  explicit BCNetImpl(const DiffusionConfig& config);
  torch::Tensor forward(const torch::Tensor& state);
  const DiffusionConfig& config() const { return config_; }

 private:
  DiffusionConfig config_;
  ClipEncoder encoder_{nullptr};
  equivariant::OrbitHead head_{nullptr};
};
TORCH_MODULE(BCNet);

/// Conditional noise model over actions only; the clip enters as an encoded
/// feature map and is never noised.
class ExplicitDenoiserImpl : public torch::nn::Module {
 public:
  explicit ExplicitDenoiserImpl(const DiffusionConfig& config);
  torch::Tensor encode(const torch::Tensor& state);
  torch::Tensor denoise(const torch::Tensor& features, const torch::Tensor& a_t,
                        const torch::Tensor& t);
  const DiffusionConfig& config() const { return config_; }

 private:
  DiffusionConfig config_;
  ClipEncoder encoder_{nullptr};
  torch::nn::Sequential time_mlp_{nullptr};
  equivariant::OrbitHead head_{nullptr};
};
TORCH_MODULE(ExplicitDenoiser);

/// Plain-convolution backbone with the channel count of the equivariant one.
DiffusionConfig bc_variant(const DiffusionConfig& config);

class BCTrainable : public Trainable {
 public:
  explicit BCTrainable(const DiffusionConfig& config);
  std::string kind() const override { return kKindBc; }
  torch::nn::Module& module() override { return *net_; }
  torch::Tensor batch_loss(const torch::Tensor& states, const torch::Tensor& actions,
                           at::Generator& gen) override;
  nlohmann::json config_json() const override;
  BCNet& network() { return net_; }

 private:
  DiffusionConfig config_;
  BCNet net_{nullptr};
};

class ExplicitTrainable : public Trainable {
 public:
  explicit ExplicitTrainable(const DiffusionConfig& config);
  std::string kind() const override { return kKindExplicit; }
  torch::nn::Module& module() override { return *net_; }
  torch::Tensor batch_loss(const torch::Tensor& states, const torch::Tensor& actions,
                           at::Generator& gen) override;
  nlohmann::json config_json() const override;
  nlohmann::json schedule_json() const override;
  ExplicitDenoiser& network() { return net_; }

 private:
  DiffusionConfig config_;
  NoiseSchedule schedule_;
  ExplicitDenoiser net_{nullptr};
};

/// Mean-squared trajectory regression; the config is mapped through
/// bc_variant.
TrainResult train_bc(const TensorDataset& train, const TensorDataset& val,
                     const DiffusionConfig& config, const TrainOptions& options);

TrainResult train_explicit_diffusion(const TensorDataset& train, const TensorDataset& val,
                                     const DiffusionConfig& config,
                                     const TrainOptions& options);

/// (B, 3L, H, W) -> clipped (B, 2N).
torch::Tensor predict_bc(BCNet& net, const torch::Tensor& states);
TrajectoryAction predict_bc(BCNet& net, const VideoClipState& state);

/// Reverse process over actions with the encoded clip as condition. Noise
/// streams are keyed per clip as in the joint samplers.
SampleTrace predict_explicit(ExplicitDenoiser& net, const NoiseSchedule& schedule,
                             const torch::Tensor& states, const std::vector<uint64_t>& keys,
                             const SamplerConfig& cfg);

BCNet load_bc(const std::filesystem::path& checkpoint);

struct LoadedExplicit {
  DiffusionConfig config;
  NoiseSchedule schedule;
  ExplicitDenoiser net{nullptr};
};
LoadedExplicit load_explicit(const std::filesystem::path& checkpoint);

}  // namespace idpoe
