// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <vector>

#include <torch/torch.h>

#include "idpoe/core.hpp"
#include "idpoe/noise_predictor.hpp"
#include "idpoe/equivariant/layers.hpp"


namespace idpoe::equivariant {

/// Joint noise predictor over (video clip, trajectory). A U-Net over regular
/// C_n feature fields with residual and attention blocks; the action and the
/// timestep enter every residual block as a regular-field bias built from the
/// action expressed in each rotated frame. The image head projects back to
/// trivial channels. The trajectory head reads the bottleneck through an
/// MLP that is averaged over the group orbit, so it is equivariant by
/// construction. With group_order == 1 this is an ordinary U-Net.
class PolicyNetworkImpl : public torch::nn::Module {
 public:
  explicit PolicyNetworkImpl(const DiffusionConfig& config);

  /// With action_only the image decoder is skipped and eps_s is left
  /// undefined.
  NoisePair forward(const torch::Tensor& state, const torch::Tensor& action,
                    const torch::Tensor& t, bool action_only = false);

  const DiffusionConfig& config() const { return config_; }
  int group_order() const { return n_; }
  int64_t parameter_count() const;

 private:
  /// (B, 2N) action + (B) steps -> (B, n, E) per-frame embeddings.
  torch::Tensor frame_embeddings(const torch::Tensor& action,
                                 const torch::Tensor& temb);
  torch::Tensor action_head(const torch::Tensor& bottleneck,
                            const torch::Tensor& action,
                            const torch::Tensor& temb);

  DiffusionConfig config_;
  int n_;
  int step_turns_;
  std::vector<int> level_fields_;

  LiftingConv lift_{nullptr};
  torch::nn::ModuleList down_blocks_, up_blocks_;
  ResBlock mid1_{nullptr}, mid2_{nullptr};
  AttentionBlock mid_attn_{nullptr};
  FieldNorm out_norm_{nullptr};
  ProjectToTrivial out_conv_{nullptr};
  torch::nn::Sequential time_mlp_{nullptr}, action_mlp_{nullptr};
  OrbitHead head_{nullptr};
};
TORCH_MODULE(PolicyNetwork);

PolicyNetwork build_policy_network(const DiffusionConfig& config);

/// Wraps a network as a NoisePredictor.
NoisePredictor as_predictor(PolicyNetwork net, bool action_only = false);

}  // namespace idpoe::equivariant
