// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "idpoe/core.hpp"
#include "idpoe/equivariant/policy_network.hpp"
#include "idpoe/noise_predictor.hpp"

namespace idpoe {

struct SamplerConfig {
  bool deterministic = false;
  int T = 0;  ///< 0 inherits the trained schedule; otherwise must equal it
  uint64_t seed = 0;
  bool record_intermediates = false;
  /// Reuse one state noise draw for every step instead of a fresh one.
  bool freeze_state_noise = false;
  int batch_size = 128;
};

void to_json(nlohmann::json& j, const SamplerConfig& c);
void from_json(const nlohmann::json& j, SamplerConfig& c);

/// A trained joint noise model as seen by the samplers.
struct JointModel {
  NoisePredictor joint;        ///< both heads
  NoisePredictor action_only;  ///< may leave eps_s undefined
  NoiseSchedule schedule;
  int64_t state_channels = 0;
  int64_t height = 0;
  int64_t width = 0;
  int64_t action_dim = 0;
};

JointModel make_joint_model(equivariant::PolicyNetwork net, const NoiseSchedule& schedule);

/// Stable 64-bit key of a clip id; every clip draws from its own streams.
uint64_t stream_key(const std::string& clip_id);

struct SampleTrace {
  torch::Tensor actions;                     ///< (B, 2N), clipped to [-1, 1]
  std::vector<torch::Tensor> intermediates;  ///< a_T ... a_0, unclipped
};

/// Ancestral sampling of `count` joint pairs from pure noise. Outputs are
/// clamped to [-1, 1] and carry noise level 0.
StateActionPair sample_unconditional(const JointModel& model, const SamplerConfig& cfg,
                                     int64_t count);

/// Forward-diffusion guidance: at every step the state part is replaced by
/// the clean clip diffused to the current level, and only the action part of
/// the reverse step is kept. `states` is (B, 3L, H, W).
SampleTrace sample_conditional_batch(const JointModel& model, const torch::Tensor& states,
                                     const std::vector<uint64_t>& keys,
                                     const SamplerConfig& cfg);

/// As above but the clean clip is fed at every noise level.
SampleTrace sample_conditional_naive_batch(const JointModel& model,
                                           const torch::Tensor& states,
                                           const std::vector<uint64_t>& keys,
                                           const SamplerConfig& cfg);

TrajectoryAction sample_conditional(const JointModel& model, const VideoClipState& s_star,
                                    const SamplerConfig& cfg, uint64_t key = 0);
TrajectoryAction sample_conditional_naive(const JointModel& model,
                                          const VideoClipState& s_star,
                                          const SamplerConfig& cfg, uint64_t key = 0);

}  // namespace idpoe
