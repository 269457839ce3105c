// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>

#include <torch/torch.h>

namespace idpoe {

/// Predicted (or true) noise for a batch: eps_s (B, 3L, H, W), eps_a (B, 2N).
struct NoisePair {
  torch::Tensor eps_s;
  torch::Tensor eps_a;
};

/// Anything that predicts the joint noise from (s_t, a_t, t). t is a (B)
/// int64 tensor of diffusion steps in [1, T].
using NoisePredictor = std::function<NoisePair(
    const torch::Tensor& state, const torch::Tensor& action,
    const torch::Tensor& t)>;

}  // namespace idpoe
