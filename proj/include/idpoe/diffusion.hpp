// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include "idpoe/core.hpp"
#include "idpoe/noise_predictor.hpp"
#include "idpoe/rng.hpp"

namespace idpoe {

/// Closed-form marginal q(x_t | x_0) for a scalar step t in [1, T]:
/// x_t = sqrt(abar_t) x_0 + sqrt(1 - abar_t) eps, on state and action alike.
StateActionPair forward_diffuse(const StateActionPair& x0, int t,
                                const NoisePair& eps,
                                const NoiseSchedule& schedule);

/// Same marginal for a single tensor with per-item steps t (B).
torch::Tensor diffuse(const torch::Tensor& x0, const torch::Tensor& t,
                      const torch::Tensor& eps, const NoiseSchedule& schedule);

struct LossTerms {
  torch::Tensor total;       ///< (1 - gamma) * action + gamma * state
  torch::Tensor action_mse;  ///< batch mean of per-item action MSE
  torch::Tensor state_mse;   ///< batch mean of per-item state MSE
};

/// Noise-prediction objective on a clean batch. Draws t ~ U{1..T} and both
/// noises per item from `gen`, in that order. NumericError names the first
/// batch item whose loss is not finite.
LossTerms training_loss(const StateActionPair& x0, const NoisePredictor& net,
                        double gamma, const NoiseSchedule& schedule,
                        at::Generator& gen);

/// One ancestral step p(x_{t-1} | x_t): DDPM posterior mean from the
/// predicted noise, plus sqrt(beta_t) z when !deterministic and t > 1.
StateActionPair reverse_step(const NoisePredictor& net,
                             const StateActionPair& x_t, int t,
                             const NoiseSchedule& schedule, NoiseSource& noise,
                             bool deterministic);

/// Posterior mean for one tensor given its predicted noise.
torch::Tensor posterior_mean(const torch::Tensor& x_t, const torch::Tensor& eps,
                             int t, const NoiseSchedule& schedule);

}  // namespace idpoe
