// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#include "idpoe/equivariant/policy_network.hpp"

#include <sstream>

namespace idpoe::equivariant {

namespace nn = torch::nn;

PolicyNetworkImpl::PolicyNetworkImpl(const DiffusionConfig& config)
    : config_(config), n_(config.group_order) {
  config_.validate();
  step_turns_ = quarter_turns({1, n_});
  const auto& net = config_.network;
  const int E = net.embed_dim;
  const int action_dim = static_cast<int>(config_.action_dim());

  for (int m : net.channel_mults) level_fields_.push_back(net.base_fields * m);
  const int levels = static_cast<int>(level_fields_.size());

  time_mlp_ = register_module(
      "time_mlp", nn::Sequential(nn::Linear(E, E), nn::SiLU(), nn::Linear(E, E)));
  action_mlp_ = register_module(
      "action_mlp",
      nn::Sequential(nn::Linear(action_dim, E), nn::SiLU(), nn::Linear(E, E)));

  lift_ = register_module(
      "lift", LiftingConv(static_cast<int>(config_.state_channels()),
                          level_fields_[0], 3, n_));

  down_blocks_ = register_module("down", nn::ModuleList());
  int current = level_fields_[0];
  for (int level = 0; level < levels; ++level) {
    for (int b = 0; b < net.res_blocks; ++b) {
      down_blocks_->push_back(ResBlock(current, level_fields_[level], E, n_));
      current = level_fields_[level];
    }
  }

  mid1_ = register_module("mid1", ResBlock(current, current, E, n_));
  if (net.attention) {
    mid_attn_ = register_module("mid_attn",
                                AttentionBlock(current, net.attention_heads, n_));
  }
  mid2_ = register_module("mid2", ResBlock(current, current, E, n_));

  up_blocks_ = register_module("up", nn::ModuleList());
  for (int level = levels - 1; level >= 0; --level) {
    up_blocks_->push_back(
        ResBlock(current + level_fields_[level], level_fields_[level], E, n_));
    current = level_fields_[level];
    for (int b = 1; b < net.res_blocks; ++b) {
      up_blocks_->push_back(ResBlock(current, current, E, n_));
    }
  }

  out_norm_ = register_module("out_norm", FieldNorm(current, n_));
  out_conv_ = register_module(
      "out_conv",
      ProjectToTrivial(current, static_cast<int>(config_.state_channels()), 3,
                       n_));

  head_ = register_module(
      "head", OrbitHead(level_fields_.back(), n_, net.head_grid, action_dim, E,
                        net.head_hidden, action_dim));
}

int64_t PolicyNetworkImpl::parameter_count() const {
  int64_t total = 0;
  for (const auto& p : parameters()) total += p.numel();
  return total;
}

torch::Tensor PolicyNetworkImpl::frame_embeddings(const torch::Tensor& action,
                                                  const torch::Tensor& temb) {
  // Frame r sees the action rotated by -r steps; under a global rotation of
  // the input the frames shift by one, matching the regular representation.
  std::vector<torch::Tensor> frames;
  frames.reserve(n_);
  for (int r = 0; r < n_; ++r) {
    frames.push_back(rotate_action_tensor(action, -r * step_turns_));
  }
  auto stacked = torch::stack(frames, 1);  // (B, n, 2N)
  auto emb = action_mlp_->forward(stacked);
  return emb + time_mlp_->forward(temb).unsqueeze(1);
}

torch::Tensor PolicyNetworkImpl::action_head(const torch::Tensor& bottleneck,
                                             const torch::Tensor& action,
                                             const torch::Tensor& temb) {
  const int grid = config_.network.head_grid;
  auto pooled = bottleneck;
  if (bottleneck.size(-1) != grid) {
    const auto factor = bottleneck.size(-1) / grid;
    pooled = torch::avg_pool2d(bottleneck, {factor, factor});
  }
  return head_->forward(pooled, action, temb);
}

NoisePair PolicyNetworkImpl::forward(const torch::Tensor& state,
                                     const torch::Tensor& action,
                                     const torch::Tensor& t,
                                     bool action_only) {
  const auto C = config_.state_channels();
  if (state.dim() != 4 || state.size(1) != C || state.size(2) != config_.H ||
      state.size(3) != config_.W) {
    std::ostringstream msg;
    msg << "policy network expects state (B, " << C << ", " << config_.H << ", "
        << config_.W << "), got " << state.sizes();
    throw ShapeError(msg.str());
  }
  if (action.dim() != 2 || action.size(1) != config_.action_dim() ||
      action.size(0) != state.size(0) || t.numel() != state.size(0)) {
    throw ShapeError("policy network: action/timestep batch mismatch");
  }
  const int E = config_.network.embed_dim;
  auto temb = timestep_embedding(t.reshape({-1}), E);
  auto emb = frame_embeddings(action, temb);

  const int levels = static_cast<int>(level_fields_.size());
  const int per_level = config_.network.res_blocks;
  auto h = lift_->forward(state);
  std::vector<torch::Tensor> skips;
  std::size_t block = 0;
  for (int level = 0; level < levels; ++level) {
    for (int b = 0; b < per_level; ++b) {
      h = down_blocks_[block++]->as<ResBlock>()->forward(h, emb);
    }
    skips.push_back(h);
    if (level + 1 < levels) h = torch::avg_pool2d(h, {2, 2});
  }

  h = mid1_->forward(h, emb);
  if (mid_attn_) h = mid_attn_->forward(h);
  h = mid2_->forward(h, emb);
  auto eps_a = action_head(h, action, temb);
  if (action_only) return {torch::Tensor(), eps_a};

  block = 0;
  for (int level = levels - 1; level >= 0; --level) {
    h = torch::cat({h, skips[level]}, 1);
    for (int b = 0; b < per_level; ++b) {
      h = up_blocks_[block++]->as<ResBlock>()->forward(h, emb);
    }
    if (level > 0) h = torch::upsample_nearest2d(h, {h.size(2) * 2, h.size(3) * 2});
  }
  auto eps_s = out_conv_->forward(torch::silu(out_norm_->forward(h)));
  return {eps_s, eps_a};
}

PolicyNetwork build_policy_network(const DiffusionConfig& config) {
  return PolicyNetwork(config);
}

NoisePredictor as_predictor(PolicyNetwork net, bool action_only) {
  return [net, action_only](const torch::Tensor& s, const torch::Tensor& a,
                            const torch::Tensor& t) mutable {
    return net->forward(s, a, t, action_only);
  };
}

}  // namespace idpoe::equivariant
