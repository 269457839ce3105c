// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#include "idpoe/baselines.hpp"

#include <sstream>

#include "idpoe/config_io.hpp"
#include "idpoe/diffusion.hpp"
#include "idpoe/policy.hpp"

namespace idpoe {

namespace nn = torch::nn;
using namespace equivariant;

ClipEncoderImpl::ClipEncoderImpl(const DiffusionConfig& config)
    : config_(config), n_(config.group_order) {
  config_.validate();
  const auto& net = config_.network;
  for (int m : net.channel_mults) level_fields_.push_back(net.base_fields * m);
  lift_ = register_module(
      "lift", LiftingConv(static_cast<int>(config_.state_channels()), level_fields_[0], 3, n_));
  blocks_ = register_module("down", nn::ModuleList());
  int current = level_fields_[0];
  for (int f : level_fields_) {
    for (int b = 0; b < net.res_blocks; ++b) {
      blocks_->push_back(ResBlock(current, f, net.embed_dim, n_));
      current = f;
    }
  }
  mid1_ = register_module("mid1", ResBlock(current, current, net.embed_dim, n_));
  if (net.attention) {
    mid_attn_ = register_module("mid_attn", AttentionBlock(current, net.attention_heads, n_));
  }
  mid2_ = register_module("mid2", ResBlock(current, current, net.embed_dim, n_));
}

torch::Tensor ClipEncoderImpl::forward(const torch::Tensor& state) {
  if (state.dim() != 4 || state.size(1) != config_.state_channels() ||
      state.size(2) != config_.H || state.size(3) != config_.W) {
    std::ostringstream msg;
    msg << "encoder expects (B, " << config_.state_channels() << ", " << config_.H << ", "
        << config_.W << "), got " << state.sizes();
    throw ShapeError(msg.str());
  }
  // No conditioning signal: the residual biases see a zero embedding.
  auto emb = torch::zeros({state.size(0), n_, config_.network.embed_dim}, state.options());
  auto h = lift_->forward(state);
  const int per_level = config_.network.res_blocks;
  std::size_t block = 0;
  for (std::size_t level = 0; level < level_fields_.size(); ++level) {
    for (int b = 0; b < per_level; ++b) h = blocks_[block++]->as<ResBlock>()->forward(h, emb);
    if (level + 1 < level_fields_.size()) h = torch::avg_pool2d(h, {2, 2});
  }
  h = mid1_->forward(h, emb);
  if (mid_attn_) h = mid_attn_->forward(h);
  h = mid2_->forward(h, emb);
  const int grid = config_.network.head_grid;
  if (h.size(-1) != grid) {
    const auto factor = h.size(-1) / grid;
    h = torch::avg_pool2d(h, {factor, factor});
  }
  return h;
}

BCNetImpl::BCNetImpl(const DiffusionConfig& config) : config_(config) {
  encoder_ = register_module("encoder", ClipEncoder(config_));
  head_ = register_module(
      "head", OrbitHead(encoder_->fields(), config_.group_order, config_.network.head_grid,
                        0, 0, config_.network.head_hidden,
                        static_cast<int>(config_.action_dim())));
}

torch::Tensor BCNetImpl::forward(const torch::Tensor& state) {
  return head_->forward(encoder_->forward(state), {}, {});
}

ExplicitDenoiserImpl::ExplicitDenoiserImpl(const DiffusionConfig& config) : config_(config) {
  const int E = config_.network.embed_dim;
  const int A = static_cast<int>(config_.action_dim());
  encoder_ = register_module("encoder", ClipEncoder(config_));
  time_mlp_ = register_module(
      "time_mlp", nn::Sequential(nn::Linear(E, E), nn::SiLU(), nn::Linear(E, E)));
  head_ = register_module(
      "head", OrbitHead(encoder_->fields(), config_.group_order, config_.network.head_grid,
                        A, E, config_.network.head_hidden, A));
}

torch::Tensor ExplicitDenoiserImpl::encode(const torch::Tensor& state) {
  return encoder_->forward(state);
}

torch::Tensor ExplicitDenoiserImpl::denoise(const torch::Tensor& features,
                                            const torch::Tensor& a_t, const torch::Tensor& t) {
  if (a_t.dim() != 2 || a_t.size(1) != config_.action_dim() ||
      a_t.size(0) != features.size(0)) {
    throw ShapeError("explicit denoiser: action batch mismatch");
  }
  auto temb = time_mlp_->forward(timestep_embedding(t.reshape({-1}), config_.network.embed_dim));
  return head_->forward(features, a_t, temb);
}

DiffusionConfig bc_variant(const DiffusionConfig& config) {
  return non_equivariant_variant(config);
}

BCTrainable::BCTrainable(const DiffusionConfig& config)
    : config_(bc_variant(config)), net_(BCNet(config_)) {}

torch::Tensor BCTrainable::batch_loss(const torch::Tensor& states,
                                      const torch::Tensor& actions, at::Generator&) {
  return (net_->forward(states) - actions).pow(2).mean();
}

nlohmann::json BCTrainable::config_json() const { return config_; }

ExplicitTrainable::ExplicitTrainable(const DiffusionConfig& config)
    : config_(config), schedule_(config.schedule()), net_(ExplicitDenoiser(config)) {}

torch::Tensor ExplicitTrainable::batch_loss(const torch::Tensor& states,
                                            const torch::Tensor& actions,
                                            at::Generator& gen) {
  const auto B = actions.size(0);
  auto t = torch::randint(1, schedule_.steps() + 1, {B}, gen, torch::kLong);
  auto eps = torch::randn(actions.sizes(), gen);
  auto a_t = diffuse(actions, t, eps, schedule_);
  auto pred = net_->denoise(net_->encode(states), a_t, t);
  return (pred - eps).pow(2).mean();
}

nlohmann::json ExplicitTrainable::config_json() const { return config_; }

nlohmann::json ExplicitTrainable::schedule_json() const {
  return schedule_to_json(schedule_);
}

TrainResult train_bc(const TensorDataset& train, const TensorDataset& val,
                     const DiffusionConfig& config, const TrainOptions& options) {
  config.validate();
  torch::manual_seed(config.seed);
  BCTrainable model(config);
  return train_model(model, train, val, config.optimizer, config.seed, options);
}

TrainResult train_explicit_diffusion(const TensorDataset& train, const TensorDataset& val,
                                     const DiffusionConfig& config,
                                     const TrainOptions& options) {
  config.validate();
  torch::manual_seed(config.seed);
  ExplicitTrainable model(config);
  return train_model(model, train, val, config.optimizer, config.seed, options);
}

torch::Tensor predict_bc(BCNet& net, const torch::Tensor& states) {
  torch::NoGradGuard no_grad;
  return net->forward(states).clamp(-1.0, 1.0);
}

TrajectoryAction predict_bc(BCNet& net, const VideoClipState& state) {
  return TrajectoryAction::from_tensor(predict_bc(net, state.channels_first().unsqueeze(0))[0]);
}

SampleTrace predict_explicit(ExplicitDenoiser& net, const NoiseSchedule& schedule,
                             const torch::Tensor& states, const std::vector<uint64_t>& keys,
                             const SamplerConfig& cfg) {
  if (cfg.T != 0 && cfg.T != schedule.steps()) {
    throw ConfigError("sampler T does not match the trained schedule");
  }
  const auto& mc = net->config();
  if (states.dim() != 4 || states.size(1) != mc.state_channels() || states.size(2) != mc.H ||
      states.size(3) != mc.W) {
    throw ConfigError("conditioning clip shape does not match the model");
  }
  if (static_cast<std::size_t>(states.size(0)) != keys.size()) {
    throw ConfigError("one stream key is needed per conditioning clip");
  }
  torch::NoGradGuard no_grad;
  const auto B = states.size(0);
  // The same stream layout as the joint samplers.
  NoiseSource init(mix_seed(cfg.seed, 1), keys);
  NoiseSource reverse(mix_seed(cfg.seed, 3), keys);
  auto features = net->encode(states);
  SampleTrace trace;
  auto a = init.normal({mc.action_dim()});
  if (cfg.record_intermediates) trace.intermediates.push_back(a.clone());
  for (int t = schedule.steps(); t >= 1; --t) {
    auto eps = net->denoise(features, a, torch::full({B}, t, torch::kLong));
    a = posterior_mean(a, eps, t, schedule);
    if (!cfg.deterministic && t > 1) {
      a = a + reverse.normal({mc.action_dim()}) * std::sqrt(schedule.beta(t));
    }
    if (!torch::isfinite(a).all().item<bool>()) {
      throw NumericError("explicit sampler produced non-finite values at step " +
                         std::to_string(t));
    }
    if (cfg.record_intermediates) trace.intermediates.push_back(a.clone());
  }
  trace.actions = a.clamp(-1.0, 1.0);
  return trace;
}

namespace {

Checkpoint checkpoint_of_kind(const std::filesystem::path& path, const std::string& kind) {
  auto ckpt = load_checkpoint(path);
  if (ckpt.model_kind != kind) {
    throw ConfigError("checkpoint " + path.string() + " holds a '" + ckpt.model_kind +
                      "' model, expected '" + kind + "'");
  }
  return ckpt;
}

}  // namespace

BCNet load_bc(const std::filesystem::path& checkpoint) {
  auto ckpt = checkpoint_of_kind(checkpoint, kKindBc);
  BCNet net(ckpt.config.get<DiffusionConfig>());
  load_module_tensors(*net, ckpt, "model.");
  net->eval();
  return net;
}

LoadedExplicit load_explicit(const std::filesystem::path& checkpoint) {
  auto ckpt = checkpoint_of_kind(checkpoint, kKindExplicit);
  LoadedExplicit out;
  out.config = ckpt.config.get<DiffusionConfig>();
  out.schedule = schedule_from_json(ckpt.schedule);
  out.net = ExplicitDenoiser(out.config);
  load_module_tensors(*out.net, ckpt, "model.");
  out.net->eval();
  return out;
}

}  // namespace idpoe
