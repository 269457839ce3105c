// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#include "idpoe/sampler.hpp"

#include <sstream>

#include "idpoe/config_io.hpp"
#include "idpoe/diffusion.hpp"

namespace idpoe {
namespace {

// Stream purposes, mixed into the sampler seed.
constexpr uint64_t kInitStream = 1;
constexpr uint64_t kStateStream = 2;
constexpr uint64_t kReverseStream = 3;

void check_schedule(const JointModel& model, const SamplerConfig& cfg) {
  if (cfg.T != 0 && cfg.T != model.schedule.steps()) {
    std::ostringstream msg;
    msg << "sampler T=" << cfg.T << " does not match the trained schedule (T="
        << model.schedule.steps() << ")";
    throw ConfigError(msg.str());
  }
  if (cfg.batch_size < 1) throw ConfigError("sampler batch_size must be positive");
}

void check_states(const JointModel& model, const torch::Tensor& states,
                  std::size_t keys) {
  if (states.dim() != 4 || states.size(1) != model.state_channels ||
      states.size(2) != model.height || states.size(3) != model.width) {
    std::ostringstream msg;
    msg << "conditioning clip has shape " << states.sizes() << ", model expects (B, "
        << model.state_channels << ", " << model.height << ", " << model.width << ")";
    throw ConfigError(msg.str());
  }
  if (static_cast<std::size_t>(states.size(0)) != keys) {
    throw ConfigError("one stream key is needed per conditioning clip");
  }
}

void check_finite(const torch::Tensor& x, int t) {
  if (!torch::isfinite(x).all().item<bool>()) {
    throw NumericError("sampler produced non-finite values at step " + std::to_string(t));
  }
}

SampleTrace conditional_chunk(const JointModel& model, const torch::Tensor& s_star,
                              const std::vector<uint64_t>& keys, const SamplerConfig& cfg,
                              bool naive) {
  const auto& sched = model.schedule;
  NoiseSource init(mix_seed(cfg.seed, kInitStream), keys);
  NoiseSource state_noise(mix_seed(cfg.seed, kStateStream), keys);
  NoiseSource reverse(mix_seed(cfg.seed, kReverseStream), keys);
  const std::vector<int64_t> state_shape(s_star.sizes().begin() + 1, s_star.sizes().end());

  SampleTrace trace;
  auto a = init.normal({model.action_dim});
  if (cfg.record_intermediates) trace.intermediates.push_back(a.clone());
  torch::Tensor frozen;
  if (cfg.freeze_state_noise && !naive) frozen = state_noise.normal(state_shape);

  for (int t = sched.steps(); t >= 1; --t) {
    torch::Tensor s_t = s_star;
    if (!naive) {
      auto eps = frozen.defined() ? frozen : state_noise.normal(state_shape);
      s_t = diffuse(s_star, torch::full({s_star.size(0)}, t, torch::kLong), eps, sched);
    }
    auto next = reverse_step(model.action_only, {s_t, a, t}, t, sched, reverse,
                             cfg.deterministic);
    a = next.action;
    check_finite(a, t);
    if (cfg.record_intermediates) trace.intermediates.push_back(a.clone());
  }
  trace.actions = a.clamp(-1.0, 1.0);
  return trace;
}

SampleTrace conditional(const JointModel& model, const torch::Tensor& states,
                        const std::vector<uint64_t>& keys, const SamplerConfig& cfg,
                        bool naive) {
  check_schedule(model, cfg);
  check_states(model, states, keys.size());
  torch::NoGradGuard no_grad;
  const auto B = states.size(0);
  if (B == 0) return {torch::empty({0, model.action_dim}), {}};
  std::vector<SampleTrace> parts;
  for (int64_t start = 0; start < B; start += cfg.batch_size) {
    const auto len = std::min<int64_t>(cfg.batch_size, B - start);
    std::vector<uint64_t> chunk_keys(keys.begin() + start, keys.begin() + start + len);
    parts.push_back(
        conditional_chunk(model, states.narrow(0, start, len), chunk_keys, cfg, naive));
  }
  if (parts.size() == 1) return parts.front();
  SampleTrace out;
  std::vector<torch::Tensor> actions;
  for (const auto& p : parts) actions.push_back(p.actions);
  out.actions = torch::cat(actions);
  for (std::size_t k = 0; k < parts.front().intermediates.size(); ++k) {
    std::vector<torch::Tensor> step;
    for (const auto& p : parts) step.push_back(p.intermediates[k]);
    out.intermediates.push_back(torch::cat(step));
  }
  return out;
}

}  // namespace

void to_json(nlohmann::json& j, const SamplerConfig& c) {
  j = {{"deterministic", c.deterministic},
       {"T", c.T},
       {"seed", c.seed},
       {"record_intermediates", c.record_intermediates},
       {"freeze_state_noise", c.freeze_state_noise},
       {"batch_size", c.batch_size}};
}

void from_json(const nlohmann::json& j, SamplerConfig& c) {
  reject_unknown_keys(j, "sampler",
                      {"deterministic", "T", "seed", "record_intermediates",
                       "freeze_state_noise", "batch_size"});
  read_optional(j, "deterministic", c.deterministic);
  read_optional(j, "T", c.T);
  read_optional(j, "seed", c.seed);
  read_optional(j, "record_intermediates", c.record_intermediates);
  read_optional(j, "freeze_state_noise", c.freeze_state_noise);
  read_optional(j, "batch_size", c.batch_size);
}

JointModel make_joint_model(equivariant::PolicyNetwork net, const NoiseSchedule& schedule) {
  const auto& cfg = net->config();
  JointModel m;
  m.joint = equivariant::as_predictor(net, false);
  m.action_only = equivariant::as_predictor(net, true);
  m.schedule = schedule;
  m.state_channels = cfg.state_channels();
  m.height = cfg.H;
  m.width = cfg.W;
  m.action_dim = cfg.action_dim();
  return m;
}

uint64_t stream_key(const std::string& clip_id) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : clip_id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

StateActionPair sample_unconditional(const JointModel& model, const SamplerConfig& cfg,
                                     int64_t count) {
  check_schedule(model, cfg);
  if (count < 0) throw ParameterError("sample count must be non-negative");
  torch::NoGradGuard no_grad;
  const std::vector<int64_t> state_shape{model.state_channels, model.height, model.width};
  std::vector<torch::Tensor> states, actions;
  for (int64_t start = 0; start < count; start += cfg.batch_size) {
    const auto len = std::min<int64_t>(cfg.batch_size, count - start);
    std::vector<uint64_t> keys;
    for (int64_t i = start; i < start + len; ++i) keys.push_back(static_cast<uint64_t>(i));
    NoiseSource init(mix_seed(cfg.seed, kInitStream), keys);
    NoiseSource reverse(mix_seed(cfg.seed, kReverseStream), keys);
    StateActionPair x{init.normal(state_shape), init.normal({model.action_dim}),
                      model.schedule.steps()};
    for (int t = model.schedule.steps(); t >= 1; --t) {
      x = reverse_step(model.joint, x, t, model.schedule, reverse, cfg.deterministic);
      check_finite(x.action, t);
      check_finite(x.state, t);
    }
    states.push_back(x.state.clamp(-1.0, 1.0));
    actions.push_back(x.action.clamp(-1.0, 1.0));
  }
  if (states.empty()) {
    return {torch::empty({0, model.state_channels, model.height, model.width}),
            torch::empty({0, model.action_dim}), 0};
  }
  return {torch::cat(states), torch::cat(actions), 0};
}

SampleTrace sample_conditional_batch(const JointModel& model, const torch::Tensor& states,
                                     const std::vector<uint64_t>& keys,
                                     const SamplerConfig& cfg) {
  return conditional(model, states, keys, cfg, false);
}

SampleTrace sample_conditional_naive_batch(const JointModel& model,
                                           const torch::Tensor& states,
                                           const std::vector<uint64_t>& keys,
                                           const SamplerConfig& cfg) {
  return conditional(model, states, keys, cfg, true);
}

TrajectoryAction sample_conditional(const JointModel& model, const VideoClipState& s_star,
                                    const SamplerConfig& cfg, uint64_t key) {
  auto trace = conditional(model, s_star.channels_first().unsqueeze(0), {key}, cfg, false);
  return TrajectoryAction::from_tensor(trace.actions[0]);
}

TrajectoryAction sample_conditional_naive(const JointModel& model,
                                          const VideoClipState& s_star,
                                          const SamplerConfig& cfg, uint64_t key) {
  auto trace = conditional(model, s_star.channels_first().unsqueeze(0), {key}, cfg, true);
  return TrajectoryAction::from_tensor(trace.actions[0]);
}

}  // namespace idpoe
