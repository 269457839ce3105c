// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#include "idpoe/policy.hpp"

#include "idpoe/config_io.hpp"
#include "idpoe/diffusion.hpp"

namespace idpoe {

DiffusionConfig non_equivariant_variant(const DiffusionConfig& config) {
  DiffusionConfig out = config;
  out.network.base_fields = config.network.base_fields * config.group_order;
  out.group_order = 1;
  return out;
}

nlohmann::json schedule_to_json(const NoiseSchedule& schedule) {
  return {{"T", schedule.steps()},
          {"beta_start", schedule.beta_start()},
          {"beta_end", schedule.beta_end()},
          {"kind", to_string(schedule.kind())}};
}

NoiseSchedule schedule_from_json(const nlohmann::json& j) {
  return make_noise_schedule(j.at("T").get<int>(), j.at("beta_start").get<double>(),
                             j.at("beta_end").get<double>(),
                             schedule_kind_from_string(j.at("kind").get<std::string>()));
}

PolicyTrainable::PolicyTrainable(const DiffusionConfig& config, std::string kind)
    : config_(config),
      schedule_(config.schedule()),
      kind_(std::move(kind)),
      net_(equivariant::build_policy_network(config)) {}

torch::Tensor PolicyTrainable::batch_loss(const torch::Tensor& states,
                                          const torch::Tensor& actions,
                                          at::Generator& gen) {
  return training_loss({states, actions, 0}, equivariant::as_predictor(net_),
                       config_.gamma, schedule_, gen)
      .total;
}

nlohmann::json PolicyTrainable::config_json() const { return config_; }

nlohmann::json PolicyTrainable::schedule_json() const {
  return schedule_to_json(schedule_);
}

TrainResult train_policy(const TensorDataset& train, const TensorDataset& val,
                         const DiffusionConfig& config,
                         const TrainOptions& options, const std::string& kind) {
  config.validate();
  torch::manual_seed(config.seed);
  PolicyTrainable model(config, kind);
  return train_model(model, train, val, config.optimizer, config.seed, options);
}

LoadedPolicy policy_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.model_kind != kKindIdpoe && ckpt.model_kind != kKindIdpoeNoEquiv) {
    throw ConfigError("checkpoint holds a '" + ckpt.model_kind +
                      "' model, not a joint diffusion policy");
  }
  LoadedPolicy out;
  out.kind = ckpt.model_kind;
  out.config = ckpt.config.get<DiffusionConfig>();
  out.schedule = schedule_from_json(ckpt.schedule);
  out.net = equivariant::build_policy_network(out.config);
  load_module_tensors(*out.net, ckpt, "model.");
  out.net->eval();
  return out;
}

LoadedPolicy load_policy(const std::filesystem::path& checkpoint) {
  return policy_from_checkpoint(load_checkpoint(checkpoint));
}

}  // namespace idpoe
