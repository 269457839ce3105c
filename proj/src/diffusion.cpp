// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#include "idpoe/diffusion.hpp"

#include <cmath>
#include <sstream>

namespace idpoe {
namespace {

void check_pair(const StateActionPair& x) {
  if (!x.state.defined() || !x.action.defined() || x.state.dim() != 4 ||
      x.action.dim() != 2 || x.state.size(0) != x.action.size(0)) {
    throw ShapeError("state must be (B, 3L, H, W) and action (B, 2N)");
  }
}

torch::Tensor broadcast_like(const torch::Tensor& per_item,
                             const torch::Tensor& like) {
  std::vector<int64_t> shape(like.dim(), 1);
  shape[0] = per_item.size(0);
  return per_item.view(shape);
}

}  // namespace

StateActionPair forward_diffuse(const StateActionPair& x0, int t,
                                const NoisePair& eps,
                                const NoiseSchedule& schedule) {
  schedule.check_step(t);
  check_pair(x0);
  if (x0.noise_level != 0) {
    throw ParameterError("forward_diffuse expects clean data (noise level 0)");
  }
  if (!eps.eps_s.sizes().equals(x0.state.sizes()) ||
      !eps.eps_a.sizes().equals(x0.action.sizes())) {
    throw ShapeError("noise shapes must match the data");
  }
  const double abar = schedule.alpha_bar(t);
  const double signal = std::sqrt(abar);
  const double noise = std::sqrt(1.0 - abar);
  return {x0.state * signal + eps.eps_s * noise,
          x0.action * signal + eps.eps_a * noise, t};
}

torch::Tensor diffuse(const torch::Tensor& x0, const torch::Tensor& t,
                      const torch::Tensor& eps, const NoiseSchedule& schedule) {
  auto abar = torch::tensor(schedule.alpha_bars(), torch::kFloat64)
                  .index_select(0, t.to(torch::kLong) - 1);
  auto signal = broadcast_like(abar.sqrt().to(x0.dtype()), x0);
  auto noise = broadcast_like((1.0 - abar).sqrt().to(x0.dtype()), x0);
  return x0 * signal + eps * noise;
}

LossTerms training_loss(const StateActionPair& x0, const NoisePredictor& net,
                        double gamma, const NoiseSchedule& schedule,
                        at::Generator& gen) {
  check_pair(x0);
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw ParameterError("gamma must lie in [0, 1]");
  }
  const auto B = x0.batch_size();
  if (B == 0) throw ParameterError("training_loss needs a non-empty batch");

  auto t = torch::randint(1, schedule.steps() + 1, {B}, gen, torch::kLong);
  auto eps_s = torch::randn(x0.state.sizes(), gen);
  auto eps_a = torch::randn(x0.action.sizes(), gen);
  auto s_t = diffuse(x0.state, t, eps_s, schedule);
  auto a_t = diffuse(x0.action, t, eps_a, schedule);

  auto pred = net(s_t, a_t, t);
  auto per_item_a = (pred.eps_a - eps_a).pow(2).reshape({B, -1}).mean(1);
  auto per_item_s = (pred.eps_s - eps_s).pow(2).reshape({B, -1}).mean(1);

  auto finite = (torch::isfinite(per_item_a) & torch::isfinite(per_item_s));
  if (!finite.all().item<bool>()) {
    const auto bad = (~finite).nonzero()[0][0].item<int64_t>();
    std::ostringstream msg;
    msg << "non-finite loss at batch index " << bad;
    throw NumericError(msg.str());
  }
  LossTerms terms;
  terms.action_mse = per_item_a.mean();
  terms.state_mse = per_item_s.mean();
  terms.total = terms.action_mse * (1.0 - gamma) + terms.state_mse * gamma;
  return terms;
}

torch::Tensor posterior_mean(const torch::Tensor& x_t, const torch::Tensor& eps,
                             int t, const NoiseSchedule& schedule) {
  const double beta = schedule.beta(t);
  const double coef = beta / std::sqrt(1.0 - schedule.alpha_bar(t));
  return (x_t - eps * coef) / std::sqrt(schedule.alpha(t));
}

StateActionPair reverse_step(const NoisePredictor& net,
                             const StateActionPair& x_t, int t,
                             const NoiseSchedule& schedule, NoiseSource& noise,
                             bool deterministic) {
  schedule.check_step(t);
  check_pair(x_t);
  const auto B = x_t.batch_size();
  auto steps = torch::full({B}, t, torch::kLong);
  auto pred = net(x_t.state, x_t.action, steps);
  // A predictor may skip the state head; the state is then left undefined.
  StateActionPair out{pred.eps_s.defined()
                          ? posterior_mean(x_t.state, pred.eps_s, t, schedule)
                          : torch::Tensor(),
                      posterior_mean(x_t.action, pred.eps_a, t, schedule), t - 1};
  if (!deterministic && t > 1) {
    if (noise.items() != B) {
      throw ShapeError("noise source item count must equal the batch size");
    }
    const double sigma = std::sqrt(schedule.beta(t));
    auto state_shape = x_t.state.sizes().slice(1).vec();
    auto action_shape = x_t.action.sizes().slice(1).vec();
    auto state_noise = noise.normal(state_shape);
    if (out.state.defined()) out.state = out.state + state_noise * sigma;
    out.action = out.action + noise.normal(action_shape) * sigma;
  }
  return out;
}

}  // namespace idpoe
