// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#include "idpoe/equivariant/equivariance_check.hpp"

#include <algorithm>

namespace idpoe::equivariant {
namespace {

double relative_error(const torch::Tensor& got, const torch::Tensor& want) {
  const double denom = want.to(torch::kFloat64).norm().item<double>();
  const double diff = (got.to(torch::kFloat64) - want.to(torch::kFloat64))
                          .norm()
                          .item<double>();
  if (denom == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return diff / denom;
}

EquivarianceReport empty_report(int n, int samples, double tolerance) {
  EquivarianceReport report;
  report.group_order = n;
  report.samples = samples;
  report.tolerance = tolerance;
  for (int k = 0; k < n; ++k) report.errors.push_back({k, 0.0});
  return report;
}

}  // namespace

double EquivarianceReport::worst() const {
  double w = 0.0;
  for (const auto& e : errors) w = std::max(w, e.max_rel_error);
  return w;
}

EquivarianceReport check_equivariance(const FieldMap& layer, const FieldType& in,
                                      const FieldType& out, int64_t size,
                                      int samples, double tolerance,
                                      uint64_t seed, int64_t batch) {
  const int n = out.group_order;
  auto report = empty_report(n, samples, tolerance);
  auto gen = at::detail::createCPUGenerator(seed);
  torch::NoGradGuard no_grad;
  for (int s = 0; s < samples; ++s) {
    auto x = torch::randn({batch, in.channels(), size, size}, gen);
    auto fx = layer(x);
    for (int k = 1; k < n; ++k) {
      const GroupElement g_in{k * in.group_order / n, in.group_order};
      const GroupElement g_out{k, n};
      auto lhs = layer(rotate_field_tensor(x, in, g_in));
      auto rhs = rotate_field_tensor(fx, out, g_out);
      report.errors[k].max_rel_error =
          std::max(report.errors[k].max_rel_error, relative_error(lhs, rhs));
    }
  }
  return report;
}

NetworkEquivarianceReport check_network_equivariance(PolicyNetwork& net,
                                                     int samples,
                                                     double tolerance,
                                                     uint64_t seed,
                                                     int check_group_order) {
  const auto& cfg = net->config();
  const int n = check_group_order;
  const int step = quarter_turns({1, n});
  NetworkEquivarianceReport report{empty_report(n, samples, tolerance),
                                   empty_report(n, samples, tolerance),
                                   empty_report(n, samples, tolerance)};
  auto gen = at::detail::createCPUGenerator(seed);
  torch::NoGradGuard no_grad;
  for (int s = 0; s < samples; ++s) {
    auto state = torch::randn({1, cfg.state_channels(), cfg.H, cfg.W}, gen);
    auto action = torch::randn({1, cfg.action_dim()}, gen);
    auto t = torch::randint(1, cfg.T + 1, {1}, gen, torch::kLong);
    auto base = net->forward(state, action, t);
    for (int k = 1; k < n; ++k) {
      const int turns = k * step;
      auto rotated = net->forward(rotate_grid(state, turns),
                                  rotate_action_tensor(action, turns), t);
      auto want_s = rotate_grid(base.eps_s, turns);
      auto want_a = rotate_action_tensor(base.eps_a, turns);
      auto got_joint =
          torch::cat({rotated.eps_s.reshape({-1}), rotated.eps_a.reshape({-1})});
      auto want_joint = torch::cat({want_s.reshape({-1}), want_a.reshape({-1})});
      auto& c = report.combined.errors[k].max_rel_error;
      auto& sh = report.state_head.errors[k].max_rel_error;
      auto& ah = report.action_head.errors[k].max_rel_error;
      c = std::max(c, relative_error(got_joint, want_joint));
      sh = std::max(sh, relative_error(rotated.eps_s, want_s));
      ah = std::max(ah, relative_error(rotated.eps_a, want_a));
    }
  }
  return report;
}

}  // namespace idpoe::equivariant
