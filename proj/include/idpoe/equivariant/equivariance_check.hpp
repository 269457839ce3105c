// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "idpoe/equivariant/group.hpp"
#include "idpoe/equivariant/policy_network.hpp"

namespace idpoe::equivariant {

struct ElementError {
  int element = 0;
  double max_rel_error = 0.0;
};

/// max over samples of ||f(g.x) - g.f(x)|| / ||f(x)||, per group element.
struct EquivarianceReport {
  int group_order = 1;
  int samples = 0;
  double tolerance = 0.0;
  std::vector<ElementError> errors;

  double worst() const;
  bool passed() const { return worst() <= tolerance; }
};

using FieldMap = std::function<torch::Tensor(const torch::Tensor&)>;

/// Audits a single layer mapping `in` fields to `out` fields on random
/// inputs of spatial size `size`, checked against every element of C_n where
/// n is the output type's group order.
EquivarianceReport check_equivariance(const FieldMap& layer, const FieldType& in,
                                      const FieldType& out, int64_t size,
                                      int samples, double tolerance,
                                      uint64_t seed, int64_t batch = 1);

/// End-to-end audit of the noise predictor: the clip is rotated as an image,
/// the trajectory with rotate_action, and the two outputs are compared the
/// same way. The per-element error combines both heads; the separate state
/// and action figures are reported as well. `check_group_order` selects the
/// group to audit against (a non-equivariant network can be audited against
/// C_4 as a negative control).
struct NetworkEquivarianceReport {
  EquivarianceReport combined;
  EquivarianceReport state_head;
  EquivarianceReport action_head;
};

NetworkEquivarianceReport check_network_equivariance(
    PolicyNetwork& net, int samples, double tolerance, uint64_t seed,
    int check_group_order = 4);

}  // namespace idpoe::equivariant
