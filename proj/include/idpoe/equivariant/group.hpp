// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include <torch/torch.h>

#include "idpoe/core.hpp"

namespace idpoe::equivariant {

/// Element k of C_n, i.e. a rotation by 2*pi*k/n.
struct GroupElement {
  int index = 0;
  int order = 1;

  double angle() const;
  friend bool operator==(const GroupElement&, const GroupElement&) = default;
};

/// Planar rotation group C_n with explicit composition and inverse tables.
class CyclicGroup {
 public:
  explicit CyclicGroup(int order);

  int order() const { return order_; }
  GroupElement identity() const { return {0, order_}; }
  GroupElement element(int index) const;
  std::vector<GroupElement> elements() const;

  GroupElement compose(const GroupElement& a, const GroupElement& b) const;
  GroupElement inverse(const GroupElement& g) const;

  const std::vector<std::vector<int>>& composition_table() const {
    return table_;
  }

 private:
  void check_member(const GroupElement& g) const;

  int order_;
  std::vector<std::vector<int>> table_;
  std::vector<int> inverses_;
};

/// Builds C_n and verifies closure, identity and inverses on the tables.
CyclicGroup cyclic_group(int n);

/// Number of 90 degree turns realizing g; UnsupportedElementError when the
/// rotation is not a multiple of 90 degrees.
int quarter_turns(const GroupElement& g);

/// Direct sum of `trivial` scalar channels followed by `regular` fields of n
/// channels each. Channel layout: [trivial..., field0 r0..r(n-1), field1 ...].
struct FieldType {
  int group_order = 1;
  int trivial = 0;
  int regular = 0;

  int64_t channels() const {
    return trivial + static_cast<int64_t>(regular) * group_order;
  }
  static FieldType trivial_fields(int n, int count) { return {n, count, 0}; }
  static FieldType regular_fields(int n, int count) { return {n, 0, count}; }
  friend bool operator==(const FieldType&, const FieldType&) = default;
};

/// A (possibly batched) spatial feature map (..., C, H, W) with its
/// representation.
struct FeatureField {
  torch::Tensor data;
  FieldType type;
};

/// Rotates a square grid by a number of quarter turns. One quarter turn maps
/// the point with centered coordinates (x, y) to (-y, x), x being the column
/// axis and y the row axis.
torch::Tensor rotate_grid(const torch::Tensor& x, int turns);

/// Group action on a tensor laid out per `type`: spatial rotation plus cyclic
/// shift of every regular field (channel r receives channel r - k).
torch::Tensor rotate_field_tensor(const torch::Tensor& x, const FieldType& type,
                                  const GroupElement& g);

FeatureField rotate_field(const FeatureField& x, const GroupElement& g);

/// Rotates every waypoint about the image center, (x, y) -> (-y, x) per
/// quarter turn.
TrajectoryAction rotate_action(const TrajectoryAction& a, const GroupElement& g);

/// Same rotation on flat (..., 2N) action tensors.
torch::Tensor rotate_action_tensor(const torch::Tensor& a, int turns);

}  // namespace idpoe::equivariant
