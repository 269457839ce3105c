// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#include "idpoe/equivariant/group.hpp"

#include <numbers>
#include <sstream>

namespace idpoe::equivariant {

double GroupElement::angle() const {
  return 2.0 * std::numbers::pi * index / static_cast<double>(order);
}

CyclicGroup::CyclicGroup(int order) : order_(order) {
  if (order < 1) throw ParameterError("cyclic group order must be >= 1");
  table_.assign(order, std::vector<int>(order));
  inverses_.assign(order, 0);
  for (int a = 0; a < order; ++a) {
    for (int b = 0; b < order; ++b) table_[a][b] = (a + b) % order;
    inverses_[a] = (order - a) % order;
  }
}

void CyclicGroup::check_member(const GroupElement& g) const {
  if (g.order != order_ || g.index < 0 || g.index >= order_) {
    throw ParameterError("element does not belong to this group");
  }
}

GroupElement CyclicGroup::element(int index) const {
  return {((index % order_) + order_) % order_, order_};
}

std::vector<GroupElement> CyclicGroup::elements() const {
  std::vector<GroupElement> out;
  for (int k = 0; k < order_; ++k) out.push_back({k, order_});
  return out;
}

GroupElement CyclicGroup::compose(const GroupElement& a,
                                  const GroupElement& b) const {
  check_member(a);
  check_member(b);
  return {table_[a.index][b.index], order_};
}

GroupElement CyclicGroup::inverse(const GroupElement& g) const {
  check_member(g);
  return {inverses_[g.index], order_};
}

CyclicGroup cyclic_group(int n) {
  CyclicGroup group(n);
  const auto& table = group.composition_table();
  for (int a = 0; a < n; ++a) {
    if (table[0][a] != a || table[a][0] != a) {
      throw Error("cyclic group identity check failed");
    }
    const auto inv = group.inverse(group.element(a));
    if (table[a][inv.index] != 0) throw Error("cyclic group inverse check failed");
    for (int b = 0; b < n; ++b) {
      if (table[a][b] < 0 || table[a][b] >= n) {
        throw Error("cyclic group closure check failed");
      }
    }
  }
  return group;
}

int quarter_turns(const GroupElement& g) {
  if (g.order < 1) throw ParameterError("invalid group element");
  const int scaled = 4 * g.index;
  if (scaled % g.order != 0) {
    std::ostringstream msg;
    msg << "rotation by " << g.index << "/" << g.order
        << " of a turn is not exact on the pixel grid";
    throw UnsupportedElementError(msg.str());
  }
  return ((scaled / g.order) % 4 + 4) % 4;
}

torch::Tensor rotate_grid(const torch::Tensor& x, int turns) {
  turns = ((turns % 4) + 4) % 4;
  if (turns == 0) return x;
  if (x.size(-1) != x.size(-2)) {
    throw ShapeError("grid rotation needs a square spatial grid");
  }
  // torch::rot90 turns from the first towards the second axis; our positive
  // sense is the opposite one.
  return torch::rot90(x, -turns, {-2, -1});
}

torch::Tensor rotate_field_tensor(const torch::Tensor& x, const FieldType& type,
                                  const GroupElement& g) {
  if (g.order != type.group_order) {
    throw ConfigError("group element and field type use different groups");
  }
  if (x.dim() < 3 || x.size(-3) != type.channels()) {
    std::ostringstream msg;
    msg << "field expects " << type.channels() << " channels, tensor has shape "
        << x.sizes();
    throw ShapeError(msg.str());
  }
  auto rotated = rotate_grid(x, quarter_turns(g));
  if (type.regular == 0 || g.index == 0) return rotated;

  auto trivial_part = rotated.narrow(-3, 0, type.trivial);
  auto regular_part = rotated.narrow(-3, type.trivial,
                                     static_cast<int64_t>(type.regular) * g.order);
  auto sizes = regular_part.sizes().vec();
  const auto H = sizes[sizes.size() - 2];
  const auto W = sizes[sizes.size() - 1];
  std::vector<int64_t> split(sizes.begin(), sizes.end() - 3);
  split.insert(split.end(), {type.regular, g.order, H, W});
  auto shifted = torch::roll(regular_part.reshape(split), {g.index}, {-3})
                     .reshape(sizes);
  return torch::cat({trivial_part, shifted}, -3);
}

FeatureField rotate_field(const FeatureField& x, const GroupElement& g) {
  return {rotate_field_tensor(x.data, x.type, g), x.type};
}

TrajectoryAction rotate_action(const TrajectoryAction& a, const GroupElement& g) {
  const int turns = quarter_turns(g);
  std::vector<Vec2> out = a.points();
  for (auto& p : out) {
    for (int k = 0; k < turns; ++k) p = {-p.y, p.x};
  }
  return TrajectoryAction(std::move(out));
}

torch::Tensor rotate_action_tensor(const torch::Tensor& a, int turns) {
  turns = ((turns % 4) + 4) % 4;
  if (turns == 0) return a;
  if (a.size(-1) % 2 != 0) throw ShapeError("action tensor must be (..., 2N)");
  auto sizes = a.sizes().vec();
  auto pts = a.reshape({-1, a.size(-1) / 2, 2});
  auto x = pts.select(-1, 0);
  auto y = pts.select(-1, 1);
  for (int k = 0; k < turns; ++k) {
    auto nx = -y;
    y = x;
    x = nx;
  }
  return torch::stack({x, y}, -1).reshape(sizes);
}

}  // namespace idpoe::equivariant
