// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include <ATen/CPUGeneratorImpl.h>
#include <torch/torch.h>

namespace idpoe {

/// SplitMix64 finalizer; used to derive independent stream seeds.
uint64_t mix_seed(uint64_t seed, uint64_t stream);

at::Generator make_generator(uint64_t seed);

/// Gaussian noise for a batch where every item owns its own random stream,
/// so an item's draws do not depend on which other items share the batch.
class NoiseSource {
 public:
  /// One stream per item, seeded from (seed, item_seeds[i]).
  NoiseSource(uint64_t seed, const std::vector<uint64_t>& item_keys);
  /// Items 0..count-1.
  NoiseSource(uint64_t seed, int64_t count);

  int64_t items() const { return static_cast<int64_t>(streams_.size()); }

  /// Standard normal tensor of shape (items, item_shape...).
  torch::Tensor normal(const std::vector<int64_t>& item_shape);

 private:
  std::vector<at::Generator> streams_;
};

}  // namespace idpoe
