// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#include "idpoe/rng.hpp"

namespace idpoe {

uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

at::Generator make_generator(uint64_t seed) {
  return at::detail::createCPUGenerator(seed);
}

NoiseSource::NoiseSource(uint64_t seed, const std::vector<uint64_t>& item_keys) {
  streams_.reserve(item_keys.size());
  for (auto key : item_keys) streams_.push_back(make_generator(mix_seed(seed, key)));
}

NoiseSource::NoiseSource(uint64_t seed, int64_t count) {
  streams_.reserve(static_cast<std::size_t>(count));
  for (int64_t i = 0; i < count; ++i) {
    streams_.push_back(make_generator(mix_seed(seed, static_cast<uint64_t>(i))));
  }
}

torch::Tensor NoiseSource::normal(const std::vector<int64_t>& item_shape) {
  std::vector<torch::Tensor> parts;
  parts.reserve(streams_.size());
  for (auto& gen : streams_) parts.push_back(torch::randn(item_shape, gen));
  if (parts.empty()) {
    std::vector<int64_t> shape{0};
    shape.insert(shape.end(), item_shape.begin(), item_shape.end());
    return torch::empty(shape);
  }
  return torch::stack(parts, 0);
}

}  // namespace idpoe
