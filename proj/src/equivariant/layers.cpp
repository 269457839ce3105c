// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#include "idpoe/equivariant/layers.hpp"

#include <cmath>

namespace idpoe::equivariant {
namespace {

int turns_per_step(int n) { return quarter_turns({1, n}); }

void check_channels(const torch::Tensor& x, int64_t expected,
                    const char* layer) {
  if (x.dim() != 4 || x.size(1) != expected) {
    throw ConfigError(std::string(layer) + ": input representation has " +
                      std::to_string(x.dim() == 4 ? x.size(1) : -1) +
                      " channels, layer expects " + std::to_string(expected));
  }
}

torch::Tensor kaiming_like(std::vector<int64_t> shape, int64_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return torch::empty(shape).uniform_(-bound, bound);
}

}  // namespace

torch::Tensor expand_lifting_kernel(const torch::Tensor& base, int n) {
  const int step = turns_per_step(n);
  std::vector<torch::Tensor> blocks;
  blocks.reserve(n);
  for (int r = 0; r < n; ++r) blocks.push_back(rotate_grid(base, r * step));
  auto stacked = torch::stack(blocks, 1);  // (out, n, in, k, k)
  return stacked.reshape({base.size(0) * n, base.size(1), base.size(2),
                          base.size(3)});
}

torch::Tensor expand_group_kernel(const torch::Tensor& base, int n) {
  const int step = turns_per_step(n);
  std::vector<torch::Tensor> blocks;
  blocks.reserve(n);
  for (int r = 0; r < n; ++r) {
    blocks.push_back(rotate_grid(torch::roll(base, {r}, {2}), r * step));
  }
  auto stacked = torch::stack(blocks, 1);  // (out, n, in, n, k, k)
  return stacked.reshape({base.size(0) * n, base.size(1) * n, base.size(3),
                          base.size(4)});
}

LiftingConvImpl::LiftingConvImpl(int in_channels, int out_fields,
                                 int kernel_size, int n)
    : in_(in_channels), out_(out_fields), kernel_(kernel_size), n_(n) {
  if (kernel_size % 2 != 1) throw ConfigError("kernel size must be odd");
  turns_per_step(n);
  weight = register_parameter(
      "weight", kaiming_like({out_fields, in_channels, kernel_size, kernel_size},
                             in_channels * kernel_size * kernel_size));
  bias = register_parameter("bias", torch::zeros({out_fields}));
}

torch::Tensor LiftingConvImpl::forward(const torch::Tensor& x) {
  check_channels(x, in_, "lifting conv");
  auto kernel = expand_lifting_kernel(weight, n_);
  return torch::conv2d(x, kernel, bias.repeat_interleave(n_), 1, kernel_ / 2);
}

GroupConvImpl::GroupConvImpl(int in_fields, int out_fields, int kernel_size,
                             int n)
    : in_(in_fields), out_(out_fields), kernel_(kernel_size), n_(n) {
  if (kernel_size % 2 != 1) throw ConfigError("kernel size must be odd");
  turns_per_step(n);
  weight = register_parameter(
      "weight",
      kaiming_like({out_fields, in_fields, n, kernel_size, kernel_size},
                   static_cast<int64_t>(in_fields) * n * kernel_size *
                       kernel_size));
  bias = register_parameter("bias", torch::zeros({out_fields}));
}

torch::Tensor GroupConvImpl::forward(const torch::Tensor& x) {
  check_channels(x, static_cast<int64_t>(in_) * n_, "group conv");
  auto kernel = expand_group_kernel(weight, n_);
  return torch::conv2d(x, kernel, bias.repeat_interleave(n_), 1, kernel_ / 2);
}

ProjectToTrivialImpl::ProjectToTrivialImpl(int in_fields, int out_channels,
                                           int kernel_size, int n)
    : in_(in_fields), out_(out_channels), n_(n) {
  conv_ = register_module("conv",
                          GroupConv(in_fields, out_channels, kernel_size, n));
}

torch::Tensor ProjectToTrivialImpl::forward(const torch::Tensor& x) {
  auto y = conv_->forward(x);
  return y.view({y.size(0), out_, n_, y.size(2), y.size(3)}).mean(2);
}

FieldNormImpl::FieldNormImpl(int fields, int n, int groups)
    : fields_(fields), n_(n), groups_(groups) {
  if (groups_ <= 0) {
    groups_ = 1;
    for (int g : {8, 4, 2}) {
      if (fields % g == 0) {
        groups_ = g;
        break;
      }
    }
  }
  if (fields % groups_ != 0) {
    throw ConfigError("field count must be divisible by norm groups");
  }
  weight = register_parameter("weight", torch::ones({fields}));
  bias = register_parameter("bias", torch::zeros({fields}));
}

torch::Tensor FieldNormImpl::forward(const torch::Tensor& x) {
  check_channels(x, static_cast<int64_t>(fields_) * n_, "field norm");
  auto y = torch::group_norm(x, groups_, {}, {}, 1e-5);
  auto w = weight.repeat_interleave(n_).view({1, -1, 1, 1});
  auto b = bias.repeat_interleave(n_).view({1, -1, 1, 1});
  return y * w + b;
}

RegularBiasImpl::RegularBiasImpl(int embed_dim, int fields, int n)
    : fields_(fields), n_(n) {
  proj_ = register_module("proj", torch::nn::Linear(embed_dim, fields));
}

torch::Tensor RegularBiasImpl::forward(const torch::Tensor& frame_embeddings) {
  // (B, n, E) -> (B, n, F) -> (B, F, n) -> channel layout [field][rotation]
  auto y = proj_->forward(torch::silu(frame_embeddings));
  const auto batch = y.size(0);
  return y.permute({0, 2, 1}).reshape({batch, fields_ * n_, 1, 1});
}

ResBlockImpl::ResBlockImpl(int in_fields, int out_fields, int embed_dim, int n) {
  norm1_ = register_module("norm1", FieldNorm(in_fields, n));
  conv1_ = register_module("conv1", GroupConv(in_fields, out_fields, 3, n));
  cond_ = register_module("cond", RegularBias(embed_dim, out_fields, n));
  norm2_ = register_module("norm2", FieldNorm(out_fields, n));
  conv2_ = register_module("conv2", GroupConv(out_fields, out_fields, 3, n));
  if (in_fields != out_fields) {
    skip_ = register_module("skip", GroupConv(in_fields, out_fields, 1, n));
  }
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x,
                                    const torch::Tensor& frame_embeddings) {
  auto h = conv1_->forward(torch::silu(norm1_->forward(x)));
  h = h + cond_->forward(frame_embeddings);
  h = conv2_->forward(torch::silu(norm2_->forward(h)));
  auto skip = skip_ ? skip_->forward(x) : x;
  return skip + h;
}

AttentionBlockImpl::AttentionBlockImpl(int fields, int heads, int n)
    : fields_(fields), heads_(heads), n_(n) {
  if (fields % heads != 0) {
    throw ConfigError("attention heads must divide the field count");
  }
  norm_ = register_module("norm", FieldNorm(fields, n));
  qkv_ = register_module("qkv", GroupConv(fields, 3 * fields, 1, n));
  out_ = register_module("out", GroupConv(fields, fields, 1, n));
}

torch::Tensor AttentionBlockImpl::forward(const torch::Tensor& x) {
  const auto B = x.size(0);
  const auto H = x.size(2);
  const auto W = x.size(3);
  const int64_t head_channels = static_cast<int64_t>(fields_ / heads_) * n_;
  auto qkv = qkv_->forward(norm_->forward(x));
  auto parts = qkv.chunk(3, 1);
  auto shape = std::vector<int64_t>{B, heads_, head_channels, H * W};
  auto q = parts[0].reshape(shape);
  auto k = parts[1].reshape(shape);
  auto v = parts[2].reshape(shape);
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_channels));
  auto scores = torch::matmul(q.transpose(2, 3), k) * scale;  // (B, h, P, P)
  auto weights = torch::softmax(scores, -1);
  auto attended = torch::matmul(v, weights.transpose(2, 3));  // (B, h, c, P)
  return x + out_->forward(attended.reshape({B, fields_ * n_, H, W}));
}

torch::Tensor timestep_embedding(const torch::Tensor& t, int dim) {
  const int half = dim / 2;
  auto freqs = torch::exp(-std::log(10000.0) *
                          torch::arange(half, torch::kFloat32) / half);
  auto args = t.to(torch::kFloat32).unsqueeze(1) * freqs.unsqueeze(0);
  return torch::cat({torch::sin(args), torch::cos(args)}, 1);
}

}  // namespace idpoe::equivariant

namespace idpoe::equivariant {

OrbitHeadImpl::OrbitHeadImpl(int fields, int n, int grid, int point_dim,
                             int invariant_dim, int hidden, int out_dim)
    : fields_(fields),
      n_(n),
      step_turns_(quarter_turns({1, n})),
      point_dim_(point_dim),
      invariant_dim_(invariant_dim) {
  if (out_dim % 2 != 0 || point_dim % 2 != 0) {
    throw ConfigError("orbit head inputs/outputs must be 2D point lists");
  }
  const int64_t in = static_cast<int64_t>(fields) * n * grid * grid + point_dim +
                     invariant_dim;
  namespace nn = torch::nn;
  mlp_ = register_module(
      "mlp", nn::Sequential(nn::Linear(in, hidden), nn::SiLU(),
                            nn::Linear(hidden, hidden), nn::SiLU(),
                            nn::Linear(hidden, out_dim)));
}

torch::Tensor OrbitHeadImpl::forward(const torch::Tensor& features,
                                     const torch::Tensor& points,
                                     const torch::Tensor& invariant) {
  const auto B = features.size(0);
  const auto type = FieldType::regular_fields(n_, fields_);
  std::vector<torch::Tensor> inputs;
  inputs.reserve(n_);
  for (int r = 0; r < n_; ++r) {
    const GroupElement inv{(n_ - r) % n_, n_};
    std::vector<torch::Tensor> parts{
        rotate_field_tensor(features, type, inv).reshape({B, -1})};
    if (point_dim_ > 0) parts.push_back(rotate_action_tensor(points, -r * step_turns_));
    if (invariant_dim_ > 0) parts.push_back(invariant);
    inputs.push_back(torch::cat(parts, 1));
  }
  auto outputs = mlp_->forward(torch::cat(inputs, 0));  // (n*B, out)
  auto result = rotate_action_tensor(outputs.narrow(0, 0, B), 0);
  for (int r = 1; r < n_; ++r) {
    result = result +
             rotate_action_tensor(outputs.narrow(0, r * B, B), r * step_turns_);
  }
  return result / static_cast<double>(n_);
}

}  // namespace idpoe::equivariant
