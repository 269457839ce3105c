// Copyright (C) 2026 idpoe contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include "idpoe/equivariant/group.hpp"

namespace idpoe::equivariant {

/// Builds the full (out*n, in, k, k) filter bank of a lifting convolution
/// from base filters (out, in, k, k): output rotation r uses the base filter
/// rotated by r group steps.
torch::Tensor expand_lifting_kernel(const torch::Tensor& base, int n);

/// Builds the (out*n, in*n, k, k) filter bank of a regular-to-regular group
/// convolution from base filters (out, in, n, k, k). The block for output
/// rotation r and input rotation s is base[:, :, (s - r) mod n] rotated by r
/// steps, which is the weight-sharing solution of K(gx) = rho_out(g) K(x)
/// rho_in(g^-1).
torch::Tensor expand_group_kernel(const torch::Tensor& base, int n);

/// Trivial (image) channels -> regular fields.
class LiftingConvImpl : public torch::nn::Module {
 public:
  LiftingConvImpl(int in_channels, int out_fields, int kernel_size, int n);
  torch::Tensor forward(const torch::Tensor& x);

  FieldType in_type() const { return FieldType::trivial_fields(n_, in_); }
  FieldType out_type() const { return FieldType::regular_fields(n_, out_); }

  torch::Tensor weight, bias;

 private:
  int in_, out_, kernel_, n_;
};
TORCH_MODULE(LiftingConv);

/// Regular fields -> regular fields.
class GroupConvImpl : public torch::nn::Module {
 public:
  GroupConvImpl(int in_fields, int out_fields, int kernel_size, int n);
  torch::Tensor forward(const torch::Tensor& x);

  FieldType in_type() const { return FieldType::regular_fields(n_, in_); }
  FieldType out_type() const { return FieldType::regular_fields(n_, out_); }

  torch::Tensor weight, bias;

 private:
  int in_, out_, kernel_, n_;
};
TORCH_MODULE(GroupConv);

/// Regular fields -> trivial channels: a group convolution followed by a mean
/// over the rotation axis of each output field.
class ProjectToTrivialImpl : public torch::nn::Module {
 public:
  ProjectToTrivialImpl(int in_fields, int out_channels, int kernel_size, int n);
  torch::Tensor forward(const torch::Tensor& x);

  FieldType in_type() const { return FieldType::regular_fields(n_, in_); }
  FieldType out_type() const { return FieldType::trivial_fields(n_, out_); }

 private:
  int in_, out_, n_;
  GroupConv conv_{nullptr};
};
TORCH_MODULE(ProjectToTrivial);

/// Group normalization whose groups hold whole fields; the affine parameters
/// are shared by the n channels of a field.
class FieldNormImpl : public torch::nn::Module {
 public:
  FieldNormImpl(int fields, int n, int groups = 0);
  torch::Tensor forward(const torch::Tensor& x);

  torch::Tensor weight, bias;

 private:
  int fields_, n_, groups_;
};
TORCH_MODULE(FieldNorm);

/// Projects per-rotation embeddings (B, n, E) to a per-channel bias
/// (B, fields * n, 1, 1) that shifts like a regular field.
class RegularBiasImpl : public torch::nn::Module {
 public:
  RegularBiasImpl(int embed_dim, int fields, int n);
  torch::Tensor forward(const torch::Tensor& frame_embeddings);

 private:
  int fields_, n_;
  torch::nn::Linear proj_{nullptr};
};
TORCH_MODULE(RegularBias);

/// Pre-norm residual block on regular fields with an additive conditioning
/// bias.
class ResBlockImpl : public torch::nn::Module {
 public:
  ResBlockImpl(int in_fields, int out_fields, int embed_dim, int n);
  torch::Tensor forward(const torch::Tensor& x,
                        const torch::Tensor& frame_embeddings);

 private:
  FieldNorm norm1_{nullptr}, norm2_{nullptr};
  GroupConv conv1_{nullptr}, conv2_{nullptr}, skip_{nullptr};
  RegularBias cond_{nullptr};
};
TORCH_MODULE(ResBlock);

/// Multi-head self-attention over spatial positions. Heads hold whole fields
/// and q/k/v/out are 1x1 group convolutions, so the block commutes with grid
/// rotations.
class AttentionBlockImpl : public torch::nn::Module {
 public:
  AttentionBlockImpl(int fields, int heads, int n);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  int fields_, heads_, n_;
  FieldNorm norm_{nullptr};
  GroupConv qkv_{nullptr}, out_{nullptr};
};
TORCH_MODULE(AttentionBlock);

/// Sinusoidal embedding of integer diffusion steps, (B) -> (B, dim).
torch::Tensor timestep_embedding(const torch::Tensor& t, int dim);

}  // namespace idpoe::equivariant

namespace idpoe::equivariant {

/// Equivariant readout from a pooled regular feature map to a 2D-point
/// vector (2P values). An MLP sees the features and the optional point input
/// expressed in each of the n group frames; its answers are rotated back and
/// averaged:
///   out = 1/n sum_r R_r mlp(g_r^-1 . features, R_r^-1 . points, invariant)
/// so rotating the input rotates the output for any MLP weights.
class OrbitHeadImpl : public torch::nn::Module {
 public:
  OrbitHeadImpl(int fields, int n, int grid, int point_dim, int invariant_dim,
                int hidden, int out_dim);

  /// features (B, fields*n, grid, grid); points (B, point_dim) or undefined
  /// when point_dim == 0; invariant (B, invariant_dim) or undefined.
  torch::Tensor forward(const torch::Tensor& features, const torch::Tensor& points,
                        const torch::Tensor& invariant);

 private:
  int fields_, n_, step_turns_, point_dim_, invariant_dim_;
  torch::nn::Sequential mlp_{nullptr};
};
TORCH_MODULE(OrbitHead);

}  // namespace idpoe::equivariant
